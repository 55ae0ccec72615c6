//! C interface to `reflector-core`.
//!
//! Objects are opaque heap handles released with their `_free` function.
//! Every call returns an [`RflStatus`]; on failure the message is available
//! from [`rfl_last_error`] on the same thread. Angles are degrees, lengths
//! meters.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use reflector_core::bounds::breakpoint_opt_mask;
use reflector_core::diffraction::{order_direction, period_for_target, snap_to_grid};
use reflector_core::fab::{build_layout, export_stl, stripe_mask_2d, LayoutDims};
use reflector_core::model::{array_factor, normalized_gain, pattern_sweep, AngleGrid, Aperture, ReflectionCoefficients};
use reflector_core::synthesis::{synthesize_mask, thinning_ratio, SteeringTask};
use reflector_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Io = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

/// Element lattice.
pub struct RflAperture(Aperture);

/// Per-element reflection coefficients.
pub struct RflMask(ReflectionCoefficients);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Core(Error),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RflStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RflStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            RflStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("output buffer too small; need {need} elements"));
            RflStatus::BufferTooSmall
        }
        Ok(Err(Fail::Core(e))) => {
            let io = e.is_io();
            set_error(e.to_string());
            if io {
                RflStatus::Io
            } else {
                RflStatus::InvalidInput
            }
        }
        Err(_) => {
            set_error("internal panic".to_string());
            RflStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, name: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(p: *mut T, v: T, name: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(name));
    }
    p.write(v);
    Ok(())
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn rfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_aperture_new(
    element_count: usize,
    spacing: f64,
    wavelength: f64,
    out: *mut *mut RflAperture,
) -> RflStatus {
    guard(|| {
        let ap = Aperture::new(element_count, spacing, wavelength)?;
        put(out, Box::into_raw(Box::new(RflAperture(ap))), "out")
    })
}

/// # Safety
/// `ap` must come from [`rfl_aperture_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rfl_aperture_free(ap: *mut RflAperture) {
    if !ap.is_null() {
        drop(Box::from_raw(ap));
    }
}

/// Binary mask from `len` bytes (nonzero = ON).
///
/// # Safety
/// `bits` must hold `len` bytes; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_mask_from_bits(bits: *const u8, len: usize, out: *mut *mut RflMask) -> RflStatus {
    guard(|| {
        let b: Vec<bool> = slice(bits, len, "bits")?.iter().map(|&v| v != 0).collect();
        put(out, Box::into_raw(Box::new(RflMask(ReflectionCoefficients::from_bits(&b)))), "out")
    })
}

/// Cosine-threshold mask for `n_targets` equally weighted targets.
///
/// # Safety
/// `ap` must be a live aperture, `targets` must hold `n_targets` values and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_synthesize_mask(
    ap: *const RflAperture,
    theta_i_deg: f64,
    targets: *const f64,
    n_targets: usize,
    psi: f64,
    out: *mut *mut RflMask,
) -> RflStatus {
    guard(|| {
        let ap = &deref(ap, "ap")?.0;
        let task = SteeringTask::equal_weights(theta_i_deg, slice(targets, n_targets, "targets")?)?.with_psi(psi)?;
        let mask = synthesize_mask(ap, &task)?;
        put(out, Box::into_raw(Box::new(RflMask(mask))), "out")
    })
}

/// # Safety
/// `mask` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rfl_mask_free(mask: *mut RflMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Number of elements, or 0 for a null handle.
///
/// # Safety
/// `mask` must be null or a live mask.
#[no_mangle]
pub unsafe extern "C" fn rfl_mask_len(mask: *const RflMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.len())
}

/// Copies the bits (0 or 1) into `out`, which holds `cap` bytes.
///
/// # Safety
/// `mask` must be live; `out` must hold `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn rfl_mask_bits(mask: *const RflMask, out: *mut u8, cap: usize) -> RflStatus {
    guard(|| {
        let bits = deref(mask, "mask")?
            .0
            .bits()
            .ok_or_else(|| Error::Invalid("mask is not binary".into()))?;
        if cap < bits.len() {
            return Err(Fail::Small(bits.len()));
        }
        let dst = slice_mut(out, cap, "out")?;
        for (d, b) in dst.iter_mut().zip(&bits) {
            *d = *b as u8;
        }
        Ok(())
    })
}

/// # Safety
/// `mask` must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_thinning_ratio(mask: *const RflMask, out: *mut f64) -> RflStatus {
    guard(|| put(out, thinning_ratio(&deref(mask, "mask")?.0)?, "out"))
}

/// Complex array factor.
///
/// # Safety
/// Handles must be live; `re` and `im` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_array_factor(
    ap: *const RflAperture,
    mask: *const RflMask,
    theta_t_deg: f64,
    theta_i_deg: f64,
    re: *mut f64,
    im: *mut f64,
) -> RflStatus {
    guard(|| {
        let p = array_factor(&deref(ap, "ap")?.0, &deref(mask, "mask")?.0, theta_t_deg, theta_i_deg)?;
        put(re, p.re, "re")?;
        put(im, p.im, "im")
    })
}

/// `|p|² / M²`.
///
/// # Safety
/// Handles must be live; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_normalized_gain(
    ap: *const RflAperture,
    mask: *const RflMask,
    theta_t_deg: f64,
    theta_i_deg: f64,
    out: *mut f64,
) -> RflStatus {
    guard(|| {
        let g = normalized_gain(&deref(ap, "ap")?.0, &deref(mask, "mask")?.0, theta_t_deg, theta_i_deg)?;
        put(out, g, "out")
    })
}

/// Normalized gain at each of `n` strictly increasing angles.
///
/// # Safety
/// Handles must be live; `thetas` and `gains` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn rfl_pattern_sweep(
    ap: *const RflAperture,
    mask: *const RflMask,
    theta_i_deg: f64,
    thetas: *const f64,
    n: usize,
    gains: *mut f64,
) -> RflStatus {
    guard(|| {
        let grid = AngleGrid::from_angles(slice(thetas, n, "thetas")?.to_vec())?;
        let p = pattern_sweep(&deref(ap, "ap")?.0, &deref(mask, "mask")?.0, theta_i_deg, &grid)?;
        slice_mut(gains, n, "gains")?.copy_from_slice(p.normalized_gain());
        Ok(())
    })
}

/// Period placing order `order` on `theta_t_deg`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_period_for_target(
    theta_i_deg: f64,
    theta_t_deg: f64,
    wavelength: f64,
    order: i32,
    out: *mut f64,
) -> RflStatus {
    guard(|| put(out, period_for_target(theta_i_deg, theta_t_deg, wavelength, order)?, "out"))
}

/// Direction of order `order`; `visible` is set false for evanescent orders.
///
/// # Safety
/// `out` and `visible` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_order_direction(
    period: f64,
    wavelength: f64,
    theta_i_deg: f64,
    order: i32,
    out: *mut f64,
    visible: *mut bool,
) -> RflStatus {
    guard(|| {
        let t = order_direction(period, wavelength, theta_i_deg, order)?;
        put(visible, t.is_some(), "visible")?;
        put(out, t.unwrap_or(f64::NAN), "out")
    })
}

/// Scaffold stride and active element count for a period.
///
/// # Safety
/// `stride` and `m_active` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_snap_to_grid(
    period: f64,
    pitch: f64,
    wells_per_row: usize,
    stride: *mut usize,
    m_active: *mut usize,
) -> RflStatus {
    guard(|| {
        let s = snap_to_grid(period, pitch, wells_per_row)?;
        put(stride, s.stride, "stride")?;
        put(m_active, s.m_active, "m_active")
    })
}

/// Exact best ON/OFF mask for `m` phases (radians).
///
/// # Safety
/// `phases` and `bits` must hold `m` values; `s_star` and `gamma_star`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rfl_breakpoint_opt_mask(
    phases: *const f64,
    m: usize,
    bits: *mut u8,
    s_star: *mut f64,
    gamma_star: *mut f64,
) -> RflStatus {
    guard(|| {
        let r = breakpoint_opt_mask(slice(phases, m, "phases")?)?;
        for (d, b) in slice_mut(bits, m, "bits")?.iter_mut().zip(&r.bits) {
            *d = *b as u8;
        }
        put(s_star, r.s_star, "s_star")?;
        put(gamma_star, r.gamma_star, "gamma_star")
    })
}

/// Writes `base.stl`, `pads.stl` and `stencil.stl` for a striped mask with
/// default plate dimensions.
///
/// # Safety
/// `mask` must be live and `dir` a nul-terminated UTF-8 path.
#[no_mangle]
pub unsafe extern "C" fn rfl_export_stl(mask: *const RflMask, rows: usize, dir: *const c_char) -> RflStatus {
    guard(|| {
        let mask = &deref(mask, "mask")?.0;
        let dir = CStr::from_ptr(deref(dir, "dir")?)
            .to_str()
            .map_err(|_| Error::Invalid("directory path is not UTF-8".into()))?;
        let layout = build_layout(stripe_mask_2d(mask, rows)?, LayoutDims::default())?;
        export_stl(&layout, Path::new(dir))?;
        Ok(())
    })
}
