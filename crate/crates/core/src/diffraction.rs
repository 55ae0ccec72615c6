//! Uniform-period (grating-lobe) steering.
//!
//! An all-ON aperture with period `δ` radiates its diffraction orders where
//! `(δ/λ)(sin θ_I + sin θ_T) = n`. Choosing `δ = nλ / (sin θ_T + sin θ_I)`
//! places order `n` on a desired departure angle; the specular order `n = 0`
//! is always present.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_angle, sin_deg};

/// Slack on the visibility test so that boundary orders are not lost to rounding.
const VISIBILITY_EPS: f64 = 1e-12;

/// Column stride on the fixed scaffold that approximates a period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSnap {
    pub stride: usize,
    pub delta_actual: f64,
    pub m_active: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodDesign {
    pub period: f64,
    pub order: i32,
    pub theta_i_deg: f64,
    pub theta_t_deg: f64,
    pub wavelength: f64,
    pub snapped: Option<GridSnap>,
}

impl PeriodDesign {
    /// Designs the period aligning order `n` with `θ_T`.
    pub fn new(theta_i_deg: f64, theta_t_deg: f64, wavelength: f64, order: i32) -> Result<Self> {
        let period = period_for_target(theta_i_deg, theta_t_deg, wavelength, order)?;
        Ok(PeriodDesign {
            period,
            order,
            theta_i_deg,
            theta_t_deg,
            wavelength,
            snapped: None,
        })
    }

    /// Designs with the first order whose sign gives a positive period.
    pub fn first_order(theta_i_deg: f64, theta_t_deg: f64, wavelength: f64) -> Result<Self> {
        let u = sin_deg(theta_t_deg) + sin_deg(theta_i_deg);
        Self::new(theta_i_deg, theta_t_deg, wavelength, if u < 0.0 { -1 } else { 1 })
    }

    pub fn snap(mut self, pitch: f64, wells_per_row: usize) -> Result<Self> {
        self.snapped = Some(snap_to_grid(self.period, pitch, wells_per_row)?);
        Ok(self)
    }

    pub fn visible_orders(&self) -> Result<OrderSet> {
        visible_orders(self.period, self.wavelength, self.theta_i_deg)
    }
}

/// `δ*(n) = nλ / (sin θ_T + sin θ_I)`.
pub fn period_for_target(theta_i_deg: f64, theta_t_deg: f64, wavelength: f64, order: i32) -> Result<f64> {
    check_angle("incidence angle", theta_i_deg)?;
    check_angle("target angle", theta_t_deg)?;
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::invalid(format!("wavelength must be positive, got {wavelength}")));
    }
    let u = sin_deg(theta_t_deg) + sin_deg(theta_i_deg);
    if u.abs() <= 1e-12 {
        return Err(Error::invalid(
            "target is the specular direction: order n=0 is period-independent",
        ));
    }
    if order == 0 {
        return Err(Error::invalid("order n=0 is period-independent; choose n != 0"));
    }
    let delta = order as f64 * wavelength / u;
    if delta <= 0.0 {
        return Err(Error::invalid(format!(
            "order {order} has the wrong sign for this geometry (sin θ_T + sin θ_I = {u:.6}); use n = {}",
            -order
        )));
    }
    Ok(delta)
}

fn check_period(delta: f64, wavelength: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("period must be positive, got {delta}")));
    }
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::invalid(format!("wavelength must be positive, got {wavelength}")));
    }
    Ok(())
}

fn order_sine(delta: f64, wavelength: f64, sin_i: f64, order: i32) -> Option<f64> {
    let s = order as f64 * wavelength / delta - sin_i;
    if s.abs() <= 1.0 + VISIBILITY_EPS {
        Some(s.clamp(-1.0, 1.0))
    } else {
        None
    }
}

/// Direction of order `n`, or `None` when the order is evanescent.
pub fn order_direction(delta: f64, wavelength: f64, theta_i_deg: f64, order: i32) -> Result<Option<f64>> {
    check_period(delta, wavelength)?;
    check_angle("incidence angle", theta_i_deg)?;
    if order == 0 {
        return Ok(Some(-theta_i_deg));
    }
    Ok(order_sine(delta, wavelength, sin_deg(theta_i_deg), order).map(|s| s.asin().to_degrees()))
}

/// Contiguous range of propagating orders and their directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSet {
    pub n_min: i32,
    pub n_max: i32,
    pub directions: Vec<(i32, f64)>,
}

impl OrderSet {
    pub fn count(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    pub fn direction(&self, order: i32) -> Option<f64> {
        self.directions.iter().find(|(n, _)| *n == order).map(|&(_, t)| t)
    }
}

pub fn visible_orders(delta: f64, wavelength: f64, theta_i_deg: f64) -> Result<OrderSet> {
    check_period(delta, wavelength)?;
    check_angle("incidence angle", theta_i_deg)?;
    let sin_i = sin_deg(theta_i_deg);
    let ratio = delta / wavelength;
    let mut n_min = (ratio * (sin_i - 1.0)).ceil() as i32;
    let mut n_max = (ratio * (sin_i + 1.0)).floor() as i32;
    // Reconcile the closed-form bounds with the visibility test at the edges.
    let visible = |n: i32| n == 0 || order_sine(delta, wavelength, sin_i, n).is_some();
    while visible(n_min - 1) {
        n_min -= 1;
    }
    while n_min < 0 && !visible(n_min) {
        n_min += 1;
    }
    while visible(n_max + 1) {
        n_max += 1;
    }
    while n_max > 0 && !visible(n_max) {
        n_max -= 1;
    }
    let directions = (n_min..=n_max)
        .map(|n| {
            let t = order_direction(delta, wavelength, theta_i_deg, n)?
                .expect("orders inside [n_min, n_max] are visible");
            Ok((n, t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderSet {
        n_min,
        n_max,
        directions,
    })
}

/// Nearest scaffold stride to `delta`, rounding half up.
pub fn snap_to_grid(delta: f64, pitch: f64, wells_per_row: usize) -> Result<GridSnap> {
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(Error::invalid(format!("scaffold pitch must be positive, got {pitch}")));
    }
    if wells_per_row == 0 {
        return Err(Error::invalid("a row needs at least one well"));
    }
    if !(delta >= pitch * (1.0 - 1e-12)) {
        return Err(Error::invalid(format!(
            "period {delta} m is finer than the scaffold pitch {pitch} m"
        )));
    }
    let stride = ((delta / pitch + 0.5).floor() as usize).max(1);
    Ok(GridSnap {
        stride,
        delta_actual: stride as f64 * pitch,
        m_active: (wells_per_row - 1) / stride + 1,
    })
}

/// ON at wells `0, p, 2p, …` of a row.
pub fn stride_bits(stride: usize, wells_per_row: usize) -> Vec<bool> {
    (0..wells_per_row).map(|i| stride > 0 && i % stride == 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub target_deg: f64,
    pub covered: bool,
    /// Closest visible order and its direction.
    pub nearest_order: i32,
    pub nearest_deg: f64,
}

/// Checks whether extra targets already fall on visible orders of a design.
pub fn multibeam_period_check(design: &PeriodDesign, extra_targets: &[f64], tol_deg: f64) -> Result<Vec<Coverage>> {
    let orders = design.visible_orders()?;
    Ok(extra_targets
        .iter()
        .map(|&target| {
            let &(n, t) = orders
                .directions
                .iter()
                .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
                .expect("the specular order is always visible");
            Coverage {
                target_deg: target,
                covered: (t - target).abs() <= tol_deg,
                nearest_order: n,
                nearest_deg: t,
            }
        })
        .collect())
}
