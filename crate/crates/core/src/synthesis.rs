//! Cosine-threshold synthesis of 1-bit masks.
//!
//! The ideal phase that makes element `m` add coherently toward `θ_T` is
//! `φ_m = k x_m (sin θ_T + sin θ_I)`. Binary masks keep the elements whose
//! rotated phasor lies in the constructive half-plane,
//! `b_m = 1{cos(φ_m + ψ) ≥ 0}`; bipolar masks map the same decision to ±1.
//! Several targets are handled by superposing their ideal phasors before
//! thresholding.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    check_angle, normalized_gain, power_to_db, sin_deg, Aperture, CoefficientKind,
    ReflectionCoefficients,
};

/// Default number of candidate offsets for [`select_psi`].
pub const DEFAULT_PSI_GRID: usize = 64;

/// One desired departure direction and its complex superposition weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub theta_deg: f64,
    pub weight: Complex64,
}

impl Target {
    pub fn unit(theta_deg: f64) -> Self {
        Target {
            theta_deg,
            weight: Complex64::new(1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringTask {
    incidence_deg: f64,
    targets: Vec<Target>,
    psi: f64,
}

impl SteeringTask {
    pub fn new(incidence_deg: f64, targets: Vec<Target>, psi: f64) -> Result<Self> {
        check_angle("incidence angle", incidence_deg)?;
        if targets.is_empty() {
            return Err(Error::invalid("a steering task needs at least one target"));
        }
        for t in &targets {
            check_angle("target angle", t.theta_deg)?;
            if !t.weight.is_finite() {
                return Err(Error::invalid("target weights must be finite"));
            }
        }
        if targets.iter().all(|t| t.weight.norm() == 0.0) {
            return Err(Error::invalid("all target weights are zero"));
        }
        check_psi(psi)?;
        Ok(SteeringTask {
            incidence_deg,
            targets,
            psi,
        })
    }

    /// Single target, unit weight, ψ = 0.
    pub fn single(incidence_deg: f64, target_deg: f64) -> Result<Self> {
        Self::new(incidence_deg, vec![Target::unit(target_deg)], 0.0)
    }

    /// Equal unit weights on every target, ψ = 0.
    pub fn equal_weights(incidence_deg: f64, targets_deg: &[f64]) -> Result<Self> {
        Self::new(
            incidence_deg,
            targets_deg.iter().map(|&t| Target::unit(t)).collect(),
            0.0,
        )
    }

    pub fn incidence_deg(&self) -> f64 {
        self.incidence_deg
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn psi(&self) -> f64 {
        self.psi
    }

    pub fn with_psi(&self, psi: f64) -> Result<Self> {
        check_psi(psi)?;
        Ok(SteeringTask {
            psi,
            ..self.clone()
        })
    }

    fn is_plain_single(&self) -> bool {
        self.targets.len() == 1 && self.targets[0].weight == Complex64::new(1.0, 0.0)
    }
}

fn check_psi(psi: f64) -> Result<()> {
    if !(0.0..TAU).contains(&psi) {
        return Err(Error::invalid(format!(
            "phase offset psi must lie in [0, 2pi), got {psi}"
        )));
    }
    Ok(())
}

/// Ideal compensating phases for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile {
    phases: Vec<f64>,
    increment: f64,
    offset: f64,
}

impl PhaseProfile {
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Step `φ_{m+1} - φ_m`. Positions decrease with `m`, so this is
    /// `-k·d·(sin θ_T + sin θ_I)`.
    pub fn increment(&self) -> f64 {
        self.increment
    }

    /// `φ_0`, so that `φ_m = offset + m·increment`.
    pub fn offset(&self) -> f64 {
        self.offset
    }
}

pub fn ideal_phase_profile(aperture: &Aperture, theta_i_deg: f64, theta_t_deg: f64) -> Result<PhaseProfile> {
    check_angle("incidence angle", theta_i_deg)?;
    check_angle("target angle", theta_t_deg)?;
    let k = aperture.wavenumber();
    let u = sin_deg(theta_t_deg) + sin_deg(theta_i_deg);
    let phases: Vec<f64> = aperture.positions().iter().map(|&x| k * x * u).collect();
    let step = -k * aperture.spacing() * u;
    let m = aperture.element_count() as f64;
    Ok(PhaseProfile {
        phases,
        increment: step,
        offset: -step * (m - 1.0) / 2.0,
    })
}

/// Nearest-neighbour projection of `e^{jφ_m}` onto {+1, -1}; `cos φ = 0` maps to +1.
pub fn quantize_bipolar(phases: &[f64]) -> ReflectionCoefficients {
    let signs: Vec<bool> = phases.iter().map(|p| p.cos() >= 0.0).collect();
    ReflectionCoefficients::from_signs(&signs)
}

/// `b_m = 1{cos(φ_m + ψ) ≥ 0}` for arbitrary phases.
pub fn threshold_mask(phases: &[f64], psi: f64) -> ReflectionCoefficients {
    let bits: Vec<bool> = phases.iter().map(|p| (p + psi).cos() >= 0.0).collect();
    ReflectionCoefficients::from_bits(&bits)
}

pub fn single_beam_mask(
    aperture: &Aperture,
    theta_i_deg: f64,
    theta_t_deg: f64,
    psi: f64,
) -> Result<ReflectionCoefficients> {
    check_psi(psi)?;
    let profile = ideal_phase_profile(aperture, theta_i_deg, theta_t_deg)?;
    Ok(threshold_mask(profile.phases(), psi))
}

/// Superposition `s_m = Σ_ℓ α_ℓ exp(j k (sin θ_{T,ℓ} + sin θ_I) x_m)`.
pub fn multibeam_profile(aperture: &Aperture, task: &SteeringTask) -> Vec<Complex64> {
    let k = aperture.wavenumber();
    let sin_i = sin_deg(task.incidence_deg);
    let ramps: Vec<(f64, Complex64)> = task
        .targets
        .iter()
        .map(|t| (sin_deg(t.theta_deg) + sin_i, t.weight))
        .collect();
    aperture
        .positions()
        .iter()
        .map(|&x| {
            ramps
                .iter()
                .map(|&(u, a)| a * Complex64::from_polar(1.0, k * x * u))
                .sum()
        })
        .collect()
}

/// `b_m = 1{Re(s_m e^{jψ}) ≥ 0}`.
pub fn multibeam_mask(profile: &[Complex64], psi: f64) -> Result<ReflectionCoefficients> {
    if profile.is_empty() {
        return Err(Error::invalid("superposition profile is empty"));
    }
    check_psi(psi)?;
    let rot = Complex64::from_polar(1.0, psi);
    let bits: Vec<bool> = profile.iter().map(|s| (s * rot).re >= 0.0).collect();
    Ok(ReflectionCoefficients::from_bits(&bits))
}

/// Bipolar counterpart of [`multibeam_mask`].
pub fn multibeam_bipolar(profile: &[Complex64], psi: f64) -> Result<ReflectionCoefficients> {
    let mask = multibeam_mask(profile, psi)?;
    Ok(ReflectionCoefficients::from_signs(&mask.bits().unwrap_or_default()))
}

/// Binary mask for a task at its own ψ.
pub fn synthesize_mask(aperture: &Aperture, task: &SteeringTask) -> Result<ReflectionCoefficients> {
    if task.is_plain_single() {
        single_beam_mask(aperture, task.incidence_deg, task.targets[0].theta_deg, task.psi)
    } else {
        multibeam_mask(&multibeam_profile(aperture, task), task.psi)
    }
}

/// Bipolar mask for a task at its own ψ.
pub fn synthesize_bipolar(aperture: &Aperture, task: &SteeringTask) -> Result<ReflectionCoefficients> {
    if task.is_plain_single() && task.psi == 0.0 {
        let p = ideal_phase_profile(aperture, task.incidence_deg, task.targets[0].theta_deg)?;
        Ok(quantize_bipolar(p.phases()))
    } else {
        multibeam_bipolar(&multibeam_profile(aperture, task), task.psi)
    }
}

/// ON fraction `η_M` of a binary mask.
pub fn thinning_ratio(mask: &ReflectionCoefficients) -> Result<f64> {
    Ok(on_count(mask)? as f64 / mask.len().max(1) as f64)
}

pub fn on_count(mask: &ReflectionCoefficients) -> Result<usize> {
    let bits = mask
        .bits()
        .ok_or_else(|| Error::invalid("thinning ratio is defined for binary masks only"))?;
    Ok(bits.iter().filter(|&&b| b).count())
}

/// Smallest per-target normalized gain of `coeffs`.
pub fn min_target_gain(
    aperture: &Aperture,
    coeffs: &ReflectionCoefficients,
    task: &SteeringTask,
) -> Result<f64> {
    task.targets
        .iter()
        .map(|t| normalized_gain(aperture, coeffs, t.theta_deg, task.incidence_deg))
        .try_fold(f64::INFINITY, |acc, g| Ok(acc.min(g?)))
}

/// Grid search over ψ ∈ {2πi/K} for the offset maximizing the weakest target.
///
/// Returns `(ψ*, score_dB)`; ties keep the smallest index.
pub fn select_psi(aperture: &Aperture, task: &SteeringTask, grid_size: usize) -> Result<(f64, f64)> {
    if grid_size == 0 {
        return Err(Error::invalid("psi grid size must be at least 1"));
    }
    let mut best: Option<(f64, f64)> = None;
    for i in 0..grid_size {
        let psi = TAU * i as f64 / grid_size as f64;
        let mask = synthesize_mask(aperture, &task.with_psi(psi)?)?;
        let score = min_target_gain(aperture, &mask, task)?;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((psi, score));
        }
    }
    let (psi, score) = best.expect("grid_size >= 1");
    Ok((psi, power_to_db(score)))
}

/// Ideal configurable-reflector baseline.
///
/// One target gives the phase-only weights `e^{jφ_m}`. Several targets use
/// the superposition `s_m` scaled to `Σ|w_m|² = M`, which splits the
/// aperture power evenly between equally weighted, well-separated beams.
pub fn ideal_continuous_weights(aperture: &Aperture, task: &SteeringTask) -> Result<ReflectionCoefficients> {
    if task.targets.len() == 1 {
        let p = ideal_phase_profile(aperture, task.incidence_deg, task.targets[0].theta_deg)?;
        return Ok(ReflectionCoefficients::from_phases(p.phases()));
    }
    let s = multibeam_profile(aperture, task);
    let energy: f64 = s.iter().map(|v| v.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::invalid("target superposition vanishes on the aperture"));
    }
    let scale = (aperture.element_count() as f64 / energy).sqrt();
    let w: Vec<Complex64> = s.iter().map(|v| v * scale).collect();
    ReflectionCoefficients::new(CoefficientKind::Normalized, w)
}
