//! Numerical certification of the binary-masking gain bounds.
//!
//! For phases `φ_m` the best ON/OFF mask attains
//! `S* = max_b |Σ b_m e^{-jφ_m}|` and normalized gain `γ* = (S*/M)²`.
//! Averaging `Σ max(cos(φ_m + φ), 0)` over the rotation `φ` gives `M/π`, so
//! `γ* ≥ 1/π²` for every geometry.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{normalized_gain, power_to_db, sin_deg, Aperture, ReflectionCoefficients};
use crate::synthesis::{
    ideal_continuous_weights, quantize_bipolar, select_psi, single_beam_mask, synthesize_bipolar,
    synthesize_mask, thinning_ratio, threshold_mask, SteeringTask, DEFAULT_PSI_GRID,
};

/// Largest `M` accepted by [`bruteforce_opt_mask`].
pub const BRUTEFORCE_MAX_M: usize = 20;

/// `1/π²`.
pub const GAIN_BOUND: f64 = 1.0 / (PI * PI);

/// Optimal mask with its field magnitude and normalized gain.
#[derive(Debug, Clone, PartialEq)]
pub struct OptMask {
    pub bits: Vec<bool>,
    pub s_star: f64,
    pub gamma_star: f64,
}

impl OptMask {
    fn new(bits: Vec<bool>, s_star: f64) -> Self {
        let m = bits.len() as f64;
        OptMask {
            bits,
            s_star,
            gamma_star: (s_star / m).powi(2),
        }
    }
}

fn phasors(phases: &[f64]) -> Vec<Complex64> {
    phases.iter().map(|&p| Complex64::from_polar(1.0, -p)).collect()
}

fn check_phases(phases: &[f64]) -> Result<()> {
    if phases.is_empty() {
        return Err(Error::invalid("phase list is empty"));
    }
    if let Some(p) = phases.iter().find(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("phase {p} is not finite")));
    }
    Ok(())
}

/// Exhaustive search over all `2^M` masks.
///
/// Among maximizers (within 1e-12) the lexicographically smallest mask,
/// reading `b_0` first with OFF < ON, is returned.
pub fn bruteforce_opt_mask(phases: &[f64]) -> Result<OptMask> {
    check_phases(phases)?;
    let m = phases.len();
    if m > BRUTEFORCE_MAX_M {
        return Err(Error::invalid(format!(
            "exhaustive search is limited to M <= {BRUTEFORCE_MAX_M} (got {m}); use breakpoint_opt_mask"
        )));
    }
    let z = phasors(phases);
    // Split into a leading half (most significant) and a trailing half.
    let h = m / 2;
    let half_sums = |part: &[Complex64]| -> Vec<Complex64> {
        let n = part.len();
        (0..1usize << n)
            .map(|code| {
                (0..n)
                    .filter(|&i| code >> (n - 1 - i) & 1 == 1)
                    .map(|i| part[i])
                    .sum()
            })
            .collect()
    };
    let head = half_sums(&z[..h]);
    let tail = half_sums(&z[h..]);
    let mut best = (-1.0, 0usize, 0usize);
    for (hi, a) in head.iter().enumerate() {
        for (lo, b) in tail.iter().enumerate() {
            let s = (a + b).norm();
            if s > best.0 + 1e-12 {
                best = (s, hi, lo);
            }
        }
    }
    let (_, hi, lo) = best;
    let t = m - h;
    let bits: Vec<bool> = (0..m)
        .map(|i| {
            if i < h {
                hi >> (h - 1 - i) & 1 == 1
            } else {
                lo >> (t - 1 - (i - h)) & 1 == 1
            }
        })
        .collect();
    let s = bits.iter().zip(&z).filter(|(b, _)| **b).map(|(_, v)| v).sum::<Complex64>().norm();
    Ok(OptMask::new(bits, s))
}

/// Best thresholded mask over all rotations `φ`, with element values
/// `1` (selected) or `off` (not selected).
///
/// Membership changes only at `π/2 - φ_m` and `3π/2 - φ_m`, so one mask per
/// arc between sorted breakpoints covers every rotation. The sum is updated
/// incrementally along the sweep.
fn rotation_optimum(phases: &[f64], off: f64) -> (Vec<bool>, f64) {
    let m = phases.len();
    let z = phasors(phases);
    let delta = 1.0 - off;
    // (angle, element, turns_on)
    let mut events: Vec<(f64, usize, bool)> = Vec::with_capacity(2 * m);
    for (i, &p) in phases.iter().enumerate() {
        events.push(((PI / 2.0 - p).rem_euclid(TAU), i, false));
        events.push(((1.5 * PI - p).rem_euclid(TAU), i, true));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    // Start inside the widest arc so the initial state is unambiguous.
    let n = events.len();
    let gap = |k: usize| (events[(k + 1) % n].0 - events[k].0).rem_euclid(TAU);
    let start = (0..n).max_by(|&a, &b| gap(a).total_cmp(&gap(b))).unwrap_or(0);
    let mid = events[start].0 + 0.5 * gap(start);
    let mut state: Vec<bool> = phases.iter().map(|&p| (p + mid).cos() >= 0.0).collect();
    let initial = state.clone();
    let value = |on: bool| if on { 1.0 } else { off };
    let mut sum: Complex64 = state.iter().zip(&z).map(|(&b, v)| v * value(b)).sum();
    let mut best = (sum.norm(), 0usize);
    for step in 1..=n {
        let (_, i, turns_on) = events[(start + step) % n];
        if state[i] != turns_on {
            state[i] = turns_on;
            sum += z[i] * if turns_on { delta } else { -delta };
        }
        let s = sum.norm();
        if s > best.0 {
            best = (s, step);
        }
    }

    // Replay the sweep up to the winning arc and recompute its sum exactly.
    let mut bits = initial;
    for step in 1..=best.1 {
        let (_, i, turns_on) = events[(start + step) % n];
        bits[i] = turns_on;
    }
    let s = bits.iter().zip(&z).map(|(&b, v)| v * value(b)).sum::<Complex64>().norm();
    (bits, s)
}

/// Exact ON/OFF optimum in `O(M log M)`.
pub fn breakpoint_opt_mask(phases: &[f64]) -> Result<OptMask> {
    check_phases(phases)?;
    let (bits, s) = rotation_optimum(phases, 0.0);
    Ok(OptMask::new(bits, s))
}

/// Exact ±1 optimum; `bits[m]` is true for `+1`.
pub fn breakpoint_opt_bipolar(phases: &[f64]) -> Result<OptMask> {
    check_phases(phases)?;
    let (bits, s) = rotation_optimum(phases, -1.0);
    Ok(OptMask::new(bits, s))
}

/// Rotation average `(1/2π)∫ (1/M) Σ max(cos(φ_m + φ), 0) dφ` by the
/// periodic trapezoidal rule. Equals `1/π` for any phases.
pub fn rotation_average(phases: &[f64], samples: usize) -> Result<f64> {
    check_phases(phases)?;
    if samples == 0 {
        return Err(Error::invalid("need at least one rotation sample"));
    }
    Ok(rotation_average_serial(phases, samples))
}

/// Trial inputs drawn by [`verify_gain_bound`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDraw {
    pub theta_i_deg: f64,
    pub theta_t_deg: f64,
    pub spacing_over_lambda: f64,
    pub element_count: usize,
}

/// Deterministic draw for trial `index`; independent of execution order.
pub fn draw_trial(seed: u64, index: u64, m_min: usize, m_max: usize) -> TrialDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    TrialDraw {
        theta_i_deg: rng.gen_range(-90.0..=90.0),
        theta_t_deg: rng.gen_range(-90.0..=90.0),
        spacing_over_lambda: rng.gen_range(0.25..=1.0),
        element_count: rng.gen_range(m_min..=m_max),
    }
}

impl TrialDraw {
    /// `φ_m = k x_m (sin θ_T + sin θ_I)` with `λ = 1`.
    pub fn phases(&self) -> Vec<f64> {
        let m = self.element_count;
        let k_d = TAU * self.spacing_over_lambda;
        let u = sin_deg(self.theta_t_deg) + sin_deg(self.theta_i_deg);
        (0..m)
            .map(|i| k_d * ((m as f64 - 1.0) / 2.0 - i as f64) * u)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub trials: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub seed: u64,
    pub min_gamma_star: f64,
    pub bound: f64,
    pub violations: usize,
    /// Largest deviation of the squared rotation average from `1/π²`.
    pub rotation_mean_max_dev: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_trial: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_draw: Option<TrialDraw>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_phases: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_bits: Option<Vec<u8>>,
}

/// Rotation samples used for the averaging check in each trial.
const ROTATION_SAMPLES: usize = 4096;

/// Certifies `γ* ≥ 1/π²` on random geometries.
pub fn verify_gain_bound(trials: usize, m_min: usize, m_max: usize, seed: u64) -> Result<BoundReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if m_min == 0 || m_min > m_max {
        return Err(Error::invalid(format!(
            "element range must satisfy 1 <= m_min <= m_max, got [{m_min}, {m_max}]"
        )));
    }
    let results: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let phases = draw_trial(seed, t as u64, m_min, m_max).phases();
            let opt = breakpoint_opt_mask(&phases)?;
            let avg = rotation_average_serial(&phases, ROTATION_SAMPLES);
            Ok((opt.gamma_star, (avg * avg - GAIN_BOUND).abs()))
        })
        .collect::<Result<_>>()?;
    let violations = results.iter().filter(|r| r.0 < GAIN_BOUND - 1e-12).count();
    let (witness, &(min_gamma, _)) = results
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("trials >= 1");
    let dev = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let draw = draw_trial(seed, witness as u64, m_min, m_max);
    let phases = draw.phases();
    let bits = breakpoint_opt_mask(&phases)?.bits.iter().map(|&b| b as u8).collect();
    Ok(BoundReport {
        trials,
        m_min,
        m_max,
        seed,
        min_gamma_star: min_gamma,
        bound: GAIN_BOUND,
        violations,
        rotation_mean_max_dev: dev,
        witness_trial: Some(witness),
        witness_draw: Some(draw),
        witness_phases: Some(phases),
        witness_bits: Some(bits),
    })
}

fn rotation_average_serial(phases: &[f64], samples: usize) -> f64 {
    let m = phases.len() as f64;
    let total: f64 = (0..samples)
        .map(|i| {
            let phi = TAU * i as f64 / samples as f64;
            phases.iter().map(|&p| (p + phi).cos().max(0.0)).sum::<f64>()
        })
        .sum();
    total / (samples as f64 * m)
}

/// `η_M` of the ψ = 0 single-beam mask for each `M`.
pub fn thinning_convergence(
    theta_i_deg: f64,
    theta_t_deg: f64,
    spacing: f64,
    wavelength: f64,
    m_values: &[usize],
) -> Result<Vec<(usize, f64)>> {
    m_values
        .par_iter()
        .map(|&m| {
            let ap = Aperture::new(m, spacing, wavelength)?;
            let mask = single_beam_mask(&ap, theta_i_deg, theta_t_deg, 0.0)?;
            Ok((m, thinning_ratio(&mask)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    AllOn,
    OnOffPsi0,
    OnOffBestPsi,
    Bipolar,
    Ideal,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::AllOn,
        Scheme::OnOffPsi0,
        Scheme::OnOffBestPsi,
        Scheme::Bipolar,
        Scheme::Ideal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::AllOn => "all_on",
            Scheme::OnOffPsi0 => "on_off_psi0",
            Scheme::OnOffBestPsi => "on_off_best_psi",
            Scheme::Bipolar => "bipolar",
            Scheme::Ideal => "ideal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossRow {
    pub scheme: Scheme,
    pub target_deg: f64,
    pub gain_db: f64,
    /// Ideal gain minus this scheme's gain.
    pub loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub element_count: usize,
    pub incidence_deg: f64,
    pub best_psi: f64,
    pub rows: Vec<LossRow>,
}

impl LossReport {
    pub fn row(&self, scheme: Scheme, target_deg: f64) -> Option<&LossRow> {
        self.rows
            .iter()
            .find(|r| r.scheme == scheme && r.target_deg == target_deg)
    }
}

/// Target gains and losses against the ideal baseline for every scheme.
pub fn loss_report(aperture: &Aperture, task: &SteeringTask) -> Result<LossReport> {
    let (best_psi, _) = select_psi(aperture, task, DEFAULT_PSI_GRID)?;
    let ideal = ideal_continuous_weights(aperture, task)?;
    let coeffs = |s: Scheme| -> Result<ReflectionCoefficients> {
        match s {
            Scheme::AllOn => Ok(ReflectionCoefficients::all_on(aperture.element_count())),
            Scheme::OnOffPsi0 => synthesize_mask(aperture, &task.with_psi(0.0)?),
            Scheme::OnOffBestPsi => synthesize_mask(aperture, &task.with_psi(best_psi)?),
            Scheme::Bipolar => synthesize_bipolar(aperture, &task.with_psi(0.0)?),
            Scheme::Ideal => Ok(ideal.clone()),
        }
    };
    let mut rows = Vec::new();
    for t in task.targets() {
        let ideal_db = power_to_db(normalized_gain(aperture, &ideal, t.theta_deg, task.incidence_deg())?);
        for s in Scheme::ALL {
            let g = power_to_db(normalized_gain(aperture, &coeffs(s)?, t.theta_deg, task.incidence_deg())?);
            rows.push(LossRow {
                scheme: s,
                target_deg: t.theta_deg,
                gain_db: g,
                loss_db: ideal_db - g,
            });
        }
    }
    Ok(LossReport {
        element_count: aperture.element_count(),
        incidence_deg: task.incidence_deg(),
        best_psi,
        rows,
    })
}

/// Mainlobe gain of each scheme at one value of `u = sin θ_T + sin θ_I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizationPoint {
    pub u: f64,
    pub ideal_db: f64,
    pub onoff_opt_db: f64,
    pub bipolar_opt_db: f64,
    pub onoff_psi0_db: f64,
    pub bipolar_psi0_db: f64,
}

/// Gain of ideal, ON/OFF and ±1 steering against `u`.
///
/// `*_opt` columns use the exact best rotation, `*_psi0` the fixed ψ = 0 rule.
pub fn quantization_sweep(aperture: &Aperture, u_values: &[f64]) -> Result<Vec<QuantizationPoint>> {
    let m = aperture.element_count() as f64;
    let k = aperture.wavenumber();
    u_values
        .par_iter()
        .map(|&u| {
            if !u.is_finite() {
                return Err(Error::invalid(format!("u = {u} is not finite")));
            }
            let phases: Vec<f64> = aperture.positions().iter().map(|&x| k * x * u).collect();
            let gain_of = |c: &ReflectionCoefficients| {
                let p = aperture.response_at(c.values(), u);
                power_to_db(p.norm_sqr() / (m * m))
            };
            let ideal = ReflectionCoefficients::from_phases(&phases);
            Ok(QuantizationPoint {
                u,
                ideal_db: gain_of(&ideal),
                onoff_opt_db: power_to_db(breakpoint_opt_mask(&phases)?.gamma_star),
                bipolar_opt_db: power_to_db(breakpoint_opt_bipolar(&phases)?.gamma_star),
                onoff_psi0_db: gain_of(&threshold_mask(&phases, 0.0)),
                bipolar_psi0_db: gain_of(&quantize_bipolar(&phases)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::Target;

    #[test]
    fn oracle_small_examples() {
        let a = bruteforce_opt_mask(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(a.bits, vec![true; 3]);
        assert!((a.gamma_star - 1.0).abs() < 1e-12);

        let b = bruteforce_opt_mask(&[0.0, TAU / 3.0, 2.0 * TAU / 3.0]).unwrap();
        assert!((b.s_star - 1.0).abs() < 1e-12);
        assert!((b.gamma_star - 1.0 / 9.0).abs() < 1e-12);
        // Single elements and adjacent pairs tie at |S| = 1.
        assert_eq!(b.bits, vec![false, false, true]);

        let c = bruteforce_opt_mask(&[0.0, PI]).unwrap();
        assert!((c.gamma_star - 0.25).abs() < 1e-12);
        assert_eq!(c.bits.iter().filter(|&&x| x).count(), 1);
    }

    #[test]
    fn oracle_rejects_large_m() {
        let err = bruteforce_opt_mask(&[0.0; 21]).unwrap_err().to_string();
        assert!(err.contains("breakpoint_opt_mask"));
        assert!(bruteforce_opt_mask(&[]).is_err());
    }

    #[test]
    fn breakpoint_small_examples() {
        let a = breakpoint_opt_mask(&[0.3; 5]).unwrap();
        assert_eq!(a.bits, vec![true; 5]);
        assert!((a.gamma_star - 1.0).abs() < 1e-12);
        let b = breakpoint_opt_mask(&[0.0, TAU / 3.0, 2.0 * TAU / 3.0]).unwrap();
        assert!((b.s_star - 1.0).abs() < 1e-12);
        let c = breakpoint_opt_mask(&[1.0]).unwrap();
        assert_eq!(c.bits, vec![true]);
    }

    #[test]
    fn bipolar_optimum_two_opposed() {
        let r = breakpoint_opt_bipolar(&[0.0, PI]).unwrap();
        assert_ne!(r.bits[0], r.bits[1]);
        assert!((r.gamma_star - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_random_instance_respects_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phases: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..TAU)).collect();
        let r = breakpoint_opt_mask(&phases).unwrap();
        assert!(r.gamma_star >= GAIN_BOUND);
    }

    #[test]
    fn rotation_average_is_one_over_pi() {
        let phases = [0.1, 1.7, 4.0, 5.5];
        let avg = rotation_average(&phases, 100_000).unwrap();
        assert!((avg - 1.0 / PI).abs() < 1e-6, "{avg}");
    }

    #[test]
    fn draws_are_order_independent() {
        let a = draw_trial(7, 3, 8, 14);
        let _ = draw_trial(7, 2, 8, 14);
        assert_eq!(a, draw_trial(7, 3, 8, 14));
        assert_ne!(a, draw_trial(7, 4, 8, 14));
        assert!((8..=14).contains(&a.element_count));
    }

    #[test]
    fn bound_report_small_run() {
        let r = verify_gain_bound(50, 8, 14, 1).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.min_gamma_star >= GAIN_BOUND);
        assert!(r.rotation_mean_max_dev < 1e-6);
        assert_eq!(r, verify_gain_bound(50, 8, 14, 1).unwrap());
        assert!(verify_gain_bound(0, 8, 14, 1).is_err());
        assert!(verify_gain_bound(5, 9, 8, 1).is_err());
    }

    #[test]
    fn specular_thinning_is_full() {
        let r = thinning_convergence(30.0, -30.0, 2.5e-3, 5e-3, &[1, 7, 64]).unwrap();
        assert!(r.iter().all(|&(_, eta)| eta == 1.0));
    }

    #[test]
    fn thinning_near_half_by_seventy() {
        let r = thinning_convergence(60.0, -30.0, 2.5e-3, 5e-3, &[70, 10_000]).unwrap();
        assert!((r[0].1 - 0.5).abs() <= 0.05, "{r:?}");
        assert!((r[1].1 - 0.5).abs() <= 0.01, "{r:?}");
    }

    #[test]
    fn loss_report_specular_and_single_element() {
        let ap = Aperture::new(35, 2.5e-3, 5e-3).unwrap();
        let task = SteeringTask::single(30.0, -30.0).unwrap();
        let r = loss_report(&ap, &task).unwrap();
        assert!(r.rows.iter().all(|row| row.loss_db.abs() < 1e-9), "{r:?}");

        let one = Aperture::new(1, 2.5e-3, 5e-3).unwrap();
        let task = SteeringTask::single(45.0, -10.0).unwrap();
        let r = loss_report(&one, &task).unwrap();
        assert!(r.rows.iter().all(|row| row.loss_db.abs() < 1e-9), "{r:?}");
    }

    #[test]
    fn loss_report_design_point() {
        let ap = Aperture::new(35, 2.5e-3, 5e-3).unwrap();
        let task = SteeringTask::new(45.0, vec![Target::unit(-10.0)], 0.0).unwrap();
        let r = loss_report(&ap, &task).unwrap();
        let bip = r.row(Scheme::Bipolar, -10.0).unwrap();
        assert!((bip.loss_db - 3.92).abs() < 0.1, "{bip:?}");
        let best = r.row(Scheme::OnOffBestPsi, -10.0).unwrap();
        let psi0 = r.row(Scheme::OnOffPsi0, -10.0).unwrap();
        assert!(best.loss_db <= psi0.loss_db + 1e-12);
    }

    #[test]
    fn quantization_sweep_at_zero_and_worst_case() {
        let ap = Aperture::new(64, 0.5, 1.0).unwrap();
        let u: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.01).collect();
        let pts = quantization_sweep(&ap, &u).unwrap();
        let zero = pts.iter().find(|p| p.u == 0.0).unwrap();
        assert!(zero.onoff_opt_db.abs() < 1e-9 && zero.bipolar_opt_db.abs() < 1e-9);
        let worst_onoff = pts.iter().map(|p| p.ideal_db - p.onoff_opt_db).fold(0.0, f64::max);
        let worst_bip = pts.iter().map(|p| p.ideal_db - p.bipolar_opt_db).fold(0.0, f64::max);
        assert!((worst_onoff - 9.94).abs() <= 0.3, "{worst_onoff}");
        assert!((worst_bip - 3.94).abs() <= 0.3, "{worst_bip}");
    }
}
