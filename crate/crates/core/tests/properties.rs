//! Property tests for the model, synthesis, diffraction, bounds and
//! measurement invariants.

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use reflector_core::bounds::{
    breakpoint_opt_bipolar, breakpoint_opt_mask, bruteforce_opt_mask, rotation_average, thinning_convergence, GAIN_BOUND,
};
use reflector_core::diffraction::{order_direction, period_for_target, visible_orders};
use reflector_core::measure::{background_subtract, normalize_pattern, MeasurementScan};
use reflector_core::model::{
    array_factor, normalized_gain, pattern_sweep, uniform_closed_form, AngleGrid, Aperture, CoefficientKind,
    ReflectionCoefficients, GAIN_FLOOR_DB,
};
use reflector_core::synthesis::{
    ideal_phase_profile, quantize_bipolar, select_psi, single_beam_mask, synthesize_mask, SteeringTask,
};
use reflector_core::Complex64;

fn angle() -> impl Strategy<Value = f64> {
    -90.0..=90.0f64
}

fn bits(m: usize) -> impl Strategy<Value = Vec<bool>> {
    prop::collection::vec(any::<bool>(), m)
}

/// Independent reference: direct phasor sum with positions built from scratch.
fn reference_sum(c: &[Complex64], d: f64, lambda: f64, tt: f64, ti: f64) -> Complex64 {
    let m = c.len();
    let u = tt.to_radians().sin() + ti.to_radians().sin();
    (0..m)
        .map(|i| {
            let x = ((m as f64 - 1.0) / 2.0 - i as f64) * d;
            c[i] * Complex64::from_polar(1.0, -TAU / lambda * x * u)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn array_factor_matches_reference(b in (1usize..60).prop_flat_map(bits), tt in angle(), ti in angle()) {
        let ap = Aperture::new(b.len(), 2.5e-3, 5e-3).unwrap();
        let c = ReflectionCoefficients::from_bits(&b);
        let p = array_factor(&ap, &c, tt, ti).unwrap();
        let r = reference_sum(c.values(), 2.5e-3, 5e-3, tt, ti);
        prop_assert!((p - r).norm() <= 1e-9 * b.len() as f64);
    }

    #[test]
    fn reciprocity(b in (1usize..60).prop_flat_map(bits), tt in angle(), ti in angle()) {
        let ap = Aperture::new(b.len(), 2.5e-3, 5e-3).unwrap();
        let c = ReflectionCoefficients::from_bits(&b);
        prop_assert_eq!(array_factor(&ap, &c, tt, ti).unwrap(), array_factor(&ap, &c, ti, tt).unwrap());
    }

    #[test]
    fn conjugation_symmetry(w in prop::collection::vec(any::<bool>(), 1..60), tt in angle(), ti in angle()) {
        let ap = Aperture::new(w.len(), 2.5e-3, 5e-3).unwrap();
        let c = ReflectionCoefficients::from_signs(&w);
        let p = array_factor(&ap, &c, tt, ti).unwrap();
        let q = array_factor(&ap, &c, -tt, -ti).unwrap();
        prop_assert!((p.conj() - q).norm() <= 1e-12 * w.len() as f64);
    }

    #[test]
    fn passivity(
        vals in prop::collection::vec((0.0..=1.0f64, 0.0..TAU), 1..60),
        tt in angle(),
        ti in angle(),
    ) {
        let v: Vec<Complex64> = vals.iter().map(|&(r, a)| Complex64::from_polar(r, a)).collect();
        let ap = Aperture::new(v.len(), 2.5e-3, 5e-3).unwrap();
        let c = ReflectionCoefficients::new(CoefficientKind::Complex, v).unwrap();
        prop_assert!(normalized_gain(&ap, &c, tt, ti).unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn specular_identity(m in 1usize..200, ti in angle()) {
        let ap = Aperture::new(m, 2.5e-3, 5e-3).unwrap();
        let g = normalized_gain(&ap, &ReflectionCoefficients::all_on(m), -ti, ti).unwrap();
        prop_assert_eq!(g, 1.0);
    }

    #[test]
    fn bipolar_binary_consistency(m in 1usize..80, ti in angle(), tt in angle()) {
        let ap = Aperture::new(m, 2.5e-3, 5e-3).unwrap();
        let b = single_beam_mask(&ap, ti, tt, 0.0).unwrap();
        let w = quantize_bipolar(ideal_phase_profile(&ap, ti, tt).unwrap().phases());
        for (bv, wv) in b.values().iter().zip(w.values()) {
            prop_assert_eq!(*bv, (*wv + 1.0) / 2.0);
        }
    }

    #[test]
    fn adding_aligned_element_raises_projection(
        phases in prop::collection::vec(0.0..TAU, 2..40),
        psi in 0.0..TAU,
    ) {
        let rot = Complex64::from_polar(1.0, psi);
        let z: Vec<Complex64> = phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        let on: Vec<bool> = phases.iter().map(|&p| (p + psi).cos() >= 0.0).collect();
        let mut sum = Complex64::new(0.0, 0.0);
        for (zm, &b) in z.iter().zip(&on) {
            if b {
                let next = sum + zm;
                prop_assert!((next * rot).re >= (sum * rot).re - 1e-12);
                sum = next;
            }
        }
    }

    #[test]
    fn period_round_trip(ti in -80.0..80.0f64, tt in -85.0..85.0f64, n in 1i32..4) {
        let u = tt.to_radians().sin() + ti.to_radians().sin();
        prop_assume!(u.abs() > 1e-3);
        let order = if u > 0.0 { n } else { -n };
        let d = period_for_target(ti, tt, 5e-3, order).unwrap();
        let back = order_direction(d, 5e-3, ti, order).unwrap().unwrap();
        prop_assert!((back - tt).abs() <= 1e-9, "{} vs {}", back, tt);
    }

    #[test]
    fn zeroth_order_is_specular(delta in 1e-4..1.0f64, ti in angle()) {
        prop_assert_eq!(order_direction(delta, 5e-3, ti, 0).unwrap(), Some(-ti));
    }

    #[test]
    fn visibility_is_complete(delta in 1e-3..0.1f64, ti in angle()) {
        let s = visible_orders(delta, 5e-3, ti).unwrap();
        for n in s.n_min..=s.n_max {
            prop_assert!(order_direction(delta, 5e-3, ti, n).unwrap().is_some());
        }
        prop_assert!(order_direction(delta, 5e-3, ti, s.n_min - 1).unwrap().is_none());
        prop_assert!(order_direction(delta, 5e-3, ti, s.n_max + 1).unwrap().is_none());
    }

    #[test]
    fn bound_holds_for_any_phases(phases in prop::collection::vec(-10.0..10.0f64, 1..120)) {
        let a = breakpoint_opt_mask(&phases).unwrap();
        prop_assert!(a.gamma_star >= GAIN_BOUND - 1e-12);
        let b = breakpoint_opt_bipolar(&phases).unwrap();
        prop_assert!(b.gamma_star >= a.gamma_star - 1e-12);
    }

    #[test]
    fn optimum_is_monotone(phases in prop::collection::vec(0.0..TAU, 1..60), extra in 0.0..TAU) {
        let a = breakpoint_opt_mask(&phases).unwrap();
        let mut longer = phases.clone();
        longer.push(extra);
        let b = breakpoint_opt_mask(&longer).unwrap();
        prop_assert!(b.s_star >= a.s_star - 1e-9);
    }

    #[test]
    fn thinning_ratio_is_a_fraction(ti in angle(), tt in angle(), m in 1usize..300) {
        let r = thinning_convergence(ti, tt, 2.5e-3, 5e-3, &[m]).unwrap();
        let eta = r[0].1;
        prop_assert!((0.0..=1.0).contains(&eta));
        let count = eta * m as f64;
        prop_assert!((count - count.round()).abs() < 1e-9);
    }

    #[test]
    fn subtraction_is_nonnegative(
        rows in prop::collection::vec((-80.0..0.0f64, -80.0..0.0f64), 2..40),
    ) {
        let meas: Vec<(f64, f64)> = rows.iter().enumerate().map(|(i, r)| (i as f64 * 5.0, r.0)).collect();
        let mount: Vec<(f64, f64)> = rows.iter().enumerate().map(|(i, r)| (i as f64 * 5.0, r.1)).collect();
        let lin = background_subtract(
            &MeasurementScan::new(meas, "m").unwrap(),
            &MeasurementScan::new(mount, "b").unwrap(),
        ).unwrap();
        prop_assert!(lin.iter().all(|s| s.1 >= 0.0));
        if let Ok(n) = normalize_pattern(&lin) {
            prop_assert!(n.gain_db.iter().all(|&g| (GAIN_FLOOR_DB..=0.0).contains(&g)));
            prop_assert!(n.gain_db.contains(&0.0));
            for (g, s) in n.gain_db.iter().zip(&lin) {
                if s.1 == 0.0 {
                    prop_assert_eq!(*g, GAIN_FLOOR_DB);
                }
            }
        }
    }

    #[test]
    fn normalization_is_idempotent(vals in prop::collection::vec(0.0..10.0f64, 1..40)) {
        let lin: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect();
        prop_assume!(vals.iter().any(|&v| v > 0.0));
        let once = normalize_pattern(&lin).unwrap();
        let again: Vec<(f64, f64)> = once
            .theta_deg
            .iter()
            .zip(&once.gain_db)
            .map(|(&t, &g)| (t, if g <= GAIN_FLOOR_DB { 0.0 } else { 10f64.powf(g / 10.0) }))
            .collect();
        let twice = normalize_pattern(&again).unwrap();
        for (a, b) in once.gain_db.iter().zip(&twice.gain_db) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn normalization_is_scale_invariant(
        rows in prop::collection::vec((-70.0..-10.0f64, -90.0..-60.0f64), 2..40),
        offset in -30.0..30.0f64,
    ) {
        let scan = |sel: fn(&(f64, f64)) -> f64, off: f64| {
            MeasurementScan::new(
                rows.iter().enumerate().map(|(i, r)| (i as f64 * 5.0, sel(r) + off)).collect(),
                "s",
            ).unwrap()
        };
        let base = normalize_pattern(&background_subtract(&scan(|r| r.0, 0.0), &scan(|r| r.1, 0.0)).unwrap());
        let shifted = normalize_pattern(&background_subtract(&scan(|r| r.0, offset), &scan(|r| r.1, offset)).unwrap());
        if let (Ok(a), Ok(b)) = (base, shifted) {
            for (x, y) in a.gain_db.iter().zip(&b.gain_db) {
                prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_matches_sum(m in 1usize..200, d in 0.5e-3..20e-3f64, tt in angle(), ti in angle()) {
        let ap = Aperture::new(m, d, 5e-3).unwrap();
        let p = array_factor(&ap, &ReflectionCoefficients::all_on(m), tt, ti).unwrap();
        let c = uniform_closed_form(m, d, 5e-3, tt, ti).unwrap();
        prop_assert!((p - c).norm() <= 1e-9 * m as f64, "{} vs {}", p, c);
    }

    #[test]
    fn oracle_equivalence(phases in prop::collection::vec(0.0..TAU, 1..=14)) {
        let fast = breakpoint_opt_mask(&phases).unwrap();
        let slow = bruteforce_opt_mask(&phases).unwrap();
        prop_assert!((fast.s_star - slow.s_star).abs() <= 1e-9, "{} vs {}", fast.s_star, slow.s_star);
        prop_assert!(slow.gamma_star >= GAIN_BOUND - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn bipolar_gains_six_db_over_on_off(ti in -80.0..80.0f64, tt in -80.0..80.0f64) {
        let u = tt.to_radians().sin() + ti.to_radians().sin();
        // Per-element phase step at d0/λ = 0.5, wrapped; near 0 the mask is almost all-ON.
        let step = (PI * u + PI).rem_euclid(TAU) - PI;
        prop_assume!(step.abs() >= 0.1 * PI);
        let ap = Aperture::new(200, 2.5e-3, 5e-3).unwrap();
        let onoff = single_beam_mask(&ap, ti, tt, 0.0).unwrap();
        let bip = quantize_bipolar(ideal_phase_profile(&ap, ti, tt).unwrap().phases());
        let g1 = normalized_gain(&ap, &onoff, tt, ti).unwrap();
        let g2 = normalized_gain(&ap, &bip, tt, ti).unwrap();
        let gap = 10.0 * (g2 / g1).log10();
        prop_assert!((gap - 6.0).abs() <= 0.6, "({}, {}): {} dB", ti, tt, gap);
    }

    #[test]
    fn best_psi_meets_bound(ti in angle(), tt in angle(), m in 8usize..=64) {
        let ap = Aperture::new(m, 2.5e-3, 5e-3).unwrap();
        let task = SteeringTask::single(ti, tt).unwrap();
        let (_, db) = select_psi(&ap, &task, 64).unwrap();
        prop_assert!(10f64.powf(db / 10.0) >= GAIN_BOUND, "{} dB", db);
    }
}

#[test]
fn rotation_average_identity() {
    let phases: Vec<f64> = (0..37).map(|i| (i as f64 * 1.618).rem_euclid(TAU)).collect();
    let avg = rotation_average(&phases, 100_000).unwrap();
    assert!((avg - 1.0 / PI).abs() < 1e-6, "{avg}");
}

#[test]
fn aligned_phases_give_full_gain() {
    let r = breakpoint_opt_mask(&[2.0; 9]).unwrap();
    assert_eq!(r.bits, vec![true; 9]);
    assert!((r.gamma_star - 1.0).abs() < 1e-12);
}

#[test]
fn psi_does_not_move_the_beam() {
    let ap = Aperture::new(35, 2.5e-3, 5e-3).unwrap();
    let grid = AngleGrid::range(-90.0, 90.0, 1.0).unwrap();
    let peak_near = |psi: f64| {
        let task = SteeringTask::single(45.0, -10.0).unwrap().with_psi(psi).unwrap();
        let p = pattern_sweep(&ap, &synthesize_mask(&ap, &task).unwrap(), 45.0, &grid).unwrap();
        let (lo, hi) = p.lobe_window(-10.0);
        let i = p.nearest_index(-10.0);
        let mut best = i;
        for (j, &t) in p.theta_grid().iter().enumerate() {
            if t >= lo && t <= hi && p.normalized_gain()[j] > p.normalized_gain()[best] {
                best = j;
            }
        }
        p.theta_grid()[best]
    };
    let base = peak_near(0.0);
    for k in 1..8 {
        let moved = peak_near(TAU * k as f64 / 8.0);
        assert!((moved - base).abs() <= 1.0 + 1e-9, "psi {k}/8: {moved} vs {base}");
    }
}

#[test]
fn uniform_pattern_peaks_at_visible_orders() {
    let grid = AngleGrid::range(-90.0, 90.0, 0.1).unwrap();
    for (delta, ti) in [(9.37e-3, 45.0), (13.66e-3, 30.0), (13.66e-3, 60.0)] {
        let ap = Aperture::new(35, delta, 5e-3).unwrap();
        let p = pattern_sweep(&ap, &ReflectionCoefficients::all_on(35), ti, &grid).unwrap();
        let g = p.normalized_gain();
        let is_peak = |i: usize| (i == 0 || g[i] >= g[i - 1]) && (i + 1 == g.len() || g[i] >= g[i + 1]);
        for (n, theta) in visible_orders(delta, 5e-3, ti).unwrap().directions {
            let i = p.nearest_index(theta);
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(g.len() - 1);
            assert!((lo..=hi).any(is_peak), "order {n} at {theta} for delta {delta}");
        }
    }
}
