use std::f64::consts::{PI, TAU};

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use dtc_core::calibration::nearest_branch;
use dtc_core::metrics::{average_fidelity, fit_cphase, fit_parametric, leakage_rates, u_cphase, u_para, Gate};
use dtc_core::optimize::pattern_search;
use dtc_core::pulses::{AcPulse, DcPulse, Pulse};

fn finite_difference(p: &dyn Pulse, t: f64) -> f64 {
    let h = 1e-6;
    (p.evaluate(t + h).0 - p.evaluate(t - h).0) / (2.0 * h)
}

prop_compose! {
    fn ac_pulse()(alpha in -0.3..0.3f64, beta in 0.05..1.0f64, duration in 4.0..40.0f64, carrier in 0.0..6.0f64) -> AcPulse {
        AcPulse::new(0.65 * PI, alpha * PI, beta, duration, carrier).unwrap()
    }
}

prop_compose! {
    fn dc_pulse()(peak in 0.3..1.0f64, duration in 4.0..40.0f64, rf in 0.05..0.5f64,
                  raw in prop::collection::vec(-1.0..1.0f64, 0..4), budget in 0.0..0.5f64) -> DcPulse {
        let total: f64 = raw.iter().map(|c| c.abs()).sum();
        let coeffs = if total > 0.0 { raw.iter().map(|c| c * budget / total).collect() } else { raw };
        DcPulse::new(0.65 * PI, peak * PI, duration, rf, coeffs).unwrap()
    }
}

prop_compose! {
    fn contraction()(entries in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16), scale in 0.0..1.0f64) -> Gate {
        let m = Gate::from_iterator(entries.into_iter().map(|(re, im)| C64::new(re, im)));
        let norm = m.norm();
        if norm == 0.0 { m } else { m * C64::new(scale / norm, 0.0) }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ac_pulse_returns_to_idle(p in ac_pulse()) {
        prop_assert!((p.evaluate(0.0).0 - p.theta0).abs() < 1e-14);
        prop_assert!((p.evaluate(p.duration).0 - p.theta0).abs() < 1e-12);
        let (lo, hi) = p.flux_range();
        for k in 0..=100 {
            let theta = p.evaluate(p.duration * k as f64 / 100.0).0;
            prop_assert!(theta >= lo - 1e-12 && theta <= hi + 1e-12);
        }
    }

    #[test]
    fn ac_derivative_matches_finite_difference(p in ac_pulse(), u in 0.01..0.99f64) {
        let t = u * p.duration;
        let analytic = p.evaluate(t).1;
        prop_assert!((analytic - finite_difference(&p, t)).abs() <= 1e-6 * analytic.abs().max(1.0));
    }

    #[test]
    fn ac_envelope_is_symmetric(p in ac_pulse(), u in 0.0..1.0f64) {
        let t = u * p.duration;
        prop_assert!((p.envelope(t).0 - p.envelope(p.duration - t).0).abs() < 1e-12);
    }

    #[test]
    fn dc_pulse_respects_overshoot_bound(p in dc_pulse()) {
        let eps = p.overshoot_bound();
        let (lo, hi) = (p.theta0.min(p.theta_peak) - eps, p.theta0.max(p.theta_peak) + eps);
        prop_assert_eq!(p.flux_range(), (lo, hi));
        for k in 0..=400 {
            let theta = p.evaluate(p.duration * k as f64 / 400.0).0;
            prop_assert!(theta >= lo - 1e-12 && theta <= hi + 1e-12, "theta {} outside [{}, {}]", theta, lo, hi);
        }
        prop_assert!((p.evaluate(0.0).0 - p.theta0).abs() < 1e-12);
        prop_assert!((p.evaluate(p.duration).0 - p.theta0).abs() < 1e-12);
    }

    #[test]
    fn dc_derivative_matches_finite_difference(p in dc_pulse(), u in 0.01..0.99f64) {
        let t = u * p.duration;
        prop_assume!(p.breakpoints().iter().all(|b| (b - t).abs() > 1e-4));
        let analytic = p.evaluate(t).1;
        prop_assert!((analytic - finite_difference(&p, t)).abs() <= 1e-6 * analytic.abs().max(1.0));
    }

    #[test]
    fn infidelity_bounds_leakage(u in contraction(), theta in 0.0..1.5f64, a in -PI..PI, b in -PI..PI, c in -PI..PI) {
        let ideal = u_para(theta, a, b, c);
        let leakage: f64 = leakage_rates(&u).iter().sum();
        prop_assert!(1.0 - average_fidelity(&u, &ideal) >= leakage / 20.0 - 1e-12);
        let f = average_fidelity(&u, &ideal);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
    }

    #[test]
    fn parametric_fit_round_trips(theta in 0.05..1.5f64, a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
        let fit = fit_parametric(&u_para(theta, a, b, c)).unwrap();
        prop_assert!((fit.theta - theta).abs() < 1e-10);
        prop_assert!((fit.ideal() - u_para(theta, a, b, c)).norm() < 1e-10);
    }

    #[test]
    fn cphase_fit_round_trips(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
        let u = u_cphase(a, b, c);
        let fit = fit_cphase(&u).unwrap();
        prop_assert!((fit.ideal() - u).norm() < 1e-10);
        prop_assert!((0.0..TAU).contains(&fit.phi_cphase));
        prop_assert!(leakage_rates(&u).iter().all(|l| l.abs() < 1e-14));
    }

    #[test]
    fn nearest_branch_is_equivalent_and_close(angle in -20.0..20.0f64, reference in -20.0..20.0f64) {
        let b = nearest_branch(angle, reference);
        let turns = (b - angle) / TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
        prop_assert!((b - reference).abs() <= PI + 1e-9);
    }

    #[test]
    fn pattern_search_stays_in_bounds(x0 in prop::collection::vec(-5.0..5.0f64, 2), cx in -3.0..3.0f64, cy in -3.0..3.0f64, budget in 0usize..60) {
        let bounds = [(-1.0, 1.0), (-0.5, 2.0)];
        let r = pattern_search(|x: &[f64]| Ok((x[0] - cx).powi(2) + (x[1] - cy).powi(2)), &x0, &[0.3, 0.3], &bounds, 1e-6, 0.0, budget).unwrap();
        prop_assert!(r.evaluations <= budget);
        for (v, (lo, hi)) in r.x.iter().zip(bounds) {
            prop_assert!(*v >= lo && *v <= hi);
        }
        if budget == 0 {
            let clamped: Vec<f64> = x0.iter().zip(bounds).map(|(v, (lo, hi))| v.clamp(lo, hi)).collect();
            prop_assert_eq!(r.x, clamped);
        }
    }
}

#[test]
fn unitary_has_no_leakage_and_unit_self_fidelity() {
    let u: Gate = Matrix4::identity() * C64::from_polar(1.0, 0.7);
    assert!((average_fidelity(&u, &u) - 1.0).abs() < 1e-14);
    assert!(leakage_rates(&u).iter().all(|l| l.abs() < 1e-14));
}
