//! Independent reference computations checked against the library. Each
//! function panics on a mismatch.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use dtc_core::dynamics::{propagate, BasisSpec, DressedModel, PropagationOptions};
use dtc_core::metrics::{average_fidelity, fit_cphase, fit_parametric, leakage_rates, u_cphase, u_para, Gate};
use dtc_core::pulses::{AcPulse, ConstantPulse, DcPulse, Pulse};
use dtc_core::{DeviceParams, HamiltonianModel};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Charge-basis Hamiltonian evaluated element by element from the charge
/// tuples, with the loop junction written as cos(φ₄ − φ₃ − Θ).
fn dense_reference(params: &DeviceParams, theta: f64, theta_dot: f64) -> DMatrix<C64> {
    let derived = params.derive().unwrap();
    let n = params.charge_cutoff as i64;
    let d = (2 * n + 1) as usize;
    let dim = d.pow(4);
    // first mode is the most significant digit
    let charges = |idx: usize| -> [i64; 4] {
        let mut q = [0i64; 4];
        let mut r = idx;
        for k in (0..4).rev() {
            q[k] = (r % d) as i64 - n;
            r /= d;
        }
        q
    };
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for a in 0..dim {
        let qa = charges(a);
        for b in 0..dim {
            let qb = charges(b);
            let diff: Vec<i64> = (0..4).map(|k| qa[k] - qb[k]).collect();
            let changed: Vec<usize> = (0..4).filter(|&k| diff[k] != 0).collect();
            let mut value = C64::new(0.0, 0.0);
            if changed.is_empty() {
                let mut e = 0.0;
                for i in 0..4 {
                    for j in 0..4 {
                        e += 4.0 * derived.w[(i, j)] * (qa[i] * qa[j]) as f64;
                    }
                    e += theta_dot / derived.omega_c34 * (derived.w[(3, i)] - derived.w[(2, i)]) * qa[i] as f64;
                }
                value = c(e);
            } else if changed.len() == 1 && diff[changed[0]].abs() == 1 {
                value = c(-0.5 * derived.omega_j[changed[0]]);
            } else if changed == [2, 3] && diff[3] == -diff[2] && diff[3].abs() == 1 {
                // ⟨a| e^{i(φ₄−φ₃)} |b⟩ is nonzero when n₄ drops and n₃ rises
                let sign = if diff[3] == -1 { -1.0 } else { 1.0 };
                value = -0.5 * derived.omega_j[4] * C64::from_polar(1.0, sign * theta);
            }
            h[(a, b)] = value;
        }
    }
    h
}

pub fn sparse_hamiltonian_matches_dense_reference_at_cutoff_3() {
    let params = DeviceParams::paper_defaults().with_cutoff(3);
    let model = HamiltonianModel::full(&params).unwrap();
    for (theta, theta_dot) in [(0.6525 * PI, 0.0), (0.81 * PI, 0.37), (0.2, -1.3)] {
        let sparse = model.assemble(theta, theta_dot).to_dense();
        let dense = dense_reference(&params, theta, theta_dot);
        let diff = (&sparse - &dense).map(|z| z.norm()).max();
        assert!(diff < 1e-10, "theta {theta}: max deviation {diff:e}");
    }
}

/// exp(−iHt) through the eigendecomposition of a Hermitian matrix.
fn expm_hermitian(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| C64::from_polar(1.0, -e * t)));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

pub fn constant_hamiltonian_propagation_matches_matrix_exponential_at_cutoff_2() {
    let params = DeviceParams::paper_defaults().with_cutoff(2);
    let model = HamiltonianModel::full(&params).unwrap();
    let theta0 = 0.6525;
    let dressed = DressedModel::build(&model, theta0, &BasisSpec::idle_only(30)).unwrap();
    let pulse = ConstantPulse {
        theta0: theta0 * PI,
        theta: 0.75 * PI,
        duration: 2.0,
    };
    let h = dressed.hamiltonian(pulse.theta, 0.0);
    let u = expm_hermitian(&h, pulse.duration);
    let initial: Vec<DVector<C64>> = (0..4)
        .map(|i| dressed.computational_state(i))
        .chain(std::iter::once({
            let mut v = DVector::from_fn(dressed.dim(), |k, _| C64::new((k as f64).sin(), (0.3 * k as f64).cos()));
            v /= c(v.norm());
            v
        }))
        .collect();
    let result = propagate(&dressed, &pulse, &initial, &PropagationOptions::acceptance()).unwrap();
    for (psi0, psi) in initial.iter().zip(&result.finals) {
        let expected = &u * psi0;
        let err = (psi - expected).norm();
        assert!(err < 1e-8, "state deviation {err:e}");
    }
}

pub fn dressed_hamiltonian_is_projection_of_full_one() {
    let params = DeviceParams::paper_defaults().with_cutoff(2);
    let model = HamiltonianModel::full(&params).unwrap();
    let spec = BasisSpec::idle_only(12);
    let dressed = DressedModel::build(&model, 0.6525, &spec).unwrap();
    let full0 = model.assemble(0.6525 * PI, 0.0).to_dense();
    let eig = full0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let q = DMatrix::from_fn(full0.nrows(), 12, |r, j| eig.eigenvectors[(r, order[j])]);
    let (theta, rate) = (0.8 * PI, 0.2);
    let projected = q.adjoint() * model.assemble(theta, rate).to_dense() * &q;
    let shift = eig.eigenvalues[order[0]];
    let ours = dressed.hamiltonian(theta, rate);
    // Eigenvector phases differ, so compare gauge-invariant quantities.
    for i in 0..12 {
        assert!((ours[(i, i)].re + shift - projected[(i, i)].re).abs() < 1e-8);
        for j in (0..12).filter(|&j| j != i) {
            let (a, b) = (ours[(i, j)].norm(), projected[(i, j)].norm());
            assert!((a - b).abs() < 1e-8, "({i},{j}): {a} vs {b}");
        }
    }
}

pub fn gate_fits_round_trip() {
    let cases = [(0.25 * PI, 0.3, -1.1, 2.0), (0.1, -2.9, 0.4, -0.7), (1.2, 1.0, 3.0, 0.0)];
    for (theta, p11, p22, p12) in cases {
        let fit = fit_parametric(&u_para(theta, p11, p22, p12)).unwrap();
        for (a, b) in [(fit.theta, theta), (fit.phi11, p11), (fit.phi22, p22), (fit.phi12, p12)] {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
    for (p11, p22, p33) in [(0.2, -0.4, PI - 0.2), (1.0, 2.0, -3.0)] {
        let fit = fit_cphase(&u_cphase(p11, p22, p33)).unwrap();
        assert!((fit.phi11 - p11).abs() < 1e-10 && (fit.phi22 - p22).abs() < 1e-10 && (fit.phi33 - p33).abs() < 1e-10);
        let expected = (p33 - p22 - p11).rem_euclid(2.0 * PI);
        assert!((fit.phi_cphase - expected).abs() < 1e-10);
    }
}

pub fn fidelity_identities() {
    let gates: Vec<Gate> = vec![u_para(0.25 * PI, 0.1, 0.2, 0.3), u_cphase(0.0, 0.0, PI), Gate::identity()];
    for u in &gates {
        assert!((average_fidelity(u, u) - 1.0).abs() < 1e-14);
        assert!(leakage_rates(u).iter().all(|l| l.abs() < 1e-14));
    }
}

fn central_difference(p: &dyn Pulse, t: f64) -> f64 {
    let h = 1e-6;
    (p.value_and_derivative(t + h).0 - p.value_and_derivative(t - h).0) / (2.0 * h)
}

pub fn pulse_derivatives_match_finite_differences() {
    let ac = AcPulse::new(0.6525 * PI, 0.1575 * PI, 0.3, 24.0, 2.0 * PI * 0.7).unwrap();
    let dc = DcPulse::new(0.6525 * PI, 0.9 * PI, 18.0, 0.35, vec![0.1, -0.05]).unwrap();
    let pulses: [&dyn Pulse; 2] = [&ac, &dc];
    for p in pulses {
        let t_end = p.duration();
        for k in 1..200 {
            let t = t_end * k as f64 / 200.0 + 1e-3;
            if p.breakpoints().iter().any(|b| (b - t).abs() < 1e-5) || t >= t_end {
                continue;
            }
            let analytic = p.value_and_derivative(t).1;
            let numeric = central_difference(p, t);
            let scale = analytic.abs().max(1.0);
            assert!((analytic - numeric).abs() <= 1e-6 * scale, "t {t}: {analytic} vs {numeric}");
        }
    }
}
