//! Gate matrix extraction, ideal-gate fits, average fidelity and leakage.
//!
//! Matrix indices follow 2i+j with i, j the excitations of qubits 1 and 2,
//! so |01⟩ is index 1 and |10⟩ is index 2.

use std::f64::consts::{PI, TAU};

use nalgebra::{DVector, Matrix4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Gate = Matrix4<C64>;

const I: C64 = C64 { re: 0.0, im: 1.0 };
const MIN_MAGNITUDE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    Parametric,
    Cphase,
}

/// U′ from final states: `U′_{r,c} = e^{iω_r T} ⟨r|ψ_c(T)⟩`, then a global
/// phase making U′₀₀ real and non-negative.
pub fn extract_u_prime(finals: &[DVector<C64>], idle_basis: &[DVector<C64>], idle_freqs: [f64; 4], t: f64) -> Result<Gate> {
    if finals.len() != 4 || idle_basis.len() != 4 {
        return Err(Error::InvalidArgument("gate extraction needs four final and four basis states".into()));
    }
    let mut u = Gate::from_fn(|r, c| C64::from_polar(1.0, idle_freqs[r] * t) * idle_basis[r].dotc(&finals[c]));
    let u00 = u[(0, 0)];
    if u00.norm() < 1e-6 {
        return Err(Error::Fit(format!("global phase undefined: |<00|00~>| = {:.3e}", u00.norm())));
    }
    let phase = u00.conj() / u00.norm();
    u *= phase;
    Ok(u)
}

/// L_c = 1 − Σ_r |U′_{r,c}|².
pub fn leakage_rates(u: &Gate) -> [f64; 4] {
    std::array::from_fn(|c| (1.0 - (0..4).map(|r| u[(r, c)].norm_sqr()).sum::<f64>()).clamp(0.0, 1.0))
}

/// F̄ = (|tr(U_id† U′)|² + tr(U′† U′)) / 20.
pub fn average_fidelity(u_prime: &Gate, u_id: &Gate) -> f64 {
    let overlap = (u_id.adjoint() * u_prime).trace();
    let norm = (u_prime.adjoint() * u_prime).trace().re;
    (overlap.norm_sqr() + norm) / 20.0
}

fn phase_of(z: C64, entry: &str) -> Result<f64> {
    if z.norm() <= MIN_MAGNITUDE {
        return Err(Error::Fit(format!("phase of {entry} undefined (magnitude {:.3e})", z.norm())));
    }
    Ok(z.arg())
}

/// Wraps an angle into [0, 2π).
pub fn wrap_positive(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParametricFit {
    pub theta: f64,
    pub phi11: f64,
    pub phi22: f64,
    pub phi12: f64,
}

impl ParametricFit {
    pub fn ideal(&self) -> Gate {
        u_para(self.theta, self.phi11, self.phi22, self.phi12)
    }
}

/// The parametric gate family with φ₂₁ = φ₁₁ + φ₂₂ − φ₁₂.
pub fn u_para(theta: f64, phi11: f64, phi22: f64, phi12: f64) -> Gate {
    let (s, c) = theta.sin_cos();
    let e = |x: f64| C64::from_polar(1.0, x);
    let phi21 = phi11 + phi22 - phi12;
    let mut u = Gate::zeros();
    u[(0, 0)] = C64::new(1.0, 0.0);
    u[(1, 1)] = e(phi11) * c;
    u[(1, 2)] = -I * e(phi12) * s;
    u[(2, 1)] = -I * e(phi21) * s;
    u[(2, 2)] = e(phi22) * c;
    u[(3, 3)] = e(phi11 + phi22);
    u
}

/// θ = arcsin|U′₁₂|, e^{iφᵢᵢ} = U′ᵢᵢ/|U′ᵢᵢ|, e^{iφ₁₂} = iU′₁₂/|U′₁₂|.
pub fn fit_parametric(u: &Gate) -> Result<ParametricFit> {
    let theta = u[(1, 2)].norm().min(1.0).asin();
    let phi11 = phase_of(u[(1, 1)], "U'(1,1)")?;
    let phi22 = phase_of(u[(2, 2)], "U'(2,2)")?;
    // φ₁₂ multiplies sin θ only; it is set to zero when U′₁₂ vanishes.
    let phi12 = if u[(1, 2)].norm() <= MIN_MAGNITUDE { 0.0 } else { (I * u[(1, 2)]).arg() };
    Ok(ParametricFit { theta, phi11, phi22, phi12 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CphaseFit {
    /// φ₃₃ − φ₂₂ − φ₁₁ wrapped into [0, 2π).
    pub phi_cphase: f64,
    pub phi11: f64,
    pub phi22: f64,
    pub phi33: f64,
}

impl CphaseFit {
    pub fn ideal(&self) -> Gate {
        u_cphase(self.phi11, self.phi22, self.phi33)
    }
}

pub fn u_cphase(phi11: f64, phi22: f64, phi33: f64) -> Gate {
    let e = |x: f64| C64::from_polar(1.0, x);
    Gate::from_diagonal(&nalgebra::Vector4::new(C64::new(1.0, 0.0), e(phi11), e(phi22), e(phi33)))
}

pub fn fit_cphase(u: &Gate) -> Result<CphaseFit> {
    let phi11 = phase_of(u[(1, 1)], "U'(1,1)")?;
    let phi22 = phase_of(u[(2, 2)], "U'(2,2)")?;
    let phi33 = phase_of(u[(3, 3)], "U'(3,3)")?;
    Ok(CphaseFit {
        phi_cphase: wrap_positive(phi33 - phi22 - phi11),
        phi11,
        phi22,
        phi33,
    })
}

/// Matrix as nested `[re, im]` pairs.
fn matrix_to_nested(u: &Gate) -> Vec<Vec<[f64; 2]>> {
    (0..4).map(|r| (0..4).map(|c| [u[(r, c)].re, u[(r, c)].im]).collect()).collect()
}

fn nested_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<Gate> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(Error::Parse("gate matrix must be 4x4".into()));
    }
    Ok(Gate::from_fn(|r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub kind: GateKind,
    pub gate_time_ns: f64,
    /// θ_para for parametric gates, φ_CPHASE for CPHASE gates (radians).
    pub angle: f64,
    /// (φ₁₁, φ₂₂, φ₁₂) or (φ₁₁, φ₂₂, φ₃₃).
    pub fitted_phases: [f64; 3],
    pub avg_fidelity: f64,
    /// L for initial states |00⟩, |01⟩, |10⟩, |11⟩.
    pub leakage: [f64; 4],
    pub u_prime: Vec<Vec<[f64; 2]>>,
    pub u_ideal: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    pub config_hash: String,
}

impl GateReport {
    pub fn from_u_prime(kind: GateKind, u: &Gate, gate_time_ns: f64) -> Result<Self> {
        let (angle, fitted_phases, ideal) = match kind {
            GateKind::Parametric => {
                let f = fit_parametric(u)?;
                (f.theta, [f.phi11, f.phi22, f.phi12], f.ideal())
            }
            GateKind::Cphase => {
                let f = fit_cphase(u)?;
                (f.phi_cphase, [f.phi11, f.phi22, f.phi33], f.ideal())
            }
        };
        Ok(Self {
            kind,
            gate_time_ns,
            angle,
            fitted_phases,
            avg_fidelity: average_fidelity(u, &ideal),
            leakage: leakage_rates(u),
            u_prime: matrix_to_nested(u),
            u_ideal: matrix_to_nested(&ideal),
            config_hash: String::new(),
        })
    }

    pub fn u_prime_matrix(&self) -> Result<Gate> {
        nested_to_matrix(&self.u_prime)
    }

    pub fn total_leakage(&self) -> f64 {
        self.leakage.iter().sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn summary(&self) -> String {
        let name = match self.kind {
            GateKind::Parametric => "theta_para",
            GateKind::Cphase => "phi_cphase",
        };
        format!(
            "T = {:.4} ns  {name} = {:.6} rad ({:.5} pi)  F = {:.6}  L = [{:.2e}, {:.2e}, {:.2e}, {:.2e}]",
            self.gate_time_ns,
            self.angle,
            self.angle / PI,
            self.avg_fidelity,
            self.leakage[0],
            self.leakage[1],
            self.leakage[2],
            self.leakage[3]
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn identity_fits() {
        let u = Gate::identity();
        let p = fit_parametric(&u).unwrap();
        assert_eq!((p.theta, p.phi11, p.phi22, p.phi12), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(fit_parametric(&Gate::zeros()), Err(Error::Fit(_))));
        let c = fit_cphase(&u).unwrap();
        assert_eq!(c.phi_cphase, 0.0);
        assert_relative_eq!(average_fidelity(&u, &u), 1.0, epsilon = 1e-15);
        assert_eq!(leakage_rates(&u), [0.0; 4]);
    }

    #[test]
    fn cz_and_arithmetic_cphase() {
        let cz = u_cphase(0.0, 0.0, PI);
        assert_relative_eq!(fit_cphase(&cz).unwrap().phi_cphase, PI, epsilon = 1e-15);
        let u = u_cphase(0.3, 0.5, 1.9);
        assert_relative_eq!(fit_cphase(&u).unwrap().phi_cphase, 1.1, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_iswap_round_trip() {
        let u = u_para(PI / 4.0, 0.0, 0.0, 0.0);
        let f = fit_parametric(&u).unwrap();
        assert_relative_eq!(f.theta, PI / 4.0, epsilon = 1e-15);
        assert_relative_eq!(f.phi11, 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.phi12, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scaled_column_leaks() {
        let mut u = Gate::identity();
        u.set_column(2, &(u.column(2) * C64::new(0.99, 0.0)));
        let l = leakage_rates(&u);
        assert_relative_eq!(l[2], 1.0 - 0.99 * 0.99, epsilon = 1e-15);
        assert_eq!(average_fidelity(&Gate::zeros(), &Gate::identity()), 0.0);
    }

    #[test]
    fn extraction_removes_idle_phases() {
        let freqs = [0.0, 1.3, 2.1, 3.5];
        let basis: Vec<DVector<C64>> = (0..4).map(|i| DVector::from_fn(6, |r, _| if r == i { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })).collect();
        let t = 2.7;
        let g = C64::from_polar(1.0, 0.4);
        let finals: Vec<DVector<C64>> = (0..4).map(|i| &basis[i] * (g * C64::from_polar(1.0, -freqs[i] * t))).collect();
        let u = extract_u_prime(&finals, &basis, freqs, t).unwrap();
        assert!((u - Gate::identity()).norm() < 1e-14);
    }

    #[test]
    fn report_json_round_trip() {
        let u = u_para(0.7, 0.1, -0.2, 0.3);
        let r = GateReport::from_u_prime(GateKind::Parametric, &u, 24.0).unwrap();
        let back = GateReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!((back.u_prime_matrix().unwrap() - u).norm() == 0.0);
        assert!(r.summary().contains("theta_para"));
    }
}
