//! Device design parameters, the quantities derived from them, and the TOML
//! configuration format.

use std::path::Path;

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{
    angular_to_ghz, angular_to_mhz, critical_current_na, ghz_to_angular, per_second_to_per_ns,
    ELEMENTARY_CHARGE, FEMTOFARAD, HBAR,
};
use crate::error::{Error, Result};

/// Number of transmons in the circuit: two qubits (1, 2) and the two coupler
/// transmons (3, 4).
pub const NUM_TRANSMONS: usize = 4;

/// Design inputs of the qubit-coupler-qubit circuit.
///
/// Capacitances are in fF, transmon frequencies in GHz (ω/2π).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    /// Symmetric capacitance table: `cap[i][i]` is the self capacitance of
    /// transmon `i`, `cap[i][j]` the coupling capacitance between `i` and `j`.
    pub cap: [[f64; 4]; 4],
    pub qubit_freqs: [f64; 4],
    /// Ratio of the loop junction critical current to the mean of the two
    /// coupler junctions.
    pub r_j: f64,
    /// Cooper-pair number cutoff N; each transmon has dimension 2N+1.
    pub charge_cutoff: usize,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::paper_defaults()
    }
}

impl DeviceParams {
    /// The reference design: 7.0/7.7 GHz qubits, 10.2 GHz coupler transmons.
    pub fn paper_defaults() -> Self {
        let mut cap = [[0.0; 4]; 4];
        let entries = [
            (0, 0, 60.0),
            (0, 1, 0.025),
            (0, 2, 6.0),
            (0, 3, 0.05),
            (1, 1, 60.0),
            (1, 2, 0.05),
            (1, 3, 6.0),
            (2, 2, 60.0),
            (2, 3, 1.0),
            (3, 3, 60.0),
        ];
        for (i, j, c) in entries {
            cap[i][j] = c;
            cap[j][i] = c;
        }
        Self {
            cap,
            qubit_freqs: [7.0, 7.7, 10.2, 10.2],
            r_j: 0.3,
            charge_cutoff: 10,
        }
    }

    pub fn with_r_j(mut self, r_j: f64) -> Self {
        self.r_j = r_j;
        self
    }

    pub fn with_cutoff(mut self, n: usize) -> Self {
        self.charge_cutoff = n;
        self
    }

    /// Dimension of one transmon in the charge basis.
    pub fn local_dim(&self) -> usize {
        2 * self.charge_cutoff + 1
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            for j in 0..4 {
                let c = self.cap[i][j];
                let name = cap_field(i, j);
                if !c.is_finite() {
                    return Err(Error::config(name, "must be finite"));
                }
                if i == j && c <= 0.0 {
                    return Err(Error::config(name, format!("self capacitance must be > 0, got {c}")));
                }
                if i != j && c < 0.0 {
                    return Err(Error::config(name, format!("coupling capacitance must be >= 0, got {c}")));
                }
                if (c - self.cap[j][i]).abs() > 1e-12 * c.abs().max(1.0) {
                    return Err(Error::config(name, "capacitance table must be symmetric"));
                }
            }
        }
        if self.cap[2][3] <= 0.0 {
            return Err(Error::config("c34_fF", "coupler loop capacitance must be > 0"));
        }
        for (i, f) in self.qubit_freqs.iter().enumerate() {
            if !(f.is_finite() && *f > 0.0) {
                return Err(Error::config(format!("omega{}_GHz", i + 1), format!("must be > 0, got {f}")));
            }
        }
        if !(self.r_j > 0.0 && self.r_j < 1.0) {
            return Err(Error::config("r_j", format!("must lie in (0, 1), got {}", self.r_j)));
        }
        if self.charge_cutoff < 1 {
            return Err(Error::config("charge_cutoff", "must be >= 1"));
        }
        Ok(())
    }

    /// Capacitor matrix M in fF: `M_ii = Σ_j C_ij`, `M_ij = -C_ij`.
    pub fn capacitor_matrix(&self) -> Result<Matrix4<f64>> {
        self.validate()?;
        let m = Matrix4::from_fn(|i, j| {
            if i == j {
                (0..4).map(|k| self.cap[i][k]).sum()
            } else {
                -self.cap[i][j]
            }
        });
        let eig = SymmetricEigen::new(m);
        if eig.eigenvalues.min() <= 0.0 {
            return Err(Error::config("capacitance", "capacitor matrix is not positive definite"));
        }
        Ok(m)
    }

    pub fn derive(&self) -> Result<DerivedParams> {
        let m = self.capacitor_matrix()?;
        let w = charging_matrix(&m)?;
        let omega_j = josephson_freqs(&self.qubit_freqs.map(ghz_to_angular), &w, self.r_j);
        Ok(DerivedParams {
            w,
            omega_j,
            omega_c34: loop_charging_frequency(self.cap[2][3]),
            theta_idle: None,
        })
    }

    /// Stable hash of the parameter set, used to tag output files.
    pub fn config_hash(&self) -> String {
        let text = self.to_toml();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.resolve()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            paper_defaults: None,
            r_j: Some(self.r_j),
            charge_cutoff: Some(self.charge_cutoff as i64),
            capacitance: Some(RawCaps::from_table(&self.cap)),
            frequencies: Some(RawFreqs {
                omega1_ghz: Some(self.qubit_freqs[0]),
                omega2_ghz: Some(self.qubit_freqs[1]),
                omega3_ghz: Some(self.qubit_freqs[2]),
                omega4_ghz: Some(self.qubit_freqs[3]),
            }),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

fn cap_field(i: usize, j: usize) -> String {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    format!("c{}{}_fF", a + 1, b + 1)
}

/// W = e² M⁻¹ / (2ħ) as angular frequency in rad/ns, M given in fF.
pub fn charging_matrix(m_ff: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let m = m_ff * FEMTOFARAD;
    let inv = m
        .cholesky()
        .ok_or_else(|| Error::config("capacitance", "capacitor matrix is not positive definite"))?
        .inverse();
    let scale = per_second_to_per_ns(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * HBAR));
    let w = inv * scale;
    // Cholesky inverse is symmetric only up to rounding.
    Ok((w + w.transpose()) * 0.5)
}

/// ω_C34 = e² / (2ħ C34) in rad/ns.
pub fn loop_charging_frequency(c34_ff: f64) -> f64 {
    per_second_to_per_ns(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * HBAR * c34_ff * FEMTOFARAD))
}

/// Josephson frequencies of the four transmon junctions from
/// ω_J = (ω + W_ii)² / (8 W_ii); the loop junction follows from `r_j`.
pub fn josephson_freqs(omega: &[f64; 4], w: &Matrix4<f64>, r_j: f64) -> [f64; 5] {
    let mut out = [0.0; 5];
    for i in 0..4 {
        let wii = w[(i, i)];
        out[i] = (omega[i] + wii).powi(2) / (8.0 * wii);
    }
    out[4] = r_j * 0.5 * (out[2] + out[3]);
    out
}

/// Quantities computed from [`DeviceParams`]; angular frequencies in rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    pub w: Matrix4<f64>,
    /// ω_J1..ω_J5; index 4 is the coupler loop junction.
    pub omega_j: [f64; 5],
    pub omega_c34: f64,
    /// Idling flux Θ₀ in units of π, once located by the spectrum module.
    pub theta_idle: Option<f64>,
}

impl DerivedParams {
    pub fn with_idle(mut self, theta_over_pi: f64) -> Self {
        self.theta_idle = Some(theta_over_pi);
        self
    }

    /// Informational critical currents in nA (ħω_J = φ₀ I_c).
    pub fn critical_currents_na(&self) -> [f64; 5] {
        self.omega_j.map(critical_current_na)
    }

    pub fn summary(&self) -> DerivedSummary {
        let mut w_mhz = std::collections::BTreeMap::new();
        for i in 0..4 {
            for j in i..4 {
                w_mhz.insert(format!("w{}{}_MHz", i + 1, j + 1), angular_to_mhz(self.w[(i, j)]));
            }
        }
        let mut omega_j_ghz = std::collections::BTreeMap::new();
        let mut ic_na = std::collections::BTreeMap::new();
        for (i, (wj, ic)) in self.omega_j.iter().zip(self.critical_currents_na()).enumerate() {
            omega_j_ghz.insert(format!("omega_j{}_GHz", i + 1), angular_to_ghz(*wj));
            ic_na.insert(format!("ic{}_nA", i + 1), ic);
        }
        DerivedSummary {
            omega_c34_ghz: angular_to_ghz(self.omega_c34),
            theta_idle_over_pi: self.theta_idle,
            w: w_mhz,
            josephson: omega_j_ghz,
            critical_current_informational: ic_na,
        }
    }
}

/// Structured-text view of [`DerivedParams`] in reporting units.
#[derive(Debug, Clone, Serialize)]
pub struct DerivedSummary {
    #[serde(rename = "omega_c34_GHz")]
    pub omega_c34_ghz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_idle_over_pi: Option<f64>,
    pub w: std::collections::BTreeMap<String, f64>,
    pub josephson: std::collections::BTreeMap<String, f64>,
    pub critical_current_informational: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "paper-defaults", alias = "paper_defaults", skip_serializing_if = "Option::is_none")]
    paper_defaults: Option<bool>,
    r_j: Option<f64>,
    charge_cutoff: Option<i64>,
    capacitance: Option<RawCaps>,
    frequencies: Option<RawFreqs>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCaps {
    #[serde(rename = "c11_fF")]
    c11: Option<f64>,
    #[serde(rename = "c12_fF")]
    c12: Option<f64>,
    #[serde(rename = "c13_fF")]
    c13: Option<f64>,
    #[serde(rename = "c14_fF")]
    c14: Option<f64>,
    #[serde(rename = "c22_fF")]
    c22: Option<f64>,
    #[serde(rename = "c23_fF")]
    c23: Option<f64>,
    #[serde(rename = "c24_fF")]
    c24: Option<f64>,
    #[serde(rename = "c33_fF")]
    c33: Option<f64>,
    #[serde(rename = "c34_fF")]
    c34: Option<f64>,
    #[serde(rename = "c44_fF")]
    c44: Option<f64>,
}

impl RawCaps {
    fn from_table(c: &[[f64; 4]; 4]) -> Self {
        Self {
            c11: Some(c[0][0]),
            c12: Some(c[0][1]),
            c13: Some(c[0][2]),
            c14: Some(c[0][3]),
            c22: Some(c[1][1]),
            c23: Some(c[1][2]),
            c24: Some(c[1][3]),
            c33: Some(c[2][2]),
            c34: Some(c[2][3]),
            c44: Some(c[3][3]),
        }
    }

    fn entries(&self) -> [(usize, usize, Option<f64>); 10] {
        [
            (0, 0, self.c11),
            (0, 1, self.c12),
            (0, 2, self.c13),
            (0, 3, self.c14),
            (1, 1, self.c22),
            (1, 2, self.c23),
            (1, 3, self.c24),
            (2, 2, self.c33),
            (2, 3, self.c34),
            (3, 3, self.c44),
        ]
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFreqs {
    #[serde(rename = "omega1_GHz")]
    omega1_ghz: Option<f64>,
    #[serde(rename = "omega2_GHz")]
    omega2_ghz: Option<f64>,
    #[serde(rename = "omega3_GHz")]
    omega3_ghz: Option<f64>,
    #[serde(rename = "omega4_GHz")]
    omega4_ghz: Option<f64>,
}

impl RawConfig {
    fn resolve(self) -> Result<DeviceParams> {
        let use_defaults = self.paper_defaults.unwrap_or(false);
        let defaults = DeviceParams::paper_defaults();
        let pick = |value: Option<f64>, default: f64, field: &str| -> Result<f64> {
            match value {
                Some(v) => Ok(v),
                None if use_defaults => Ok(default),
                None => Err(Error::config(field, "missing (set `paper-defaults = true` to fill from the reference design)")),
            }
        };

        let caps = self.capacitance.unwrap_or_default();
        let mut cap = [[0.0; 4]; 4];
        for (i, j, value) in caps.entries() {
            let c = pick(value, defaults.cap[i][j], &cap_field(i, j))?;
            cap[i][j] = c;
            cap[j][i] = c;
        }

        let freqs = self.frequencies.unwrap_or_default();
        let raw_freqs = [freqs.omega1_ghz, freqs.omega2_ghz, freqs.omega3_ghz, freqs.omega4_ghz];
        let mut qubit_freqs = [0.0; 4];
        for (i, value) in raw_freqs.into_iter().enumerate() {
            qubit_freqs[i] = pick(value, defaults.qubit_freqs[i], &format!("omega{}_GHz", i + 1))?;
        }

        let r_j = pick(self.r_j, defaults.r_j, "r_j")?;
        let charge_cutoff = match self.charge_cutoff {
            Some(n) if n >= 1 => n as usize,
            Some(n) => return Err(Error::config("charge_cutoff", format!("must be >= 1, got {n}"))),
            None if use_defaults => defaults.charge_cutoff,
            None => return Err(Error::config("charge_cutoff", "missing")),
        };

        let params = DeviceParams {
            cap,
            qubit_freqs,
            r_j,
            charge_cutoff,
        };
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn capacitor_matrix_row_sum() {
        let m = DeviceParams::paper_defaults().capacitor_matrix().unwrap();
        assert_relative_eq!(m[(0, 0)], 66.075, epsilon = 1e-12);
        assert_eq!(m[(0, 2)], -6.0);
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn decoupled_capacitances_give_diagonal_matrices() {
        let mut p = DeviceParams::paper_defaults();
        for i in 0..4 {
            for j in 0..4 {
                if i != j && !(i == 2 && j == 3 || i == 3 && j == 2) {
                    p.cap[i][j] = 0.0;
                }
            }
        }
        // C34 must stay positive for the loop term; check only qubit rows.
        let m = p.capacitor_matrix().unwrap();
        assert_eq!(m[(0, 0)], 60.0);
        let w = charging_matrix(&m).unwrap();
        assert_eq!(w[(0, 1)], 0.0);
        assert_eq!(w[(0, 2)], 0.0);
    }

    #[test]
    fn charging_matrix_inverts_capacitor_matrix() {
        let m = DeviceParams::paper_defaults().capacitor_matrix().unwrap();
        let w = charging_matrix(&m).unwrap();
        let scale = per_second_to_per_ns(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * HBAR)) / FEMTOFARAD;
        let prod = w * m / scale;
        let err = (prod - Matrix4::identity()).abs().max();
        assert!(err < 1e-10, "{err}");
        assert!(SymmetricEigen::new(w).eigenvalues.min() > 0.0);
    }

    #[test]
    fn coupler_josephson_freqs_are_symmetric() {
        let d = DeviceParams::paper_defaults().derive().unwrap();
        assert_relative_eq!(d.omega_j[2], d.omega_j[3], max_relative = 1e-12);
        assert_relative_eq!(d.omega_j[4], 0.3 * d.omega_j[2], max_relative = 1e-12);
    }

    #[test]
    fn josephson_freq_monotone_in_transmon_freq() {
        let w = DeviceParams::paper_defaults().derive().unwrap().w;
        let lo = josephson_freqs(&[40.0, 40.0, 60.0, 60.0], &w, 0.3);
        let hi = josephson_freqs(&[41.0, 40.0, 60.0, 60.0], &w, 0.3);
        assert!(hi[0] > lo[0]);
    }

    #[test]
    fn loop_charging_frequency_value() {
        // e²/(2ħ·1 fF) = 1.2171e11 rad/s.
        let w = loop_charging_frequency(1.0);
        assert_relative_eq!(w, 121.71, max_relative = 1e-3);
    }

    #[test]
    fn toml_round_trip_matches_defaults() {
        let p = DeviceParams::paper_defaults();
        let back = DeviceParams::from_toml_str(&p.to_toml()).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn negative_capacitance_is_rejected() {
        let text = "paper-defaults = true\n[capacitance]\nc12_fF = -1.0\n";
        let err = DeviceParams::from_toml_str(text).unwrap_err();
        assert!(err.to_string().contains("c12_fF"), "{err}");
    }

    #[test]
    fn empty_file_without_defaults_flag_fails() {
        let err = DeviceParams::from_toml_str("").unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn defaults_flag_fills_missing_fields() {
        let p = DeviceParams::from_toml_str("paper-defaults = true\nr_j = 0.25\n").unwrap();
        assert_eq!(p, DeviceParams::paper_defaults().with_r_j(0.25));
    }

    #[test]
    fn unknown_field_is_a_parse_error() {
        assert!(DeviceParams::from_toml_str("paper-defaults = true\nbogus = 1\n").is_err());
    }

    #[test]
    fn r_j_out_of_range() {
        let err = DeviceParams::paper_defaults().with_r_j(1.5).validate().unwrap_err();
        assert!(err.to_string().contains("r_j"));
    }
}
