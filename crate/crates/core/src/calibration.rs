//! Angle-versus-gate-time curves, gate-time root finding and dc ramp tuning.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate_computational_basis, BasisSpec, DressedModel, PropagationOptions};
use crate::error::{Error, Result};
use crate::metrics::{extract_u_prime, GateKind, GateReport};
use crate::operators::HamiltonianModel;
use crate::optimize::{brent_root, pattern_search};
use crate::pulses::{AcPulse, DcPulse, Pulse, PulseDescriptor, MAX_RAMP_CORRECTION};

/// Required accuracy of the angle at a solved gate time (rad).
pub const ANGLE_TOLERANCE: f64 = 1e-4;

/// Weight of the squared phase error in the ramp-tuning objective. With
/// it, the objective approximates 20 (1 − F̄) for a CPHASE target.
pub const PHASE_WEIGHT: f64 = 3.0;

/// Ramp corrections tuned by default.
pub const DEFAULT_RAMP_TERMS: usize = 2;

const MIN_RAMP_FRACTION: f64 = 0.05;

/// A pulse shape with the gate time left free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PulseFamily {
    Ac {
        theta0: f64,
        alpha: f64,
        beta: f64,
        carrier: f64,
    },
    Dc {
        theta0: f64,
        theta_peak: f64,
        ramp_fraction: f64,
        #[serde(default)]
        ramp_coeffs: Vec<f64>,
    },
}

impl PulseFamily {
    pub fn kind(&self) -> GateKind {
        match self {
            PulseFamily::Ac { .. } => GateKind::Parametric,
            PulseFamily::Dc { .. } => GateKind::Cphase,
        }
    }

    pub fn theta0(&self) -> f64 {
        match self {
            PulseFamily::Ac { theta0, .. } | PulseFamily::Dc { theta0, .. } => *theta0,
        }
    }

    pub fn pulse(&self, gate_time: f64) -> Result<PulseDescriptor> {
        if !(gate_time > 0.0) {
            return Err(Error::InvalidArgument(format!("gate time {gate_time} must be positive")));
        }
        Ok(match self {
            PulseFamily::Ac { theta0, alpha, beta, carrier } => PulseDescriptor::Ac(AcPulse::new(*theta0, *alpha, *beta, gate_time, *carrier)?),
            PulseFamily::Dc {
                theta0,
                theta_peak,
                ramp_fraction,
                ramp_coeffs,
            } => PulseDescriptor::Dc(DcPulse::new(*theta0, *theta_peak, gate_time, *ramp_fraction, ramp_coeffs.clone())?),
        })
    }

    /// Dressed basis wide enough for every member of the family. Dc ramp
    /// overshoot is ignored so tuning can reuse one basis.
    pub fn basis_spec(&self) -> BasisSpec {
        match self {
            PulseFamily::Ac { .. } => {
                let p = self.pulse(1.0).expect("family validated");
                BasisSpec::for_pulse(p.as_pulse())
            }
            PulseFamily::Dc { theta0, theta_peak, .. } => {
                let flat = DcPulse::new(*theta0, *theta_peak, 1.0, 0.5, Vec::new()).expect("plain ramp is valid");
                BasisSpec::for_pulse(&flat)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse(1.0).map(|_| ())
    }
}

/// Runs gate simulations for one pulse family on a fixed dressed basis.
#[derive(Debug, Clone)]
pub struct GateSimulator {
    pub dressed: DressedModel,
    pub options: PropagationOptions,
    pub config_hash: String,
}

impl GateSimulator {
    pub fn new(model: &HamiltonianModel, family: &PulseFamily, options: PropagationOptions) -> Result<Self> {
        family.validate()?;
        let dressed = DressedModel::build(model, family.theta0() / PI, &family.basis_spec())?;
        Ok(Self::from_dressed(dressed, options))
    }

    pub fn from_dressed(dressed: DressedModel, options: PropagationOptions) -> Self {
        Self {
            dressed,
            options,
            config_hash: String::new(),
        }
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    pub fn simulate(&self, pulse: &dyn Pulse, kind: GateKind) -> Result<GateReport> {
        let t = pulse.duration();
        let run = || -> Result<GateReport> {
            let r = propagate_computational_basis(&self.dressed, pulse, &self.options)?;
            let u = extract_u_prime(&r.finals, &self.dressed.idle_basis(), self.dressed.idle_frequencies(), t)?;
            let mut report = GateReport::from_u_prime(kind, &u, t)?;
            report.config_hash = self.config_hash.clone();
            Ok(report)
        };
        run().map_err(|e| Error::at_gate_time(t, e))
    }

    pub fn run(&self, family: &PulseFamily, gate_time: f64) -> Result<GateReport> {
        let pulse = family.pulse(gate_time)?;
        self.simulate(pulse.as_pulse(), family.kind())
    }
}

/// Puts a fitted CPHASE angle on the branch nearest `reference`.
pub fn nearest_branch(angle: f64, reference: f64) -> f64 {
    angle + TAU * ((reference - angle) / TAU).round()
}

/// Starting branch of an unwrapped curve: fitted angles above 3π/2 are
/// read as small negative phases.
fn initial_branch(angle: f64) -> f64 {
    if angle > 1.5 * PI {
        angle - TAU
    } else {
        angle
    }
}

/// Unwraps wrapped phases sampled along a grid: each step is taken on the
/// branch nearest the previous value.
pub fn unwrap_phases(angles: &mut [f64]) {
    let Some(first) = angles.first_mut() else {
        return;
    };
    *first = initial_branch(*first);
    let mut prev = *first;
    for a in angles.iter_mut().skip(1) {
        *a = nearest_branch(*a, prev);
        prev = *a;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub gate_time_ns: f64,
    /// θ_para, or φ_CPHASE unwrapped along the curve (rad).
    pub angle: f64,
    pub avg_fidelity: f64,
    pub total_leakage: f64,
}

/// Simulates every gate time of an ascending grid concurrently.
pub fn angle_vs_time(sim: &GateSimulator, family: &PulseFamily, grid: &[f64]) -> Result<Vec<CurvePoint>> {
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("gate-time grid must be positive and strictly ascending".into()));
    }
    let reports: Vec<GateReport> = grid.par_iter().map(|&t| sim.run(family, t)).collect::<Result<_>>()?;
    let mut curve: Vec<CurvePoint> = reports
        .iter()
        .map(|r| CurvePoint {
            gate_time_ns: r.gate_time_ns,
            angle: r.angle,
            avg_fidelity: r.avg_fidelity,
            total_leakage: r.total_leakage(),
        })
        .collect();
    if family.kind() == GateKind::Cphase {
        let mut angles: Vec<f64> = curve.iter().map(|p| p.angle).collect();
        unwrap_phases(&mut angles);
        for (p, a) in curve.iter_mut().zip(angles) {
            p.angle = a;
        }
    }
    if curve.windows(2).any(|w| w[1].angle < w[0].angle) {
        log::warn!("angle is not monotone in gate time over [{}, {}] ns", grid[0], grid[grid.len() - 1]);
    }
    Ok(curve)
}

pub fn curve_csv(curve: &[CurvePoint], provenance: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {provenance}");
    let _ = writeln!(s, "gate_time_ns,angle_rad,angle_over_pi,avg_fidelity,total_leakage");
    for p in curve {
        let _ = writeln!(
            s,
            "{:.6},{:.12e},{:.12e},{:.12e},{:.6e}",
            p.gate_time_ns,
            p.angle,
            p.angle / PI,
            p.avg_fidelity,
            p.total_leakage
        );
    }
    s
}

/// Least-squares line through `(x, y)`; returns (slope, intercept, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Fit(format!("linear fit needs matching samples, got {} and {}", n, y.len())));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("linear fit with constant abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok((slope, intercept, r2))
}

#[derive(Debug, Clone)]
pub struct GateTimeSolution {
    pub gate_time: f64,
    pub report: GateReport,
    /// Angle on the branch used for the solve.
    pub angle: f64,
    /// Coarse scan across the bracket, on the same branch as `angle`.
    pub curve: Vec<CurvePoint>,
    pub evaluations: usize,
}

/// Coarse scan step (ns) used to place the root inside the bracket.
const SCAN_STEP: f64 = 2.0;

/// Finds T in `bracket` where the gate angle equals `target`.
pub fn solve_gate_time(sim: &GateSimulator, family: &PulseFamily, target: f64, bracket: (f64, f64)) -> Result<GateTimeSolution> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidArgument(format!("gate-time bracket [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    let n = (((hi - lo) / SCAN_STEP).ceil() as usize).max(1);
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut curve = angle_vs_time(sim, family, &grid)?;
    let mut evaluations = curve.len();
    let cphase = family.kind() == GateKind::Cphase;
    if cphase {
        // Shift the whole curve by 2π so the target falls inside its range
        // when possible.
        let (a, b) = (curve[0].angle, curve[curve.len() - 1].angle);
        let mid = 0.5 * (a + b);
        let shift = TAU * ((target - mid) / TAU).round();
        let fits = |s: f64| (a + s - target) * (b + s - target) <= 0.0;
        let shift = [shift, 0.0, shift - TAU, shift + TAU].into_iter().find(|&s| fits(s)).unwrap_or(0.0);
        curve.iter_mut().for_each(|p| p.angle += shift);
    }
    let first = curve.first().expect("non-empty grid");
    let last = curve.last().expect("non-empty grid");
    let interval = curve.windows(2).position(|w| (w[0].angle - target) * (w[1].angle - target) <= 0.0);
    let Some(i) = interval else {
        return Err(Error::Bracket {
            lo,
            hi,
            target,
            angle_lo: first.angle,
            angle_hi: last.angle,
        });
    };
    let (ta, tb, aa, ab) = (curve[i].gate_time_ns, curve[i + 1].gate_time_ns, curve[i].angle, curve[i + 1].angle);
    let (fa, fb) = (aa - target, ab - target);
    let reference = |t: f64| aa + (ab - aa) * (t - ta) / (tb - ta);
    let mut last_report: Option<GateReport> = None;
    let root = brent_root(
        |t| {
            let r = sim.run(family, t)?;
            let angle = if cphase { nearest_branch(r.angle, reference(t)) } else { r.angle };
            last_report = Some(r);
            Ok(angle - target)
        },
        ta,
        tb,
        fa,
        fb,
        ANGLE_TOLERANCE,
        1e-9,
    )?;
    evaluations += root.evaluations;
    let report = match last_report {
        Some(r) if r.gate_time_ns == root.x => r,
        _ => {
            evaluations += 1;
            sim.run(family, root.x)?
        }
    };
    let angle = if cphase { nearest_branch(report.angle, reference(root.x)) } else { report.angle };
    if (angle - target).abs() > ANGLE_TOLERANCE {
        return Err(Error::Fit(format!(
            "gate-time solve stalled at T = {} ns with angle error {:.3e} rad",
            root.x,
            angle - target
        )));
    }
    Ok(GateTimeSolution {
        gate_time: root.x,
        report,
        angle,
        curve,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneOptions {
    /// CPHASE angle to hold while suppressing leakage; `None` tunes leakage
    /// alone.
    pub target_phase: Option<f64>,
    pub initial_step: f64,
    pub min_step: f64,
    /// Stop once the objective drops below this.
    pub objective_target: f64,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            target_phase: Some(PI),
            initial_step: 0.05,
            min_step: 1e-3,
            objective_target: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneResult {
    pub family: PulseFamily,
    /// Objective at the returned point; NaN if nothing was simulated.
    pub objective: f64,
    pub report: Option<GateReport>,
    pub evaluations: usize,
    /// False when the budget ran out before the search settled.
    pub converged: bool,
}

/// Pattern search over the ramp fraction and ramp corrections of a dc
/// family at fixed gate time. Corrections are boxed to
/// `|c_k| ≤ MAX_RAMP_CORRECTION / n`, so every candidate respects the
/// overshoot invariant.
pub fn tune_dc_ramp(sim: &GateSimulator, family: &PulseFamily, gate_time: f64, budget: usize, options: &TuneOptions) -> Result<TuneResult> {
    let PulseFamily::Dc {
        theta0,
        theta_peak,
        ramp_fraction,
        ramp_coeffs,
    } = family
    else {
        return Err(Error::InvalidArgument("ramp tuning needs a dc pulse family".into()));
    };
    family.pulse(gate_time)?;
    let n = ramp_coeffs.len();
    let cmax = if n == 0 { 0.0 } else { MAX_RAMP_CORRECTION / n as f64 };
    let mut x0 = vec![*ramp_fraction];
    x0.extend(ramp_coeffs);
    let mut bounds = vec![(MIN_RAMP_FRACTION, 0.5)];
    bounds.extend(std::iter::repeat_n((-cmax, cmax), n));
    let step0 = vec![options.initial_step; n + 1];

    let member = |x: &[f64]| PulseFamily::Dc {
        theta0: *theta0,
        theta_peak: *theta_peak,
        ramp_fraction: x[0],
        ramp_coeffs: x[1..].to_vec(),
    };
    let objective = |r: &GateReport| {
        let phase_error = options.target_phase.map_or(0.0, |target| {
            let d = nearest_branch(r.angle, target) - target;
            PHASE_WEIGHT * d * d
        });
        r.total_leakage() + phase_error
    };
    let evaluate = |x: &[f64]| -> Result<f64> {
        let candidate = member(x);
        // Rounding can push the box corners over the limit.
        if candidate.validate().is_err() {
            return Ok(f64::INFINITY);
        }
        sim.run(&candidate, gate_time).map(|r| objective(&r))
    };
    let search = pattern_search(evaluate, &x0, &step0, &bounds, options.min_step, options.objective_target, budget)?;
    let tuned = member(&search.x);
    tuned.validate()?;
    if !search.converged && budget > 0 {
        log::warn!("ramp tuning stopped after {} simulations (budget exhausted)", search.evaluations);
    }
    let report = if budget > 0 { Some(sim.run(&tuned, gate_time)?) } else { None };
    Ok(TuneResult {
        objective: report.as_ref().map_or(f64::NAN, objective),
        family: tuned,
        report,
        evaluations: search.evaluations,
        converged: search.converged,
    })
}

/// One calibration run, appended as a JSON line to the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub kind: GateKind,
    pub target: f64,
    pub gate_time_ns: f64,
    pub angle: f64,
    pub fitted_phases: [f64; 3],
    pub avg_fidelity: f64,
    pub leakage: [f64; 4],
    pub family: PulseFamily,
}

impl RunRecord {
    pub fn new(family: &PulseFamily, target: f64, solution: &GateTimeSolution) -> Self {
        let r = &solution.report;
        Self {
            config_hash: r.config_hash.clone(),
            kind: r.kind,
            target,
            gate_time_ns: solution.gate_time,
            angle: solution.angle,
            fitted_phases: r.fitted_phases,
            avg_fidelity: r.avg_fidelity,
            leakage: r.leakage,
            family: family.clone(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("run records serialize")
    }
}

pub fn append_run_log(path: &Path, record: &RunRecord) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    writeln!(f, "{}", record.to_json_line()).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branches() {
        assert!((nearest_branch(0.1, 2.0 * PI) - (0.1 + TAU)).abs() < 1e-15);
        assert!((nearest_branch(6.2, 0.0) - (6.2 - TAU)).abs() < 1e-15);
        assert_eq!(nearest_branch(3.0, 3.1), 3.0);
        assert!(initial_branch(6.0) < 0.0);
        assert_eq!(initial_branch(1.0), 1.0);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v - 1.0).collect();
        let (m, c, r2) = linear_fit(&x, &y).unwrap();
        assert!((m - 0.5).abs() < 1e-14 && (c + 1.0).abs() < 1e-14 && (r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn families_build_pulses() {
        let ac = PulseFamily::Ac {
            theta0: 0.65 * PI,
            alpha: 0.1,
            beta: 0.3,
            carrier: 4.0,
        };
        assert_eq!(ac.kind(), GateKind::Parametric);
        assert!(matches!(ac.pulse(24.0).unwrap(), PulseDescriptor::Ac(p) if p.duration == 24.0));
        assert!(ac.pulse(0.0).is_err());
        let dc = PulseFamily::Dc {
            theta0: 0.65 * PI,
            theta_peak: 0.9 * PI,
            ramp_fraction: 0.3,
            ramp_coeffs: vec![0.1, -0.1],
        };
        assert_eq!(dc.basis_spec().anchors_over_pi.len(), 1);
        assert_eq!(ac.basis_spec().anchors_over_pi.len(), 2);
        let toml = toml::to_string(&dc).unwrap();
        assert_eq!(toml::from_str::<PulseFamily>(&toml).unwrap(), dc);
    }

    #[test]
    fn tuning_rejects_ac_family() {
        let ac = PulseFamily::Ac {
            theta0: 0.65 * PI,
            alpha: 0.1,
            beta: 0.3,
            carrier: 4.0,
        };
        let params = crate::DeviceParams::paper_defaults().with_cutoff(3);
        let model = HamiltonianModel::truncated(&params, 3).unwrap();
        let dressed = DressedModel::build(&model, 0.65, &BasisSpec::idle_only(8)).unwrap();
        let sim = GateSimulator::from_dressed(dressed, PropagationOptions::sweep());
        assert!(tune_dc_ramp(&sim, &ac, 18.0, 5, &TuneOptions::default()).is_err());
    }
}
