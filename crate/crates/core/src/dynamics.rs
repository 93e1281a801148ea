//! Time evolution under H(Θ(t), Θ̇(t)).
//!
//! States are expanded in the lowest `K` eigenstates of the Hamiltonian at
//! the idle flux. In that basis H(Θ₀) is diagonal and the flux excursion is
//! a dense K×K perturbation
//! `V(t) = −ω_J5[(cos Θ − cos Θ₀) C + (sin Θ − sin Θ₀) S] + (Θ̇/ω_C34) D`,
//! integrated in the interaction picture of the diagonal part.
//!
//! Large excursions leave the span of the idle eigenstates, so the basis can
//! be enriched with eigenstates at extra anchor fluxes. The enlarged space is
//! re-diagonalized at Θ₀; the exact idle eigenstates stay in it unchanged.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ode::{integrate, OdeStats, StepControl};
use crate::operators::HamiltonianModel;
use crate::pulses::Pulse;
use crate::sparse::{dot, CsrMatrix};
use crate::spectrum::{Level, SpectrumResult, SpectrumSolver};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Idle eigenstates kept in the dressed basis by default.
pub const DEFAULT_IDLE_STATES: usize = 40;

/// Eigenstates added per anchor flux by default.
pub const DEFAULT_ANCHOR_STATES: usize = 30;

/// Anchors closer than this to Θ₀ (units of π) are skipped.
const MIN_ANCHOR_OFFSET: f64 = 0.02;

/// Tolerated deviation of any final-state norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-8;

/// Which eigenstates span the dressed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSpec {
    pub idle_states: usize,
    pub anchor_states: usize,
    /// Extra diagonalization points (units of π).
    pub anchors_over_pi: Vec<f64>,
}

impl BasisSpec {
    pub fn idle_only(idle_states: usize) -> Self {
        Self {
            idle_states,
            anchor_states: 0,
            anchors_over_pi: Vec::new(),
        }
    }

    /// Default basis for a pulse: anchors at both ends of its flux range
    /// unless they sit next to Θ₀.
    pub fn for_pulse(pulse: &dyn Pulse) -> Self {
        let theta0 = pulse.idle() / PI;
        let (lo, hi) = pulse.flux_range();
        let anchors_over_pi = [lo / PI, hi / PI].into_iter().filter(|a| (a - theta0).abs() > MIN_ANCHOR_OFFSET).collect();
        Self {
            idle_states: DEFAULT_IDLE_STATES,
            anchor_states: DEFAULT_ANCHOR_STATES,
            anchors_over_pi,
        }
    }
}

/// The Hamiltonian restricted to the low-energy eigenstates at Θ₀.
#[derive(Debug, Clone)]
pub struct DressedModel {
    /// Idle flux (radians).
    pub theta0: f64,
    /// Eigenvalues at Θ₀ relative to the lowest one (rad/ns).
    pub energies: Vec<f64>,
    pub levels: Vec<Level>,
    /// Dressed-basis index of each computational state, 2i+j order.
    pub computational: [usize; 4],
    cos_rel: DMatrix<C64>,
    sin_rel: DMatrix<C64>,
    drive: DMatrix<C64>,
    ej5: f64,
    omega_c34: f64,
}

fn project(op: &CsrMatrix, basis: &[Vec<C64>]) -> DMatrix<C64> {
    let k = basis.len();
    let images: Vec<Vec<C64>> = basis
        .par_iter()
        .map(|v| {
            let mut w = vec![ZERO; v.len()];
            op.matvec(v, &mut w);
            w
        })
        .collect();
    let mut m = DMatrix::from_fn(k, k, |i, j| dot(&basis[i], &images[j]));
    // Hermitize away rounding.
    let adj = m.adjoint();
    m = (m + adj) * C64::new(0.5, 0.0);
    m
}

impl DressedModel {
    /// Diagonalizes `model` at Θ₀ (units of π) and keeps `k` eigenstates.
    pub fn new(model: &HamiltonianModel, theta0_over_pi: f64, k: usize) -> Result<Self> {
        let solver = SpectrumSolver::new(model).with_levels(k);
        let spectrum = solver.spectrum_at(theta0_over_pi)?;
        Ok(Self::from_spectrum(model, &spectrum))
    }

    pub fn from_spectrum(model: &HamiltonianModel, spectrum: &SpectrumResult) -> Self {
        let e_min = spectrum.energies[0];
        Self {
            theta0: spectrum.theta_over_pi * PI,
            energies: spectrum.energies.iter().map(|e| e - e_min).collect(),
            levels: spectrum.levels.clone(),
            computational: spectrum.computational,
            cos_rel: project(&model.cos_rel_part(), &spectrum.vectors),
            sin_rel: project(&model.sin_rel_part(), &spectrum.vectors),
            drive: project(&model.drive_part(), &spectrum.vectors),
            ej5: model.derived.omega_j[4],
            omega_c34: model.derived.omega_c34,
        }
    }

    /// Idle eigenstates plus eigenstates at each anchor flux,
    /// orthonormalized and re-diagonalized at Θ₀.
    pub fn build(model: &HamiltonianModel, theta0_over_pi: f64, spec: &BasisSpec) -> Result<Self> {
        let (k, k_anchor, anchors_over_pi) = (spec.idle_states, spec.anchor_states, &spec.anchors_over_pi);
        let solver = SpectrumSolver::new(model).with_levels(k);
        let spectrum = solver.spectrum_at(theta0_over_pi)?;
        if anchors_over_pi.is_empty() || k_anchor == 0 {
            return Ok(Self::from_spectrum(model, &spectrum));
        }
        let anchor_solver = SpectrumSolver::new(model).with_levels(k_anchor);
        let extra: Vec<Vec<Vec<C64>>> = anchors_over_pi
            .par_iter()
            .map(|&a| anchor_solver.eigensolve(a, None).map(|p| p.vectors))
            .collect::<Result<_>>()?;

        let mut basis: Vec<Vec<C64>> = spectrum.vectors.clone();
        for v in extra.into_iter().flatten() {
            let mut w = v;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    for (x, y) in w.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
            }
            let norm = dot(&w, &w).re.sqrt();
            if norm > 1e-6 {
                w.iter_mut().for_each(|x| *x /= norm);
                basis.push(w);
            }
        }

        let h0 = project(&model.assemble(spectrum.theta_over_pi * PI, 0.0), &basis);
        let eig = h0.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let n = spectrum.vectors[0].len();
        let rotated: Vec<Vec<C64>> = order
            .par_iter()
            .map(|&j| {
                let q = eig.eigenvectors.column(j);
                let mut v = vec![ZERO; n];
                for (b, c) in basis.iter().zip(q.iter()) {
                    for (x, y) in v.iter_mut().zip(b) {
                        *x += c * y;
                    }
                }
                crate::eigen::fix_phase(&mut v);
                v
            })
            .collect();

        // The lowest Ritz pairs reproduce the exact idle eigenpairs, so the
        // labels and computational indices carry over; check anyway.
        for (i, &c) in spectrum.computational.iter().enumerate() {
            let overlap = dot(&rotated[c], &spectrum.vectors[c]).norm();
            if overlap < 1.0 - 1e-6 {
                return Err(Error::Labeling {
                    theta_over_pi: spectrum.theta_over_pi,
                    message: format!("computational state {i} not preserved by anchored basis (overlap {overlap:.6})"),
                });
            }
        }
        let values: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let e_min = values[0];
        Ok(Self {
            theta0: spectrum.theta_over_pi * PI,
            energies: values.iter().map(|e| e - e_min).collect(),
            levels: spectrum.levels.clone(),
            computational: spectrum.computational,
            cos_rel: project(&model.cos_rel_part(), &rotated),
            sin_rel: project(&model.sin_rel_part(), &rotated),
            drive: project(&model.drive_part(), &rotated),
            ej5: model.derived.omega_j[4],
            omega_c34: model.derived.omega_c34,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// ω_{i,j}(Θ₀) relative to |00⟩ for the computational states.
    pub fn idle_frequencies(&self) -> [f64; 4] {
        let e00 = self.energies[self.computational[0]];
        self.computational.map(|i| self.energies[i] - e00)
    }

    /// Unit vector of computational state `index` (2i+j order).
    pub fn computational_state(&self, index: usize) -> DVector<C64> {
        let mut v = DVector::zeros(self.dim());
        v[self.computational[index]] = C64::new(1.0, 0.0);
        v
    }

    pub fn idle_basis(&self) -> Vec<DVector<C64>> {
        (0..4).map(|i| self.computational_state(i)).collect()
    }

    /// Weights (a, b, c) of V(t) = a C + b S + c D.
    pub fn perturbation_weights(&self, theta: f64, theta_dot: f64) -> [f64; 3] {
        [
            -self.ej5 * (theta.cos() - self.theta0.cos()),
            -self.ej5 * (theta.sin() - self.theta0.sin()),
            theta_dot / self.omega_c34,
        ]
    }

    pub fn perturbation(&self, theta: f64, theta_dot: f64) -> DMatrix<C64> {
        let mut v = DMatrix::zeros(self.dim(), self.dim());
        self.perturbation_into(theta, theta_dot, &mut v);
        v
    }

    fn perturbation_into(&self, theta: f64, theta_dot: f64, out: &mut DMatrix<C64>) {
        let [a, b, c] = self.perturbation_weights(theta, theta_dot);
        for (((o, x), y), z) in out
            .as_mut_slice()
            .iter_mut()
            .zip(self.cos_rel.as_slice())
            .zip(self.sin_rel.as_slice())
            .zip(self.drive.as_slice())
        {
            *o = x * a + y * b + z * c;
        }
    }

    /// Full K×K Hamiltonian (Schrödinger picture, energies shifted so the
    /// lowest idle level is zero).
    pub fn hamiltonian(&self, theta: f64, theta_dot: f64) -> DMatrix<C64> {
        let mut h = self.perturbation(theta, theta_dot);
        for (i, e) in self.energies.iter().enumerate() {
            h[(i, i)] += C64::new(*e, 0.0);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub control: StepControl,
}

impl PropagationOptions {
    /// Tight tolerance used for gate reports.
    pub fn acceptance() -> Self {
        Self {
            control: StepControl { tol: 1e-10, ..Default::default() },
        }
    }

    /// Looser tolerance used for scans.
    pub fn sweep() -> Self {
        Self {
            control: StepControl { tol: 1e-8, ..Default::default() },
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.control.tol = tol;
        self
    }

    /// Fixed step size; the norm-drift guard is skipped in this mode.
    pub fn fixed_step(mut self, h: f64) -> Self {
        self.control.fixed_step = Some(h);
        self
    }
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self::acceptance()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationStats {
    pub ode: OdeStats,
    /// Largest |‖ψ(T)‖ − 1| over the propagated states.
    pub max_norm_drift: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct PropagationResult {
    /// Final states at the end time, Schrödinger picture, dressed basis.
    pub finals: Vec<DVector<C64>>,
    pub stats: PropagationStats,
}

/// Right-hand side of the interaction-picture equation for a K×m block.
struct InteractionRhs<'a> {
    model: &'a DressedModel,
    pulse: &'a dyn Pulse,
    cols: usize,
    v: DMatrix<C64>,
    phase: Vec<C64>,
    z: DMatrix<C64>,
    w: DMatrix<C64>,
}

impl<'a> InteractionRhs<'a> {
    fn new(model: &'a DressedModel, pulse: &'a dyn Pulse, cols: usize) -> Self {
        let k = model.dim();
        Self {
            model,
            pulse,
            cols,
            v: DMatrix::zeros(k, k),
            phase: vec![ZERO; k],
            z: DMatrix::zeros(k, cols),
            w: DMatrix::zeros(k, cols),
        }
    }

    fn eval(&mut self, t: f64, y: &[C64], dy: &mut [C64]) {
        let k = self.model.dim();
        let (theta, theta_dot) = self.pulse.value_and_derivative(t);
        self.model.perturbation_into(theta, theta_dot, &mut self.v);
        for (p, e) in self.phase.iter_mut().zip(&self.model.energies) {
            let (s, c) = (e * t).sin_cos();
            *p = C64::new(c, -s);
        }
        for col in 0..self.cols {
            for r in 0..k {
                self.z[(r, col)] = self.phase[r] * y[col * k + r];
            }
        }
        self.w.gemm(C64::new(1.0, 0.0), &self.v, &self.z, ZERO);
        for col in 0..self.cols {
            for r in 0..k {
                // −i · conj(phase) · w
                let x = self.phase[r].conj() * self.w[(r, col)];
                dy[col * k + r] = C64::new(x.im, -x.re);
            }
        }
    }
}

fn to_interaction(model: &DressedModel, psi: &DVector<C64>, t: f64) -> Vec<C64> {
    psi.iter().zip(&model.energies).map(|(x, e)| x * C64::from_polar(1.0, e * t)).collect()
}

fn to_schrodinger(model: &DressedModel, y: &[C64], t: f64) -> DVector<C64> {
    DVector::from_iterator(y.len(), y.iter().zip(&model.energies).map(|(x, e)| x * C64::from_polar(1.0, -e * t)))
}

/// Evolves `initial` from `t0` to `t1`; `t1 < t0` integrates backwards.
pub fn propagate_span(model: &DressedModel, pulse: &dyn Pulse, initial: &[DVector<C64>], t0: f64, t1: f64, opts: &PropagationOptions) -> Result<PropagationResult> {
    let start = Instant::now();
    let k = model.dim();
    for (i, psi) in initial.iter().enumerate() {
        if psi.len() != k {
            return Err(Error::InvalidArgument(format!("initial state {i} has length {}, basis has {k}", psi.len())));
        }
    }
    let norms0: Vec<f64> = initial.iter().map(|v| v.norm()).collect();
    let mut y: Vec<C64> = initial.iter().flat_map(|psi| to_interaction(model, psi, t0)).collect();
    let mut rhs = InteractionRhs::new(model, pulse, initial.len());
    let mut stops = pulse.breakpoints();
    stops.extend([0.0, pulse.duration()]);
    let ode = integrate(|t, y, dy| rhs.eval(t, y, dy), &mut y, t0, t1, &stops, &opts.control)?;
    let finals: Vec<DVector<C64>> = y.chunks(k).map(|c| to_schrodinger(model, c, t1)).collect();
    let max_norm_drift = finals.iter().zip(&norms0).map(|(v, n0)| (v.norm() - n0).abs()).fold(0.0, f64::max);
    if max_norm_drift > NORM_TOLERANCE && opts.control.fixed_step.is_none() {
        return Err(Error::Propagation {
            time: t1,
            message: format!("norm drift {max_norm_drift:.3e} exceeds {NORM_TOLERANCE:e}"),
        });
    }
    Ok(PropagationResult {
        finals,
        stats: PropagationStats {
            ode,
            max_norm_drift,
            wall_time: start.elapsed(),
        },
    })
}

/// Evolves `initial` over the pulse window `[0, T]`.
pub fn propagate(model: &DressedModel, pulse: &dyn Pulse, initial: &[DVector<C64>], opts: &PropagationOptions) -> Result<PropagationResult> {
    for (i, psi) in initial.iter().enumerate() {
        if (psi.norm() - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("initial state {i} is not normalized (norm {})", psi.norm())));
        }
    }
    if !(opts.control.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.control.tol)));
    }
    propagate_span(model, pulse, initial, 0.0, pulse.duration(), opts)
}

/// Evolves the four idle computational eigenstates.
pub fn propagate_computational_basis(model: &DressedModel, pulse: &dyn Pulse, opts: &PropagationOptions) -> Result<PropagationResult> {
    propagate(model, pulse, &model.idle_basis(), opts)
}

/// Populations of every dressed level, sampled every `stride` ns while
/// evolving computational state `initial` (2i+j order).
pub fn trajectory_csv(model: &DressedModel, pulse: &dyn Pulse, initial: usize, stride: f64, opts: &PropagationOptions, provenance: &str) -> Result<String> {
    if initial > 3 || !(stride > 0.0) {
        return Err(Error::InvalidArgument(format!("bad trajectory request: initial {initial}, stride {stride}")));
    }
    let mut s = String::new();
    let _ = writeln!(s, "# {provenance}");
    let header: Vec<String> = std::iter::once("t_ns".to_string())
        .chain((0..model.dim()).map(|i| match model.levels.get(i) {
            Some(l) => format!("p{i}_{}", l.label.short()),
            None => format!("p{i}"),
        }))
        .collect();
    let _ = writeln!(s, "{}", header.join(","));
    let mut psi = model.computational_state(initial);
    let mut t = 0.0;
    let row = |s: &mut String, t: f64, psi: &DVector<C64>| {
        let cells: Vec<String> = psi.iter().map(|x| format!("{:.10e}", x.norm_sqr())).collect();
        let _ = writeln!(s, "{t:.6},{}", cells.join(","));
    };
    row(&mut s, t, &psi);
    let n = (pulse.duration() / stride).ceil() as usize;
    for i in 1..=n {
        let t1 = (i as f64 * stride).min(pulse.duration());
        let r = propagate_span(model, pulse, std::slice::from_ref(&psi), t, t1, opts)?;
        psi = r.finals.into_iter().next().expect("one state");
        t = t1;
        row(&mut s, t, &psi);
    }
    Ok(s)
}
