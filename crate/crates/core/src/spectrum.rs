//! Low-lying spectrum versus coupler flux: labeled eigenstates, ZZ coupling,
//! qubit detuning, effective transverse coupling and the idling point.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{angular_to_ghz, angular_to_khz, angular_to_mhz};
use crate::eigen::{lowest_eigenpairs, EigenOptions, EigenPairs};
use crate::error::{Error, Result};
use crate::operators::HamiltonianModel;
use crate::optimize::{brent_minimize, Minimum};
use crate::sparse::{dot, CsrMatrix};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Default number of eigenpairs per flux point.
pub const DEFAULT_LEVELS: usize = 20;

/// Minimum squared overlap accepted for a computational label.
pub const LABEL_THRESHOLD: f64 = 0.5;

/// Coupler eigenstates used when tagging non-computational levels.
const COUPLER_REFERENCE_STATES: usize = 8;

/// Computational labels in index order 2i+j: |00⟩, |01⟩, |10⟩, |11⟩, where
/// `i` counts excitations of qubit 1 and `j` of qubit 2.
pub const COMPUTATIONAL: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LevelLabel {
    /// Qubit excitations (q1, q2) with the coupler in its ground state.
    Computational { q1: usize, q2: usize },
    /// A qubit doubly excited, coupler in its ground state.
    QubitExcited { q1: usize, q2: usize },
    /// Coupler excited to its `coupler`-th eigenstate.
    CouplerExcited { q1: usize, q2: usize, coupler: usize },
}

impl LevelLabel {
    fn from_reference(q1: usize, q2: usize, coupler: usize) -> Self {
        if coupler > 0 {
            LevelLabel::CouplerExcited { q1, q2, coupler }
        } else if q1 <= 1 && q2 <= 1 {
            LevelLabel::Computational { q1, q2 }
        } else {
            LevelLabel::QubitExcited { q1, q2 }
        }
    }

    pub fn short(&self) -> String {
        match self {
            LevelLabel::Computational { q1, q2 } => format!("{q1}{q2}"),
            LevelLabel::QubitExcited { q1, q2 } => format!("{q1}{q2}"),
            LevelLabel::CouplerExcited { q1, q2, coupler } => format!("{q1}{q2}c{coupler}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub label: LevelLabel,
    /// Eigenfrequency relative to the ground state, rad/ns.
    pub omega: f64,
    /// Squared overlap with the reference product state of `label`.
    pub overlap: f64,
}

/// Labeled eigenpairs at one flux point.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub theta_over_pi: f64,
    pub cutoff: usize,
    pub levels: Vec<Level>,
    /// Absolute eigenvalues (rad/ns), ascending.
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    /// Eigen index holding each computational label, in 2i+j order.
    pub computational: [usize; 4],
    pub computational_overlaps: [f64; 4],
    /// ζ_ZZ = ω₁₁ − ω₁₀ − ω₀₁, rad/ns.
    pub zz: f64,
    /// Δ = ω₀₁ − ω₁₀, rad/ns.
    pub delta: f64,
}

impl SpectrumResult {
    /// ω_{i,j} relative to ground for computational index 2i+j.
    pub fn computational_omega(&self, index: usize) -> f64 {
        self.energies[self.computational[index]] - self.energies[self.computational[0]]
    }

    pub fn computational_vector(&self, index: usize) -> &[C64] {
        &self.vectors[self.computational[index]]
    }

    fn from_assignment(
        theta_over_pi: f64,
        cutoff: usize,
        pairs: EigenPairs,
        computational: [usize; 4],
        computational_overlaps: [f64; 4],
        levels: Vec<Level>,
    ) -> Self {
        let e = |i: usize| pairs.values[computational[i]];
        let zz = e(3) - e(2) - e(1) + e(0);
        let delta = e(1) - e(2);
        Self {
            theta_over_pi,
            cutoff,
            levels,
            energies: pairs.values,
            vectors: pairs.vectors,
            computational,
            computational_overlaps,
            zz,
            delta,
        }
    }
}

/// Bare reference states: qubit-1 and qubit-2 transmon eigenstates times the
/// eigenstates of the coupler pair (transmons 3 and 4 with the loop junction)
/// at the same flux.
pub struct ReferenceBasis {
    dims: [usize; 4],
    qubit1: DMatrix<C64>,
    qubit2: DMatrix<C64>,
    /// Coupler-pair eigenstates as columns over the (3, 4) local space.
    coupler: DMatrix<C64>,
    pub coupler_energies: Vec<f64>,
}

impl ReferenceBasis {
    pub fn new(model: &HamiltonianModel, theta: f64) -> Self {
        let ops = &model.ops;
        let d = &model.derived;
        let (l3, l4) = (&ops.local[2].ops, &ops.local[3].ops);
        let (d3, d4) = (ops.dims[2], ops.dims[3]);
        let i3 = DMatrix::<C64>::identity(d3, d3);
        let i4 = DMatrix::<C64>::identity(d4, d4);
        let re = |x: f64| C64::new(x, 0.0);
        let w = &d.w;
        let ej5 = d.omega_j[4];
        let h = l3.n2.kronecker(&i4) * re(4.0 * w[(2, 2)])
            + i3.kronecker(&l4.n2) * re(4.0 * w[(3, 3)])
            + l3.n.kronecker(&l4.n) * re(8.0 * w[(2, 3)])
            - l3.cos.kronecker(&i4) * re(d.omega_j[2])
            - i3.kronecker(&l4.cos) * re(d.omega_j[3])
            - (l3.cos.kronecker(&l4.cos) + l3.sin.kronecker(&l4.sin)) * re(ej5 * theta.cos())
            - (l3.cos.kronecker(&l4.sin) - l3.sin.kronecker(&l4.cos)) * re(ej5 * theta.sin());
        let keep = COUPLER_REFERENCE_STATES.min(d3 * d4);
        let pairs = crate::eigen::dense_lowest(&h, keep);
        let coupler = DMatrix::from_fn(d3 * d4, keep, |r, c| pairs.vectors[c][r]);
        Self {
            dims: ops.dims,
            qubit1: ops.local[0].bare_states.clone(),
            qubit2: ops.local[1].bare_states.clone(),
            coupler,
            coupler_energies: pairs.values,
        }
    }

    pub fn qubit_levels(&self) -> usize {
        self.qubit1.ncols().min(self.qubit2.ncols())
    }

    /// |q1⟩ ⊗ |q2⟩ ⊗ |coupler⟩ as a full-space vector.
    pub fn state(&self, q1: usize, q2: usize, coupler: usize) -> Option<Vec<C64>> {
        if q1 >= self.qubit1.ncols() || q2 >= self.qubit2.ncols() || coupler >= self.coupler.ncols() {
            return None;
        }
        let dc = self.dims[2] * self.dims[3];
        let mut out = vec![ZERO; self.dims[0] * self.dims[1] * dc];
        for a in 0..self.dims[0] {
            let x = self.qubit1[(a, q1)];
            if x == ZERO {
                continue;
            }
            for b in 0..self.dims[1] {
                let xy = x * self.qubit2[(b, q2)];
                if xy == ZERO {
                    continue;
                }
                let base = (a * self.dims[1] + b) * dc;
                for c in 0..dc {
                    out[base + c] = xy * self.coupler[(c, coupler)];
                }
            }
        }
        Some(out)
    }

    /// Squared overlaps `|⟨q1 q2 c|v⟩|²` for q1, q2 < `qubit_levels`, all coupler states.
    fn overlaps(&self, v: &[C64], qubit_levels: usize) -> Vec<(usize, usize, usize, f64)> {
        let dc = self.dims[2] * self.dims[3];
        let mut out = Vec::new();
        for q1 in 0..qubit_levels {
            for q2 in 0..qubit_levels {
                let mut partial = vec![ZERO; dc];
                for a in 0..self.dims[0] {
                    let x = self.qubit1[(a, q1)].conj();
                    if x == ZERO {
                        continue;
                    }
                    for b in 0..self.dims[1] {
                        let xy = x * self.qubit2[(b, q2)].conj();
                        if xy == ZERO {
                            continue;
                        }
                        let base = (a * self.dims[1] + b) * dc;
                        for (p, vi) in partial.iter_mut().zip(&v[base..base + dc]) {
                            *p += xy * vi;
                        }
                    }
                }
                for c in 0..self.coupler.ncols() {
                    let amp: C64 = self.coupler.column(c).iter().zip(&partial).map(|(r, p)| r.conj() * p).sum();
                    out.push((q1, q2, c, amp.norm_sqr()));
                }
            }
        }
        out
    }
}

/// One label assignment produced by [`label_states`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    /// Index into the eigenpair list.
    pub index: usize,
    pub overlap: f64,
}

/// Assigns each reference state to the eigenstate of maximal squared overlap.
///
/// Overlaps equal within 1e-12 are resolved towards the lower eigenvalue.
/// Fails when a winning overlap is below [`LABEL_THRESHOLD`] or when two
/// references claim the same eigenstate.
pub fn label_states(values: &[f64], vectors: &[Vec<C64>], references: &[Vec<C64>], theta_over_pi: f64) -> Result<Vec<Assignment>> {
    let mut out: Vec<Assignment> = Vec::with_capacity(references.len());
    for (r, reference) in references.iter().enumerate() {
        let mut best: Option<Assignment> = None;
        for (i, v) in vectors.iter().enumerate() {
            let overlap = dot(reference, v).norm_sqr();
            best = match best {
                None => Some(Assignment { index: i, overlap }),
                Some(b) => {
                    if overlap > b.overlap + 1e-12 || ((overlap - b.overlap).abs() <= 1e-12 && values[i] < values[b.index]) {
                        Some(Assignment { index: i, overlap })
                    } else {
                        Some(b)
                    }
                }
            };
        }
        let best = best.ok_or_else(|| Error::Labeling {
            theta_over_pi,
            message: "no eigenstates to label".into(),
        })?;
        if best.overlap < LABEL_THRESHOLD {
            return Err(Error::Labeling {
                theta_over_pi,
                message: format!("reference {r} has maximal overlap {:.3} < {LABEL_THRESHOLD}", best.overlap),
            });
        }
        if let Some(prev) = out.iter().position(|a| a.index == best.index) {
            return Err(Error::Labeling {
                theta_over_pi,
                message: format!("references {prev} and {r} both map to eigenstate {}", best.index),
            });
        }
        out.push(best);
    }
    Ok(out)
}

/// Spectrum calculator bound to one Hamiltonian model.
pub struct SpectrumSolver<'a> {
    pub model: &'a HamiltonianModel,
    pub k: usize,
    pub eigen: EigenOptions,
}

impl<'a> SpectrumSolver<'a> {
    pub fn new(model: &'a HamiltonianModel) -> Self {
        Self {
            model,
            k: DEFAULT_LEVELS.min(model.dim()),
            eigen: EigenOptions::default(),
        }
    }

    pub fn with_levels(mut self, k: usize) -> Self {
        self.k = k.min(self.model.dim());
        self
    }

    pub fn hamiltonian(&self, theta_over_pi: f64) -> CsrMatrix {
        self.model.assemble(theta_over_pi * PI, 0.0)
    }

    pub fn eigensolve(&self, theta_over_pi: f64, start: Option<Vec<C64>>) -> Result<EigenPairs> {
        let mut opts = self.eigen.clone();
        opts.start = start;
        lowest_eigenpairs(&self.hamiltonian(theta_over_pi), self.k, &opts)
    }

    /// Tags every eigenstate with its dominant reference product.
    fn tag_levels(&self, theta_over_pi: f64, pairs: &EigenPairs, refs: &ReferenceBasis) -> Result<Vec<Level>> {
        if refs.qubit_levels() < 3 {
            return Err(Error::Labeling {
                theta_over_pi,
                message: format!(
                    "basis keeps {} levels per transmon; tagging qubit and coupler excitations needs at least 3",
                    refs.qubit_levels()
                ),
            });
        }
        let e0 = pairs.values[0];
        pairs
            .vectors
            .par_iter()
            .zip(pairs.values.par_iter())
            .map(|(v, &e)| {
                let (q1, q2, c, overlap) = refs
                    .overlaps(v, 3)
                    .into_iter()
                    .fold((0, 0, 0, -1.0), |best, cand| if cand.3 > best.3 { cand } else { best });
                Ok(Level {
                    label: LevelLabel::from_reference(q1, q2, c),
                    omega: e - e0,
                    overlap,
                })
            })
            .collect()
    }

    fn finish(&self, theta_over_pi: f64, pairs: EigenPairs, assignment: &[Assignment], refs: &ReferenceBasis) -> Result<SpectrumResult> {
        let mut levels = self.tag_levels(theta_over_pi, &pairs, refs)?;
        let mut comp = [0usize; 4];
        let mut overlaps = [0.0; 4];
        for (c, a) in assignment.iter().enumerate() {
            comp[c] = a.index;
            overlaps[c] = a.overlap;
            let (q1, q2) = COMPUTATIONAL[c];
            levels[a.index].label = LevelLabel::Computational { q1, q2 };
            levels[a.index].overlap = a.overlap;
        }
        // The ground reference is the zero of frequency.
        let e00 = pairs.values[comp[0]];
        for (lvl, e) in levels.iter_mut().zip(&pairs.values) {
            lvl.omega = e - e00;
        }
        Ok(SpectrumResult::from_assignment(theta_over_pi, self.model.ops.cutoff, pairs, comp, overlaps, levels))
    }

    /// Eigenpairs at one flux point, labeled against bare product states.
    pub fn spectrum_at(&self, theta_over_pi: f64) -> Result<SpectrumResult> {
        self.spectrum_at_with_start(theta_over_pi, None)
    }

    fn spectrum_at_with_start(&self, theta_over_pi: f64, start: Option<Vec<C64>>) -> Result<SpectrumResult> {
        let pairs = self.eigensolve(theta_over_pi, start)?;
        let refs = ReferenceBasis::new(self.model, theta_over_pi * PI);
        let references: Vec<Vec<C64>> = COMPUTATIONAL
            .iter()
            .map(|&(q1, q2)| refs.state(q1, q2, 0).expect("computational levels present"))
            .collect();
        let assignment = label_states(&pairs.values, &pairs.vectors, &references, theta_over_pi)?;
        self.finish(theta_over_pi, pairs, &assignment, &refs)
    }

    /// ζ_ZZ at one flux point (rad/ns).
    pub fn zz(&self, theta_over_pi: f64) -> Result<f64> {
        Ok(self.spectrum_at(theta_over_pi)?.zz)
    }

    /// Spectra over a flux grid. The first point is labeled against product
    /// states; later points follow each computational label to the
    /// eigenstate of maximal overlap with its predecessor.
    pub fn sweep(&self, grid_over_pi: &[f64]) -> Result<Vec<SpectrumResult>> {
        let mut out: Vec<SpectrumResult> = Vec::with_capacity(grid_over_pi.len());
        let chunk = rayon::current_num_threads().max(1);
        for block in grid_over_pi.chunks(chunk) {
            let solved: Vec<Result<EigenPairs>> = block.par_iter().map(|&t| self.eigensolve(t, None)).collect();
            for (&theta, pairs) in block.iter().zip(solved) {
                let pairs = pairs?;
                let refs = ReferenceBasis::new(self.model, theta * PI);
                let assignment = match out.last() {
                    None => {
                        let references: Vec<Vec<C64>> = COMPUTATIONAL
                            .iter()
                            .map(|&(q1, q2)| refs.state(q1, q2, 0).expect("computational levels present"))
                            .collect();
                        label_states(&pairs.values, &pairs.vectors, &references, theta)?
                    }
                    Some(prev) => {
                        let references: Vec<Vec<C64>> = (0..4).map(|c| prev.computational_vector(c).to_vec()).collect();
                        label_states(&pairs.values, &pairs.vectors, &references, theta)?
                    }
                };
                out.push(self.finish(theta, pairs, &assignment, &refs)?);
            }
        }
        Ok(out)
    }

    /// Θ₀ (units of π) minimizing |ζ_ZZ| inside `bracket`.
    pub fn find_idle_point(&self, bracket: (f64, f64)) -> Result<IdlePoint> {
        let (lo, hi) = bracket;
        let tol = 1e-5;
        let objective = |t: f64| self.zz(t).map(f64::abs);
        let Minimum { x, value, evaluations } = brent_minimize(objective, lo, hi, tol)?;
        if x - lo <= 2.0 * tol || hi - x <= 2.0 * tol {
            return Err(Error::NoInteriorExtremum {
                quantity: "|zeta_zz|",
                lo,
                hi,
            });
        }
        let spectrum = self.spectrum_at(x)?;
        log::debug!("idle point {x:.6} pi, |zz| = {:.4} kHz after {evaluations} evaluations", angular_to_khz(value));
        Ok(IdlePoint {
            theta_over_pi: x,
            zz: spectrum.zz,
            spectrum,
        })
    }

    /// Θ (units of π) maximizing |ζ_ZZ| inside `bracket`, used as the
    /// plateau of the CPHASE pulse.
    pub fn peak_from_zz_max(&self, bracket: (f64, f64), grid_points: usize) -> Result<(f64, f64)> {
        let (lo, hi) = bracket;
        let n = grid_points.max(5);
        let grid: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let sweep = self.sweep(&grid)?;
        let values: Vec<f64> = sweep.iter().map(|s| s.zz.abs()).collect();
        locate_interior_max(&grid, &values, |t| self.zz(t).map(f64::abs))
            .ok_or(Error::NoInteriorExtremum {
                quantity: "|zeta_zz|",
                lo,
                hi,
            })?
    }
}

/// Refines the largest interior sample of `values` with a bracketed search.
/// Returns `None` when the largest sample sits on the grid boundary.
pub fn locate_interior_max<F>(grid: &[f64], values: &[f64], mut f: F) -> Option<Result<(f64, f64)>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (imax, _) = values.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    if imax == 0 || imax + 1 == values.len() {
        return None;
    }
    let (a, b) = (grid[imax - 1], grid[imax + 1]);
    Some(brent_minimize(|t| f(t).map(|v| -v), a, b, 1e-6).map(|m| (m.x, -m.value)))
}

#[derive(Debug, Clone)]
pub struct IdlePoint {
    pub theta_over_pi: f64,
    /// ζ_ZZ(Θ₀), rad/ns.
    pub zz: f64,
    pub spectrum: SpectrumResult,
}

impl IdlePoint {
    /// Δ(Θ₀), rad/ns.
    pub fn delta(&self) -> f64 {
        self.spectrum.delta
    }

    /// ω_{i,j}(Θ₀) for the four computational states, 2i+j order.
    pub fn computational_omegas(&self) -> [f64; 4] {
        [0, 1, 2, 3].map(|i| self.spectrum.computational_omega(i))
    }
}

/// g(Θ) = ⟨01(Θ₀)|H(Θ, 0)|10(Θ₀)⟩ in rad/ns.
pub fn effective_coupling(model: &HamiltonianModel, theta_over_pi: f64, idle: &SpectrumResult) -> C64 {
    let h = model.assemble(theta_over_pi * PI, 0.0);
    let ket = idle.computational_vector(2);
    let mut hv = vec![ZERO; ket.len()];
    h.matvec(ket, &mut hv);
    dot(idle.computational_vector(1), &hv)
}

/// Uniform grid of `points` values over [lo, hi].
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Search window for the idle point (units of π).
pub const IDLE_BRACKET: (f64, f64) = (0.55, 0.75);

/// Upper end of the window searched for the |ζ_ZZ| peak (units of π).
pub const PEAK_UPPER: f64 = 1.0;

/// Grid resolution of the peak search (units of π).
pub const PEAK_GRID_STEP: f64 = 0.005;

/// Peak search window starting at the idle point.
pub fn peak_bracket(theta0_over_pi: f64) -> ((f64, f64), usize) {
    let points = ((PEAK_UPPER - theta0_over_pi) / PEAK_GRID_STEP).ceil() as usize + 1;
    ((theta0_over_pi, PEAK_UPPER), points)
}

/// Default sweep window and resolution, in units of π.
pub fn default_sweep_grid() -> Vec<f64> {
    uniform_grid(0.3, 0.9, 121)
}

/// One row of [`cutoff_convergence`].
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub cutoff: usize,
    pub value: f64,
    /// |value − previous| / |previous|; `None` for the first row.
    pub relative_change: Option<f64>,
}

/// Tabulates `quantity(model)` for a list of charge cutoffs.
pub fn cutoff_convergence<F>(cutoffs: &[usize], mut build: impl FnMut(usize) -> Result<HamiltonianModel>, mut quantity: F) -> Result<Vec<ConvergenceRow>>
where
    F: FnMut(&HamiltonianModel) -> Result<f64>,
{
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(cutoffs.len());
    for &n in cutoffs {
        let model = build(n)?;
        let value = quantity(&model)?;
        let relative_change = rows.last().map(|p| ((value - p.value) / p.value).abs());
        log::info!("cutoff {n}: {value:.12e} (relative change {relative_change:?})");
        rows.push(ConvergenceRow {
            cutoff: n,
            value,
            relative_change,
        });
    }
    Ok(rows)
}

/// Which columns a sweep CSV carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepColumns {
    Spectrum,
    Zz,
    Coupling,
}

/// Renders a sweep as CSV. `idle` enables the |g| column.
pub fn sweep_csv(sweep: &[SpectrumResult], model: &HamiltonianModel, idle: Option<&SpectrumResult>, what: SweepColumns, provenance: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {provenance}");
    let k = sweep.iter().map(|r| r.levels.len()).min().unwrap_or(0);
    let mut header = vec!["theta_over_pi".to_string()];
    for (q1, q2) in COMPUTATIONAL.iter().skip(1) {
        header.push(format!("omega_{q1}{q2}_GHz"));
    }
    if what == SweepColumns::Spectrum {
        for i in 0..k {
            header.push(format!("level{i}_GHz"));
        }
    }
    header.push("zeta_zz_kHz".into());
    if idle.is_some() {
        header.push("abs_g_MHz".into());
    }
    header.push("delta_MHz".into());
    let _ = writeln!(s, "{}", header.join(","));
    for r in sweep {
        let mut row = vec![format!("{:.6}", r.theta_over_pi)];
        for c in 1..4 {
            row.push(format!("{:.9}", angular_to_ghz(r.computational_omega(c))));
        }
        if what == SweepColumns::Spectrum {
            for lvl in r.levels.iter().take(k) {
                row.push(format!("{:.9}", angular_to_ghz(lvl.omega)));
            }
        }
        row.push(format!("{:.6}", angular_to_khz(r.zz)));
        if let Some(idle) = idle {
            row.push(format!("{:.9}", angular_to_mhz(effective_coupling(model, r.theta_over_pi, idle).norm())));
        }
        row.push(format!("{:.6}", angular_to_mhz(r.delta)));
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceParams;

    fn small_model() -> HamiltonianModel {
        HamiltonianModel::truncated(&DeviceParams::paper_defaults().with_cutoff(6), 4).unwrap()
    }

    #[test]
    fn tie_break_prefers_lower_energy() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let vectors = vec![vec![C64::new(s, 0.0), C64::new(s, 0.0)], vec![C64::new(s, 0.0), C64::new(-s, 0.0)]];
        let reference = vec![vec![C64::new(1.0, 0.0), ZERO]];
        let a = label_states(&[1.0, 0.5], &vectors, &reference, 0.0).unwrap();
        assert_eq!(a[0].index, 1);
        let a = label_states(&[0.5, 1.0], &vectors, &reference, 0.0).unwrap();
        assert_eq!(a[0].index, 0);
    }

    #[test]
    fn weak_overlap_is_an_error() {
        let vectors = vec![vec![C64::new(0.6, 0.0), C64::new(0.8, 0.0)]];
        let reference = vec![vec![C64::new(1.0, 0.0), ZERO]];
        assert!(matches!(label_states(&[0.0], &vectors, &reference, 0.3), Err(Error::Labeling { .. })));
    }

    #[test]
    fn non_injective_labeling_is_an_error() {
        let vectors = vec![vec![C64::new(1.0, 0.0), ZERO, ZERO], vec![ZERO, C64::new(1.0, 0.0), ZERO]];
        let r = vec![C64::new(0.95f64.sqrt(), 0.0), ZERO, C64::new(0.05f64.sqrt(), 0.0)];
        let refs = vec![r.clone(), r];
        assert!(label_states(&[0.0, 1.0], &vectors, &refs, 0.0).is_err());
    }

    #[test]
    fn labeling_is_stable_under_permutation() {
        let model = small_model();
        let solver = SpectrumSolver::new(&model).with_levels(12);
        let pairs = solver.eigensolve(0.65, None).unwrap();
        let refs = ReferenceBasis::new(&model, 0.65 * PI);
        let references: Vec<Vec<C64>> = COMPUTATIONAL.iter().map(|&(a, b)| refs.state(a, b, 0).unwrap()).collect();
        let a = label_states(&pairs.values, &pairs.vectors, &references, 0.65).unwrap();
        let perm: Vec<usize> = (0..pairs.values.len()).rev().collect();
        let values: Vec<f64> = perm.iter().map(|&i| pairs.values[i]).collect();
        let vectors: Vec<Vec<C64>> = perm.iter().map(|&i| pairs.vectors[i].clone()).collect();
        let b = label_states(&values, &vectors, &references, 0.65).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(pairs.values[x.index], values[y.index]);
        }
    }

    #[test]
    fn single_point_sweep_equals_direct_solve() {
        let model = small_model();
        let solver = SpectrumSolver::new(&model).with_levels(12);
        let sweep = solver.sweep(&[0.6]).unwrap();
        let direct = solver.spectrum_at(0.6).unwrap();
        assert_eq!(sweep.len(), 1);
        assert_eq!(sweep[0].zz, direct.zz);
        assert_eq!(sweep[0].delta, direct.delta);
    }

    #[test]
    fn two_level_basis_cannot_tag_excitations() {
        let model = HamiltonianModel::truncated(&DeviceParams::paper_defaults().with_cutoff(4), 2).unwrap();
        let solver = SpectrumSolver::new(&model).with_levels(8);
        assert!(matches!(solver.spectrum_at(0.65), Err(Error::Labeling { .. })));
    }

    #[test]
    fn interior_max_of_parabola() {
        let f = |t: f64| 3.0 - (t - 0.37).powi(2);
        let grid = uniform_grid(0.0, 1.0, 11);
        let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
        let (x, v) = locate_interior_max(&grid, &values, |t| Ok(f(t))).unwrap().unwrap();
        assert!((x - 0.37).abs() < 1e-5);
        assert!((v - 3.0).abs() < 1e-10);
        let mono: Vec<f64> = grid.iter().copied().collect();
        assert!(locate_interior_max(&grid, &mono, Ok).is_none());
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(uniform_grid(0.2, 0.4, 1), vec![0.2]);
        assert_eq!(default_sweep_grid().len(), 121);
        let g = uniform_grid(0.0, 1.0, 5);
        assert_eq!(g[4], 1.0);
    }

    #[test]
    fn convergence_table_shapes() {
        let rows = cutoff_convergence(&[3], |n| HamiltonianModel::truncated(&DeviceParams::paper_defaults().with_cutoff(n), 3), |_| Ok(1.0)).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].relative_change.is_none());
    }
}
