//! Charge-basis transmon operators and the four-transmon Hamiltonian
//!
//! ```text
//! H(Θ, Θ̇) = 4 n̂ᵀ W n̂ − Σ_{i≤4} ω_Ji cos φ̂_i − ω_J5 cos(φ̂_4 − φ̂_3 − Θ)
//!           + (Θ̇ / ω_C34) (0, 0, −1, 1) W n̂
//! ```
//!
//! in units of ħ (angular frequency, rad/ns). Each transmon lives in a local
//! basis: either the truncated charge basis `n ∈ [−N, N]` or the lowest `m`
//! eigenstates of its bare Hamiltonian `4 W_ii n̂² − ω_Ji cos φ̂`. The full
//! operator is assembled from Kronecker products of local factors, transmon 1
//! being the most significant index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::device::{DerivedParams, DeviceParams, NUM_TRANSMONS};
use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, LinearOperator};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Cooper-pair number operator diag(−N, …, N).
pub fn charge_operator(cutoff: usize) -> DMatrix<f64> {
    let d = 2 * cutoff + 1;
    DMatrix::from_fn(d, d, |i, j| if i == j { i as f64 - cutoff as f64 } else { 0.0 })
}

/// Lowering shift `S|n⟩ = |n−1⟩`, the charge-basis representation of e^{iφ̂}.
pub fn shift_operator(cutoff: usize) -> DMatrix<f64> {
    let d = 2 * cutoff + 1;
    DMatrix::from_fn(d, d, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// `(cos φ̂, sin φ̂) = ((S + S†)/2, (S − S†)/2i)`.
pub fn cos_sin_operators(cutoff: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let s = shift_operator(cutoff).map(|x| C64::new(x, 0.0));
    let sd = s.adjoint();
    let cos = (&s + &sd) * C64::new(0.5, 0.0);
    let sin = (&s - &sd) * C64::new(0.0, -0.5);
    (cos, sin)
}

/// Single-transmon operators expressed in one local basis.
#[derive(Debug, Clone)]
pub struct LocalOperators {
    pub n: DMatrix<C64>,
    /// n̂², kept separately because projection does not commute with squaring.
    pub n2: DMatrix<C64>,
    pub cos: DMatrix<C64>,
    pub sin: DMatrix<C64>,
}

impl LocalOperators {
    pub fn charge_basis(cutoff: usize) -> Self {
        let n = charge_operator(cutoff);
        let n2 = &n * &n;
        let (cos, sin) = cos_sin_operators(cutoff);
        Self {
            n: real_to_complex(&n),
            n2: real_to_complex(&n2),
            cos,
            sin,
        }
    }

    pub fn dim(&self) -> usize {
        self.n.nrows()
    }

    /// `Pᵀ A P` for each operator; `basis` columns are the kept states.
    fn project(&self, basis: &DMatrix<f64>) -> Self {
        let p = real_to_complex(basis);
        let pt = p.adjoint();
        let proj = |a: &DMatrix<C64>| &pt * a * &p;
        Self {
            n: proj(&self.n),
            n2: proj(&self.n2),
            cos: proj(&self.cos),
            sin: proj(&self.sin),
        }
    }
}

fn real_to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Eigen-decomposition of one bare transmon `4 W_ii n̂² − ω_J cos φ̂` in the
/// charge basis: energies ascending, eigenvectors as columns with their
/// largest-magnitude component made positive.
pub fn bare_transmon(cutoff: usize, w_ii: f64, omega_j: f64) -> (Vec<f64>, DMatrix<f64>) {
    let n = charge_operator(cutoff);
    let d = n.nrows();
    let h = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            4.0 * w_ii * n[(i, i)].powi(2)
        } else if i.abs_diff(j) == 1 {
            -0.5 * omega_j
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(d, d);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).clone_owned();
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        vecs.set_column(col, &v);
    }
    (energies, vecs)
}

/// Local operators plus the bare eigenstates of one transmon.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub ops: LocalOperators,
    /// Bare transmon eigenstates expressed in this local basis, as columns.
    pub bare_states: DMatrix<C64>,
    pub bare_energies: Vec<f64>,
}

/// Per-transmon operators and the tensor-product machinery that embeds them
/// in the four-transmon space.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub cutoff: usize,
    /// Kept levels per transmon when truncated to bare eigenstates.
    pub truncation: Option<usize>,
    pub local: Vec<LocalBasis>,
    pub dims: [usize; 4],
}

impl OperatorSet {
    /// All four transmons in the full charge basis, dimension (2N+1)⁴.
    pub fn charge_basis(params: &DeviceParams, derived: &DerivedParams) -> Self {
        let cutoff = params.charge_cutoff;
        let local = (0..NUM_TRANSMONS)
            .map(|i| {
                let (energies, vecs) = bare_transmon(cutoff, derived.w[(i, i)], derived.omega_j[i]);
                LocalBasis {
                    ops: LocalOperators::charge_basis(cutoff),
                    bare_states: real_to_complex(&vecs),
                    bare_energies: energies,
                }
            })
            .collect();
        let d = 2 * cutoff + 1;
        Self {
            cutoff,
            truncation: None,
            local,
            dims: [d; 4],
        }
    }

    /// Each transmon projected onto its `levels` lowest bare eigenstates.
    pub fn truncated(params: &DeviceParams, derived: &DerivedParams, levels: usize) -> Result<Self> {
        let cutoff = params.charge_cutoff;
        let d = 2 * cutoff + 1;
        if levels == 0 || levels > d {
            return Err(Error::InvalidArgument(format!(
                "per-transmon levels must be in 1..={d} for cutoff {cutoff}, got {levels}"
            )));
        }
        let charge_ops = LocalOperators::charge_basis(cutoff);
        let local = (0..NUM_TRANSMONS)
            .map(|i| {
                let (energies, vecs) = bare_transmon(cutoff, derived.w[(i, i)], derived.omega_j[i]);
                let kept = vecs.columns(0, levels).clone_owned();
                LocalBasis {
                    ops: charge_ops.project(&kept),
                    bare_states: DMatrix::identity(levels, levels),
                    bare_energies: energies[..levels].to_vec(),
                }
            })
            .collect();
        Ok(Self {
            cutoff,
            truncation: Some(levels),
            local,
            dims: [levels; 4],
        })
    }

    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    /// Flat index of a local-index tuple.
    pub fn flat_index(&self, idx: [usize; 4]) -> usize {
        ((idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]) * self.dims[3] + idx[3]
    }

    /// Number of bare levels available for a transmon.
    pub fn bare_levels(&self, transmon: usize) -> usize {
        self.local[transmon].bare_states.ncols()
    }

    /// Triplets of `coef · A₁ ⊗ A₂ ⊗ A₃ ⊗ A₄`; `None` factors are identities.
    pub fn kron_triplets(&self, coef: C64, factors: [Option<&DMatrix<C64>>; 4]) -> Vec<(usize, usize, C64)> {
        let lists: Vec<Vec<(usize, usize, C64)>> = factors
            .iter()
            .zip(self.dims)
            .map(|(f, d)| match f {
                None => (0..d).map(|k| (k, k, C64::new(1.0, 0.0))).collect(),
                Some(m) => {
                    let mut out = Vec::new();
                    for r in 0..m.nrows() {
                        for c in 0..m.ncols() {
                            let v = m[(r, c)];
                            if v != ZERO {
                                out.push((r, c, v));
                            }
                        }
                    }
                    out
                }
            })
            .collect();
        let mut out = Vec::with_capacity(lists.iter().map(Vec::len).product());
        for &(r0, c0, v0) in &lists[0] {
            for &(r1, c1, v1) in &lists[1] {
                let v01 = coef * v0 * v1;
                for &(r2, c2, v2) in &lists[2] {
                    let v012 = v01 * v2;
                    for &(r3, c3, v3) in &lists[3] {
                        let row = self.flat_index([r0, r1, r2, r3]);
                        let col = self.flat_index([c0, c1, c2, c3]);
                        out.push((row, col, v012 * v3));
                    }
                }
            }
        }
        out
    }

    fn embed(&self, factors: [Option<&DMatrix<C64>>; 4]) -> CsrMatrix {
        let n = self.dim();
        CsrMatrix::from_triplets(n, n, self.kron_triplets(C64::new(1.0, 0.0), factors))
    }

    fn single(&self, i: usize, op: &DMatrix<C64>) -> CsrMatrix {
        let mut f: [Option<&DMatrix<C64>>; 4] = [None; 4];
        f[i] = Some(op);
        self.embed(f)
    }

    /// n̂_i embedded in the full space.
    pub fn n_op(&self, i: usize) -> CsrMatrix {
        self.single(i, &self.local[i].ops.n)
    }

    pub fn cos_op(&self, i: usize) -> CsrMatrix {
        self.single(i, &self.local[i].ops.cos)
    }

    pub fn sin_op(&self, i: usize) -> CsrMatrix {
        self.single(i, &self.local[i].ops.sin)
    }

    /// Triplets of cos(φ̂₄ − φ̂₃) = cos φ̂₄ cos φ̂₃ + sin φ̂₄ sin φ̂₃.
    fn cos_rel_triplets(&self) -> Vec<(usize, usize, C64)> {
        let (l3, l4) = (&self.local[2].ops, &self.local[3].ops);
        let one = C64::new(1.0, 0.0);
        let mut t = self.kron_triplets(one, [None, None, Some(&l3.cos), Some(&l4.cos)]);
        t.extend(self.kron_triplets(one, [None, None, Some(&l3.sin), Some(&l4.sin)]));
        t
    }

    /// Triplets of sin(φ̂₄ − φ̂₃) = sin φ̂₄ cos φ̂₃ − cos φ̂₄ sin φ̂₃.
    fn sin_rel_triplets(&self) -> Vec<(usize, usize, C64)> {
        let (l3, l4) = (&self.local[2].ops, &self.local[3].ops);
        let one = C64::new(1.0, 0.0);
        let mut t = self.kron_triplets(one, [None, None, Some(&l3.cos), Some(&l4.sin)]);
        t.extend(self.kron_triplets(-one, [None, None, Some(&l3.sin), Some(&l4.cos)]));
        t
    }

    pub fn cos_rel(&self) -> CsrMatrix {
        let n = self.dim();
        CsrMatrix::from_triplets(n, n, self.cos_rel_triplets())
    }

    pub fn sin_rel(&self) -> CsrMatrix {
        let n = self.dim();
        CsrMatrix::from_triplets(n, n, self.sin_rel_triplets())
    }

    /// Bare product state |a₁ a₂ a₃ a₄⟩ of transmon eigenstates, or `None` when
    /// a requested level lies outside the local basis.
    pub fn product_state(&self, levels: [usize; 4]) -> Option<Vec<C64>> {
        for (i, &a) in levels.iter().enumerate() {
            if a >= self.bare_levels(i) {
                return None;
            }
        }
        let cols: Vec<DVector<C64>> = (0..4).map(|i| self.local[i].bare_states.column(levels[i]).clone_owned()).collect();
        let mut out = vec![ZERO; self.dim()];
        for i0 in 0..self.dims[0] {
            let v0 = cols[0][i0];
            if v0 == ZERO {
                continue;
            }
            for i1 in 0..self.dims[1] {
                let v01 = v0 * cols[1][i1];
                if v01 == ZERO {
                    continue;
                }
                for i2 in 0..self.dims[2] {
                    let v012 = v01 * cols[2][i2];
                    if v012 == ZERO {
                        continue;
                    }
                    for i3 in 0..self.dims[3] {
                        out[self.flat_index([i0, i1, i2, i3])] = v012 * cols[3][i3];
                    }
                }
            }
        }
        Some(out)
    }

    /// Sum of bare transmon energies of a product state.
    pub fn product_energy(&self, levels: [usize; 4]) -> f64 {
        (0..4).map(|i| self.local[i].bare_energies[levels[i]]).sum()
    }
}

/// The flux-parametrized Hamiltonian. All four parts share one sparsity
/// pattern so that assembling `H(Θ, Θ̇)` is a single pass over the values.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    pub ops: OperatorSet,
    pub derived: DerivedParams,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    /// Kinetic energy and the four single-junction potentials.
    static_vals: Vec<C64>,
    /// cos(φ̂₄ − φ̂₃).
    cos_rel_vals: Vec<C64>,
    /// sin(φ̂₄ − φ̂₃).
    sin_rel_vals: Vec<C64>,
    /// (0, 0, −1, 1) W n̂.
    drive_vals: Vec<C64>,
}

impl HamiltonianModel {
    pub fn new(ops: OperatorSet, derived: DerivedParams) -> Self {
        let w = &derived.w;
        let re = |x: f64| C64::new(x, 0.0);
        let mut tagged: Vec<(usize, usize, u8, C64)> = Vec::new();
        let mut push = |tag: u8, trips: Vec<(usize, usize, C64)>| {
            tagged.extend(trips.into_iter().map(|(r, c, v)| (r, c, tag, v)));
        };

        for i in 0..4 {
            let li = &ops.local[i].ops;
            let mut f: [Option<&DMatrix<C64>>; 4] = [None; 4];
            f[i] = Some(&li.n2);
            push(0, ops.kron_triplets(re(4.0 * w[(i, i)]), f));
            let mut f: [Option<&DMatrix<C64>>; 4] = [None; 4];
            f[i] = Some(&li.cos);
            push(0, ops.kron_triplets(re(-derived.omega_j[i]), f));
            for j in (i + 1)..4 {
                let mut f: [Option<&DMatrix<C64>>; 4] = [None; 4];
                f[i] = Some(&li.n);
                f[j] = Some(&ops.local[j].ops.n);
                push(0, ops.kron_triplets(re(8.0 * w[(i, j)]), f));
            }
            // drive row vector (0, 0, -1, 1) W
            let drive = w[(3, i)] - w[(2, i)];
            let mut f: [Option<&DMatrix<C64>>; 4] = [None; 4];
            f[i] = Some(&li.n);
            push(3, ops.kron_triplets(re(drive), f));
        }
        push(1, ops.cos_rel_triplets());
        push(2, ops.sin_rel_triplets());

        tagged.par_sort_unstable_by_key(|&(r, c, _, _)| (r, c));
        let n = ops.dim();
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::new();
        let mut vals: [Vec<C64>; 4] = Default::default();
        let mut k = 0;
        while k < tagged.len() {
            let (r, c) = (tagged[k].0, tagged[k].1);
            let mut acc = [ZERO; 4];
            while k < tagged.len() && tagged[k].0 == r && tagged[k].1 == c {
                acc[tagged[k].2 as usize] += tagged[k].3;
                k += 1;
            }
            if acc.iter().any(|v| *v != ZERO) {
                indices.push(c);
                for t in 0..4 {
                    vals[t].push(acc[t]);
                }
                indptr[r + 1] += 1;
            }
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        let [static_vals, cos_rel_vals, sin_rel_vals, drive_vals] = vals;
        Self {
            ops,
            derived,
            indptr,
            indices,
            static_vals,
            cos_rel_vals,
            sin_rel_vals,
            drive_vals,
        }
    }

    /// Full charge-basis model.
    pub fn full(params: &DeviceParams) -> Result<Self> {
        let derived = params.derive()?;
        Ok(Self::new(OperatorSet::charge_basis(params, &derived), derived))
    }

    /// Model with every transmon truncated to its `levels` lowest bare states.
    pub fn truncated(params: &DeviceParams, levels: usize) -> Result<Self> {
        let derived = params.derive()?;
        Ok(Self::new(OperatorSet::truncated(params, &derived, levels)?, derived))
    }

    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Scalar weights on (cos_rel, sin_rel, drive) at flux `theta` (radians)
    /// and flux rate `theta_dot` (rad/ns).
    pub fn flux_coefficients(&self, theta: f64, theta_dot: f64) -> [f64; 3] {
        let ej5 = self.derived.omega_j[4];
        [-ej5 * theta.cos(), -ej5 * theta.sin(), theta_dot / self.derived.omega_c34]
    }

    fn csr_from(&self, values: Vec<C64>) -> CsrMatrix {
        CsrMatrix {
            nrows: self.dim(),
            ncols: self.dim(),
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values,
        }
    }

    /// H(Θ, Θ̇) as a sparse Hermitian matrix (rad/ns), Θ in radians.
    pub fn assemble(&self, theta: f64, theta_dot: f64) -> CsrMatrix {
        let [a, b, c] = self.flux_coefficients(theta, theta_dot);
        let values = self
            .static_vals
            .iter()
            .zip(&self.cos_rel_vals)
            .zip(&self.sin_rel_vals)
            .zip(&self.drive_vals)
            .map(|(((s, cr), sr), d)| s + cr * a + sr * b + d * c)
            .collect();
        self.csr_from(values)
    }

    /// The flux-independent part (kinetic and single-junction potentials).
    pub fn static_part(&self) -> CsrMatrix {
        self.csr_from(self.static_vals.clone())
    }

    pub fn cos_rel_part(&self) -> CsrMatrix {
        self.csr_from(self.cos_rel_vals.clone())
    }

    pub fn sin_rel_part(&self) -> CsrMatrix {
        self.csr_from(self.sin_rel_vals.clone())
    }

    pub fn drive_part(&self) -> CsrMatrix {
        self.csr_from(self.drive_vals.clone())
    }
}

/// Matrix-free view of H(Θ, Θ̇) for iterative solvers.
pub struct AssembledHamiltonian(pub CsrMatrix);

impl LinearOperator for AssembledHamiltonian {
    fn dim(&self) -> usize {
        self.0.nrows
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.0.matvec(x, y)
    }
}

/// Reduced model in which each bare transmon is diagonalized in the charge
/// basis and only its `levels` lowest eigenstates are kept (dimension
/// `levels⁴`); the flux-dependent loop terms are retained as projected
/// operators.
pub fn truncate_to_eigenbasis(params: &DeviceParams, derived: &DerivedParams, levels: usize) -> Result<HamiltonianModel> {
    Ok(HamiltonianModel::new(OperatorSet::truncated(params, derived, levels)?, derived.clone()))
}
