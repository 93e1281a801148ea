//! Lowest eigenpairs of Hermitian operators.
//!
//! Large operators go through a thick-restart Lanczos iteration with full
//! reorthogonalization (the Hermitian Krylov–Schur scheme); small ones are
//! diagonalized densely.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sparse::{dot, norm, LinearOperator};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Operators up to this dimension are diagonalized densely.
pub const DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual tolerance relative to the operator norm estimate.
    pub tol: f64,
    /// Krylov basis size; `None` picks `max(2k + 20, k + 40)`.
    pub max_basis: Option<usize>,
    pub max_restarts: usize,
    /// Optional starting vector (e.g. from a neighbouring flux point).
    pub start: Option<Vec<C64>>,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_basis: None,
            max_restarts: 2000,
            start: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, phase-fixed so the largest-magnitude
    /// component is real and positive.
    pub vectors: Vec<Vec<C64>>,
    pub matvecs: usize,
    /// Largest `‖Hv − λv‖` over the returned pairs.
    pub max_residual: f64,
}

/// Rotates `v` so its largest-magnitude component is real positive.
pub fn fix_phase(v: &mut [C64]) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, x) in v.iter().enumerate() {
        // Ties resolved towards the lowest index; 1e-12 slack keeps the
        // choice stable under rounding.
        let m = x.norm_sqr();
        if m > best_mag * (1.0 + 1e-12) {
            best_mag = m;
            best = i;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best].conj() / v[best].norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

fn deterministic_vector(n: usize, salt: u64) -> Vec<C64> {
    // splitmix64; the solver only needs a fixed, generic start vector
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ salt.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..n).map(|_| C64::new(next(), next())).collect()
}

fn scale(v: &mut [C64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}

/// Two passes of classical Gram–Schmidt against `basis`; returns the
/// accumulated coefficients.
fn orthogonalize(basis: &[Vec<C64>], w: &mut [C64]) -> Vec<C64> {
    let mut total = vec![ZERO; basis.len()];
    for _ in 0..2 {
        let h: Vec<C64> = basis.par_iter().map(|v| dot(v, w)).collect();
        w.par_chunks_mut(2048).enumerate().for_each(|(chunk, ws)| {
            let base = chunk * 2048;
            for (j, v) in basis.iter().enumerate() {
                let hj = h[j];
                if hj == ZERO {
                    continue;
                }
                for (i, wi) in ws.iter_mut().enumerate() {
                    *wi -= hj * v[base + i];
                }
            }
        });
        for (t, x) in total.iter_mut().zip(h) {
            *t += x;
        }
    }
    total
}

fn sorted_eigen(h: DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vecs)
}

/// Dense diagonalization; returns the `k` lowest pairs.
pub fn dense_lowest(h: &DMatrix<C64>, k: usize) -> EigenPairs {
    let n = h.nrows();
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let (values, vecs) = sorted_eigen(herm);
    let k = k.min(n);
    let mut vectors: Vec<Vec<C64>> = (0..k).map(|c| vecs.column(c).iter().copied().collect()).collect();
    vectors.iter_mut().for_each(|v| fix_phase(v));
    let max_residual = residuals(h, &values[..k], &vectors).into_iter().fold(0.0, f64::max);
    EigenPairs {
        values: values[..k].to_vec(),
        vectors,
        matvecs: 0,
        max_residual,
    }
}

fn residuals(op: &dyn LinearOperator, values: &[f64], vectors: &[Vec<C64>]) -> Vec<f64> {
    vectors
        .par_iter()
        .zip(values.par_iter())
        .map(|(v, &lam)| {
            let mut hv = vec![ZERO; v.len()];
            op.apply(v, &mut hv);
            hv.iter().zip(v).map(|(a, b)| (a - b * lam).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect()
}

/// The `k` lowest eigenpairs of a Hermitian operator.
pub fn lowest_eigenpairs(op: &dyn LinearOperator, k: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a {n}-dimensional operator")));
    }
    if n <= DENSE_LIMIT {
        let mut dense = DMatrix::zeros(n, n);
        let mut e = vec![ZERO; n];
        let mut col = vec![ZERO; n];
        for j in 0..n {
            e[j] = C64::new(1.0, 0.0);
            op.apply(&e, &mut col);
            e[j] = ZERO;
            for i in 0..n {
                dense[(i, j)] = col[i];
            }
        }
        let mut pairs = dense_lowest(&dense, k);
        pairs.matvecs = n;
        return Ok(pairs);
    }
    thick_restart_lanczos(op, k, opts)
}

fn thick_restart_lanczos(op: &dyn LinearOperator, k: usize, opts: &EigenOptions) -> Result<EigenPairs> {
    let n = op.dim();
    let m = opts.max_basis.unwrap_or((2 * k + 20).max(k + 40)).min(n);
    // Ritz pairs retained across restarts.
    let keep = (k + (m - k) / 2).min(m - 1);

    let mut v0 = match &opts.start {
        Some(s) if s.len() == n && norm(s) > 0.0 => {
            let mut s = s.clone();
            // a small generic admixture avoids missing symmetry sectors
            let noise = deterministic_vector(n, 1);
            let ns = norm(&noise);
            let ss = norm(&s);
            for (x, y) in s.iter_mut().zip(noise) {
                *x += y * (1e-3 * ss / ns);
            }
            s
        }
        _ => deterministic_vector(n, 0),
    };
    let nv = norm(&v0);
    scale(&mut v0, 1.0 / nv);

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    basis.push(v0);
    let mut proj = DMatrix::<C64>::zeros(m, m);
    let mut start = 0usize;
    let mut matvecs = 0usize;
    let mut worst = f64::INFINITY;

    for _restart in 0..opts.max_restarts {
        let mut beta = 0.0;
        let mut residual_vec = vec![ZERO; n];
        for j in start..m {
            let mut w = vec![ZERO; n];
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let h = orthogonalize(&basis, &mut w);
            for (i, hi) in h.iter().enumerate() {
                proj[(i, j)] = *hi;
                proj[(j, i)] = hi.conj();
            }
            proj[(j, j)] = C64::new(h[j].re, 0.0);
            beta = norm(&w);
            if beta < 1e-13 * proj[(j, j)].norm().max(1.0) {
                // invariant subspace: continue with a fresh orthogonal direction
                let mut r = deterministic_vector(n, (matvecs + 7) as u64);
                orthogonalize(&basis, &mut r);
                let nr = norm(&r);
                scale(&mut r, 1.0 / nr);
                w = r;
                beta = 0.0;
            } else {
                scale(&mut w, 1.0 / beta);
            }
            if j + 1 < m {
                basis.push(w);
            } else {
                residual_vec = w;
            }
        }

        let (theta, y) = sorted_eigen(proj.clone());
        let op_norm = theta.iter().map(|t| t.abs()).fold(0.0, f64::max).max(1e-300);
        let res: Vec<f64> = (0..m).map(|i| beta * y[(m - 1, i)].norm()).collect();
        worst = res[..k].iter().copied().fold(0.0, f64::max);
        let converged = worst <= opts.tol * op_norm;

        let take = if converged { k } else { keep };
        // Ritz vectors: new_i = Σ_j V_j y_ji
        let ritz: Vec<Vec<C64>> = (0..take)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![ZERO; n];
                for (j, v) in basis.iter().enumerate() {
                    let c = y[(j, i)];
                    if c == ZERO {
                        continue;
                    }
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += c * x;
                    }
                }
                out
            })
            .collect();

        if converged {
            let mut vectors = ritz;
            vectors.iter_mut().for_each(|v| {
                let nv = norm(v);
                scale(v, 1.0 / nv);
                fix_phase(v);
            });
            let values = theta[..k].to_vec();
            let max_residual = residuals(op, &values, &vectors).into_iter().fold(0.0, f64::max);
            return Ok(EigenPairs {
                values,
                vectors,
                matvecs,
                max_residual,
            });
        }

        basis = ritz;
        proj.fill(ZERO);
        for i in 0..take {
            proj[(i, i)] = C64::new(theta[i], 0.0);
        }
        // The residual direction couples to every kept Ritz vector; those
        // couplings are recomputed by the next orthogonalization.
        basis.push(residual_vec);
        start = take;
    }
    Err(Error::EigenNotConverged {
        iterations: matvecs,
        residual: worst,
    })
}
