//! Scalar minimization, bracketed root finding and a bounded pattern search.

use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub x: f64,
    pub value: f64,
    pub evaluations: usize,
}

const GOLDEN: f64 = 0.381_966_011_250_105_1;

/// Brent's minimizer on [a, b] with absolute x-tolerance `tol`.
pub fn brent_minimize<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a < b) || !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("bad minimization bracket [{a}, {b}] or tolerance {tol}")));
    }
    let (mut a, mut b) = (a, b);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evaluations = 1;
    for _ in 0..500 {
        let m = 0.5 * (a + b);
        let tol1 = tol * 0.5 + 1e-14 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u)?;
        evaluations += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(Minimum { x, value: fx, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub residual: f64,
    pub evaluations: usize,
}

/// Root of `f` in [a, b] by safeguarded secant/bisection (Brent's method).
/// `f(a)` and `f(b)` must have opposite signs; the iteration stops once
/// `|f(x)| <= ftol` or the bracket is narrower than `xtol`.
pub fn brent_root<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, ftol: f64, xtol: f64) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa * fb > 0.0 {
        return Err(Error::InvalidArgument(format!("root not bracketed: f({a}) = {fa}, f({b}) = {fb}")));
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() <= ftol {
        return Ok(Root { x: a, residual: fa, evaluations: 0 });
    }
    if fb.abs() <= ftol {
        return Ok(Root { x: b, residual: fb, evaluations: 0 });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    let mut evaluations = 0;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if fb.abs() <= ftol || m.abs() <= tol1 {
            return Ok(Root { x: b, residual: fb, evaluations });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(m) };
        fb = f(b)?;
        evaluations += 1;
    }
    Ok(Root { x: b, residual: fb, evaluations })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Compass search within box bounds. Every poll evaluates the 2n trial
/// points concurrently and moves to the best improving one; with no
/// improvement the steps are halved. Stops when all steps drop below
/// `min_step`, the objective falls to `target`, or `budget` evaluations are
/// spent.
pub fn pattern_search<F>(f: F, x0: &[f64], step0: &[f64], bounds: &[(f64, f64)], min_step: f64, target: f64, budget: usize) -> Result<PatternResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let n = x0.len();
    if step0.len() != n || bounds.len() != n {
        return Err(Error::InvalidArgument("pattern search dimensions disagree".into()));
    }
    let clamp = |i: usize, v: f64| v.clamp(bounds[i].0, bounds[i].1);
    let mut x: Vec<f64> = x0.iter().enumerate().map(|(i, &v)| clamp(i, v)).collect();
    if budget == 0 {
        return Ok(PatternResult { x, value: f64::NAN, evaluations: 0, converged: false });
    }
    let mut step = step0.to_vec();
    let mut fx = f(&x)?;
    let mut evaluations = 1;
    while evaluations < budget && fx > target {
        let mut trials: Vec<Vec<f64>> = Vec::with_capacity(2 * n);
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = clamp(i, x[i] + sign * step[i]);
                if y[i] != x[i] {
                    trials.push(y);
                }
            }
        }
        trials.truncate(budget - evaluations);
        let values: Vec<f64> = trials.par_iter().map(|y| f(y)).collect::<Result<_>>()?;
        evaluations += trials.len();
        let best = values.iter().enumerate().filter(|(_, v)| **v < fx).min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i);
        match best {
            Some(i) => {
                x = trials.swap_remove(i);
                fx = values[i];
            }
            None => {
                for s in step.iter_mut() {
                    *s *= 0.5;
                }
                if step.iter().all(|&s| s < min_step) {
                    return Ok(PatternResult { x, value: fx, evaluations, converged: true });
                }
            }
        }
    }
    let converged = fx <= target;
    Ok(PatternResult { x, value: fx, evaluations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_quadratic_minimum() {
        let m = brent_minimize(|x| Ok((x - 0.3).powi(2) + 1.0), 0.0, 1.0, 1e-8).unwrap();
        assert!((m.x - 0.3).abs() < 1e-7);
        assert!((m.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brent_minimize_nonsmooth() {
        let m = brent_minimize(|x: f64| Ok((x - 0.6525).abs()), 0.6, 0.7, 1e-7).unwrap();
        assert!((m.x - 0.6525).abs() < 1e-6);
    }

    #[test]
    fn brent_root_cubic() {
        let f = |x: f64| x * x * x - 2.0;
        let r = brent_root(|x| Ok(f(x)), 0.0, 2.0, f(0.0), f(2.0), 1e-14, 1e-14).unwrap();
        assert!((r.x - 2f64.powf(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn root_requires_bracket() {
        assert!(brent_root(Ok, 1.0, 2.0, 1.0, 2.0, 1e-10, 1e-10).is_err());
    }

    #[test]
    fn pattern_search_rosenbrock_like() {
        let f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + 4.0 * (x[1] + 0.5).powi(2));
        let r = pattern_search(f, &[0.0, 0.0], &[0.5, 0.5], &[(-2.0, 2.0), (-2.0, 2.0)], 1e-6, 0.0, 10_000).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] + 0.5).abs() < 1e-5);
    }

    #[test]
    fn pattern_search_respects_budget_and_bounds() {
        let f = |x: &[f64]| Ok(-x[0]);
        let r = pattern_search(f, &[0.0], &[0.3], &[(-1.0, 1.0)], 1e-9, f64::NEG_INFINITY, 7).unwrap();
        assert!(r.evaluations <= 7);
        assert!(r.x[0] <= 1.0);
    }

    #[test]
    fn zero_budget_returns_start() {
        let r = pattern_search(|x: &[f64]| Ok(x[0] * x[0]), &[0.4], &[0.1], &[(-1.0, 1.0)], 1e-9, 0.0, 0).unwrap();
        assert_eq!(r.x, vec![0.4]);
        assert_eq!(r.evaluations, 0);
    }
}
