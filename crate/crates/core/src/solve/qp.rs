use log::warn;
use nalgebra::{DMatrix, DVector};

use super::SparseCholesky;
use crate::sparse::{dot, norm2, SparseSym};
use crate::{AssembledOperator, Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct QpOptions {
    pub max_iter: usize,
    /// Relative part of the projected-gradient stopping rule.
    pub tol: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct QpResult {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Norm of the projected gradient `x − clamp(x − ∇f)` over free variables.
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `½ cᵀ A c` subject to `c[i] = v` for `(i, v)` in `fixed` and
/// `lower ≤ c ≤ upper`.
pub fn solve_box_qp(
    op: &AssembledOperator,
    fixed: &[(usize, f64)],
    lower: &[f64],
    upper: &[f64],
    opts: &QpOptions,
) -> Result<QpResult> {
    solve_box_qp_matrix(op.matrix(), fixed, lower, upper, opts)
}

struct Reduced {
    free: Vec<usize>,
    a: SparseSym,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    c: f64,
}

fn reduce(a: &SparseSym, fixed: &[(usize, f64)], lower: &[f64], upper: &[f64]) -> Result<(Reduced, Vec<f64>)> {
    let n = a.dim();
    if lower.len() != n || upper.len() != n {
        return Err(Error::DimMismatch { expected: n, found: lower.len().min(upper.len()) });
    }
    if let Some(i) = (0..n).find(|&i| !(lower[i] <= upper[i])) {
        return Err(Error::InvalidInput(format!("empty box at index {i}: [{}, {}]", lower[i], upper[i])));
    }
    let mut full = vec![0.0; n];
    let mut is_fixed = vec![false; n];
    for &(i, v) in fixed {
        if i >= n {
            return Err(Error::InvalidInput(format!("fixed index {i} out of range")));
        }
        if v < lower[i] || v > upper[i] {
            return Err(Error::InvalidInput(format!("fixed value {v} at {i} violates its bounds")));
        }
        if is_fixed[i] && full[i] != v {
            return Err(Error::InvalidInput(format!("index {i} fixed to two different values")));
        }
        is_fixed[i] = true;
        full[i] = v;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
    let fixed_idx: Vec<usize> = (0..n).filter(|&i| is_fixed[i]).collect();
    let cb: Vec<f64> = fixed_idx.iter().map(|&i| full[i]).collect();
    let b = a.matrix().submatrix(&free, &fixed_idx).mul_vec(&cb);
    let c = 0.5 * dot(&cb, &a.matrix().submatrix(&fixed_idx, &fixed_idx).mul_vec(&cb));
    let red = Reduced {
        a: a.principal(&free),
        b,
        lo: free.iter().map(|&i| lower[i]).collect(),
        hi: free.iter().map(|&i| upper[i]).collect(),
        free,
        c,
    };
    Ok((red, full))
}

impl Reduced {
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x).iter().zip(&self.b).map(|(p, q)| p + q).collect()
    }

    fn objective(&self, x: &[f64]) -> f64 {
        let ax = self.a.mul_vec(x);
        0.5 * dot(x, &ax) + dot(x, &self.b) + self.c
    }

    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    fn projected_gradient(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .enumerate()
            .map(|(i, (&x, &g))| (x - (x - g).clamp(self.lo[i], self.hi[i])).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Exact minimizer over the face where `active` variables stay put.
    fn face_solve(&self, x: &[f64], active: &[bool]) -> Result<Vec<f64>> {
        let inner: Vec<usize> = (0..x.len()).filter(|&i| !active[i]).collect();
        let mut out = x.to_vec();
        if inner.is_empty() {
            return Ok(out);
        }
        let outer: Vec<usize> = (0..x.len()).filter(|&i| active[i]).collect();
        let xo: Vec<f64> = outer.iter().map(|&i| x[i]).collect();
        let coupling = self.a.matrix().submatrix(&inner, &outer).mul_vec(&xo);
        let rhs: Vec<f64> = inner.iter().zip(&coupling).map(|(&i, c)| -(self.b[i] + c)).collect();
        let sub = self.a.principal(&inner);
        // A tiny shift keeps the factorization alive on faces with no anchor.
        let shift = 1e-13 * sub.trace().abs() / inner.len() as f64;
        let chol = SparseCholesky::new(sub.add_diagonal(shift, &vec![1.0; inner.len()]).matrix())?;
        let sol = chol.solve(&rhs);
        for (k, &i) in inner.iter().enumerate() {
            out[i] = sol[k];
        }
        Ok(out)
    }
}

pub fn solve_box_qp_matrix(
    a: &SparseSym,
    fixed: &[(usize, f64)],
    lower: &[f64],
    upper: &[f64],
    opts: &QpOptions,
) -> Result<QpResult> {
    let (red, mut full) = reduce(a, fixed, lower, upper)?;
    let nf = red.free.len();
    let a_norm = a.matrix().norm_inf();
    let finish = |x: &[f64], full: &mut Vec<f64>, kkt: f64, it: usize, converged: bool| {
        for (k, &i) in red.free.iter().enumerate() {
            full[i] = x[k];
        }
        QpResult { objective: red.objective(x), x: full.clone(), kkt_residual: kkt, iterations: it, converged }
    };
    if nf == 0 {
        return Ok(finish(&[], &mut full, 0.0, 0, true));
    }

    // Warm start: unconstrained minimizer clipped to the box.
    let mut x = red.face_solve(&vec![0.0; nf], &vec![false; nf])?;
    red.clamp(&mut x);
    let diag: Vec<f64> = red.a.matrix().diagonal().iter().map(|&d| if d > 0.0 { d } else { 1.0 }).collect();
    let mut f = red.objective(&x);
    let mut g = red.gradient(&x);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for it in 0..opts.max_iter {
        let kkt = red.projected_gradient(&x, &g);
        if kkt <= opts.tol * a_norm * norm2(&x) + 1e-12 {
            return Ok(finish(&x, &mut full, kkt, it, true));
        }
        // Variables pinned at a bound with the gradient pushing outward.
        let active: Vec<bool> = (0..nf)
            .map(|i| (x[i] <= red.lo[i] && g[i] > 0.0) || (x[i] >= red.hi[i] && g[i] < 0.0))
            .collect();
        let target = red.face_solve(&x, &active)?;
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-12 {
            let mut trial: Vec<f64> = x.iter().zip(&target).map(|(x, t)| x + step * (t - x)).collect();
            red.clamp(&mut trial);
            let ft = red.objective(&trial);
            if ft < f - 1e-15 * f.abs() {
                prev = Some((x.clone(), g.clone()));
                x = trial;
                f = ft;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Diagonally scaled projected gradient step with a BB length.
            let alpha = match &prev {
                Some((xp, gp)) => {
                    let s: Vec<f64> = x.iter().zip(xp).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g.iter().zip(gp).map(|(a, b)| a - b).collect();
                    let sds: f64 = s.iter().zip(&diag).map(|(s, d)| s * s * d).sum();
                    let sy = dot(&s, &y);
                    if sy > 0.0 { sds / sy } else { 1.0 }
                }
                None => 1.0,
            };
            let mut alpha = alpha.clamp(1e-6, 1e6);
            let mut moved = false;
            while alpha > 1e-14 {
                let mut trial: Vec<f64> = (0..nf).map(|i| x[i] - alpha * g[i] / diag[i]).collect();
                red.clamp(&mut trial);
                let ft = red.objective(&trial);
                if ft < f {
                    prev = Some((x.clone(), g.clone()));
                    x = trial;
                    f = ft;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                // No descent at machine precision: x is optimal to rounding.
                let g = red.gradient(&x);
                let kkt = red.projected_gradient(&x, &g);
                return Ok(finish(&x, &mut full, kkt, it, true));
            }
        }
        g = red.gradient(&x);
    }
    let kkt = red.projected_gradient(&x, &g);
    warn!("box QP stopped at the iteration cap with KKT residual {kkt:.3e}");
    Ok(finish(&x, &mut full, kkt, opts.max_iter, false))
}

/// Exhaustive search over all `{free, lower, upper}` assignments. Exponential;
/// intended as a test oracle for a handful of variables.
pub fn brute_force_box_qp(a: &DMatrix<f64>, fixed: &[(usize, f64)], lower: &[f64], upper: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.nrows();
    let mut val = vec![f64::NAN; n];
    for &(i, v) in fixed {
        val[i] = v;
    }
    let vars: Vec<usize> = (0..n).filter(|&i| val[i].is_nan()).collect();
    if vars.len() > 14 {
        return Err(Error::InvalidInput("brute-force oracle limited to 14 variables".into()));
    }
    let objective = |x: &DVector<f64>| 0.5 * x.dot(&(a * x));
    let mut best: Option<(Vec<f64>, f64)> = None;
    let total = 3usize.pow(vars.len() as u32);
    for code in 0..total {
        let mut x = DVector::from_iterator(n, val.iter().map(|v| if v.is_nan() { 0.0 } else { *v }));
        let mut free = Vec::new();
        let mut c = code;
        for &i in &vars {
            match c % 3 {
                0 => free.push(i),
                1 => x[i] = lower[i],
                _ => x[i] = upper[i],
            }
            c /= 3;
        }
        if !free.is_empty() {
            let bound: Vec<usize> = (0..n).filter(|i| !free.contains(i)).collect();
            let aff = DMatrix::from_fn(free.len(), free.len(), |r, s| a[(free[r], free[s])]);
            let rhs = DVector::from_fn(free.len(), |r, _| -bound.iter().map(|&j| a[(free[r], j)] * x[j]).sum::<f64>());
            let Some(sol) = aff.clone().cholesky().map(|ch| ch.solve(&rhs)) else { continue };
            for (r, &i) in free.iter().enumerate() {
                x[i] = sol[r];
            }
        }
        if (0..n).any(|i| x[i] < lower[i] - 1e-12 || x[i] > upper[i] + 1e-12) {
            continue;
        }
        let f = objective(&x);
        if best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((x.iter().copied().collect(), f));
        }
    }
    best.ok_or_else(|| Error::Numerical("no feasible assignment found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &r * r.transpose() + DMatrix::identity(n, n) * 0.1
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..40 {
            let n = 4 + trial % 9;
            let a = random_spd(n, &mut rng);
            let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.2..1.5)).collect();
            let i0 = rng.gen_range(0..n);
            let v0 = 0.5 * (lower[i0] + upper[i0]) + 0.4;
            let v0 = v0.clamp(lower[i0], upper[i0]);
            let fixed = [(i0, v0)];
            let sym = SparseSym::new(CsrMatrix::from_dense(&a)).unwrap();
            let res = solve_box_qp_matrix(&sym, &fixed, &lower, &upper, &QpOptions::default()).unwrap();
            let (_, best) = brute_force_box_qp(&a, &fixed, &lower, &upper).unwrap();
            assert!(res.converged);
            assert!((res.objective - best).abs() <= 1e-8 * best.abs().max(1.0), "trial {trial}: {} vs {best}", res.objective);
            assert!(res.x.iter().enumerate().all(|(i, &x)| x >= lower[i] && x <= upper[i]));
        }
    }

    #[test]
    fn inactive_bounds_match_unconstrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_spd(10, &mut rng);
        let sym = SparseSym::new(CsrMatrix::from_dense(&a)).unwrap();
        let fixed = [(0, 0.3), (5, -0.2)];
        let wide = vec![1e6; 10];
        let res = solve_box_qp_matrix(&sym, &fixed, &wide.iter().map(|x| -x).collect::<Vec<_>>(), &wide, &QpOptions::default()).unwrap();
        let (oracle, _) = brute_force_box_qp(&a, &fixed, &[-1e6; 10], &[1e6; 10]).unwrap();
        for (p, q) in res.x.iter().zip(&oracle) {
            assert!((p - q).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_infeasible_fixed_values() {
        let sym = SparseSym::identity(3);
        let r = solve_box_qp_matrix(&sym, &[(1, 2.0)], &[0.0; 3], &[1.0; 3], &QpOptions::default());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
        let r = solve_box_qp_matrix(&sym, &[], &[0.0, 2.0, 0.0], &[1.0; 3], &QpOptions::default());
        assert!(r.is_err());
    }
}
