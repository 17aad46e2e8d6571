//! Symmetric linear solves, generalized eigenpairs, implicit diffusion and
//! box-constrained quadratic programs.

mod eigen;
mod qp;

pub use eigen::{dense_generalized_eigen, eigs_generalized, EigenMethod, EigenOptions, EigenResult};
pub use qp::{brute_force_box_qp, solve_box_qp, solve_box_qp_matrix, QpOptions, QpResult};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};
use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::sparse::{dot, norm2, CsrMatrix, SparseSym};
use crate::{AssembledOperator, Error, Result};

/// Target normwise backward error `‖b − Ax‖ / (‖A‖‖x‖ + ‖b‖)`.
pub const SOLVE_TOL: f64 = 1e-9;

/// Sparse `LLᵀ` factorization with a fill-reducing ordering.
pub struct SparseCholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl SparseCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let f = a.to_faer()?;
        let llt = f
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Numerical(format!("sparse Cholesky failed: {e:?}")))?;
        Ok(Self { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves for every column of `b` at once.
    pub fn solve_columns(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut rhs = Mat::from_fn(self.n, b.ncols(), |i, j| b[(i, j)]);
        self.llt.solve_in_place(rhs.as_mut());
        DMatrix::from_fn(self.n, b.ncols(), |i, j| rhs[(i, j)])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolveMethod {
    /// Sparse Cholesky (with iterative refinement for singular systems).
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Pcg,
    /// Dense Cholesky.
    Dense,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub method: SolveMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Direct, tol: SOLVE_TOL, max_iter: 20_000 }
    }
}

/// Orthonormal basis (Euclidean) of the given vectors.
fn orthonormalize(vs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm2(&w);
        if n > 1e-12 * norm2(v).max(1e-300) {
            w.iter_mut().for_each(|x| *x /= n);
            out.push(w);
        }
    }
    out
}

fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let c = dot(x, q);
        x.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
    }
}

fn backward_error(a: &SparseSym, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let denom = a.matrix().norm_inf() * norm2(x) + norm2(b);
    if denom == 0.0 {
        0.0
    } else {
        r / denom
    }
}

/// Solves `A x = b` for symmetric positive (semi)definite `A`.
///
/// `nullspace` spans the kernel of `A`; `b` is projected onto its orthogonal
/// complement and the returned `x` is orthogonal to it.
pub fn solve_spd(a: &SparseSym, b: &[f64], nullspace: &[Vec<f64>]) -> Result<Vec<f64>> {
    solve_spd_with(a, b, nullspace, &SolveOptions::default())
}

pub fn solve_spd_with(a: &SparseSym, b: &[f64], nullspace: &[Vec<f64>], opts: &SolveOptions) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimMismatch { expected: n, found: b.len() });
    }
    let basis = orthonormalize(nullspace);
    let mut rhs = b.to_vec();
    project_out(&mut rhs, &basis);
    let drift = norm2(&rhs.iter().zip(b).map(|(p, q)| p - q).collect::<Vec<_>>());
    if drift > 1e-10 * norm2(b).max(1e-300) {
        warn!("right-hand side not orthogonal to the nullspace; projected (change {drift:.3e})");
    }
    if norm2(&rhs) == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let x = match opts.method {
        SolveMethod::Direct => direct(a, &rhs, &basis, opts)?,
        SolveMethod::Pcg => pcg(a, &rhs, &basis, opts)?,
        SolveMethod::Dense => dense(a, &rhs, &basis)?,
    };
    let err = backward_error(a, &x, &rhs);
    if err > opts.tol {
        return Err(Error::Numerical(format!("linear solve backward error {err:.3e} exceeds {:.1e}", opts.tol)));
    }
    Ok(x)
}

fn direct(a: &SparseSym, b: &[f64], basis: &[Vec<f64>], opts: &SolveOptions) -> Result<Vec<f64>> {
    if basis.is_empty() {
        let chol = SparseCholesky::new(a.matrix())?;
        let mut x = chol.solve(b);
        // One refinement step tightens the residual on badly scaled systems.
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(p, q)| q - p).collect();
        chol.solve(&r).iter().zip(x.iter_mut()).for_each(|(d, x)| *x += d);
        return Ok(x);
    }
    // Singular: factor a slightly shifted matrix and refine on the range.
    let shift = 1e-10 * a.trace().abs() / a.dim() as f64;
    let shifted = a.add_diagonal(shift, &vec![1.0; a.dim()]);
    let chol = SparseCholesky::new(shifted.matrix())?;
    let mut x = vec![0.0; a.dim()];
    for _ in 0..100 {
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(b).map(|(p, q)| q - p).collect();
        let mut d = chol.solve(&r);
        project_out(&mut d, basis);
        x.iter_mut().zip(&d).for_each(|(x, d)| *x += d);
        project_out(&mut x, basis);
        if backward_error(a, &x, b) <= 0.01 * opts.tol {
            break;
        }
    }
    Ok(x)
}

fn dense(a: &SparseSym, b: &[f64], basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut m = a.matrix().to_dense();
    // Adding a multiple of Σ q qᵀ removes the kernel without changing the solution on the range.
    let scale = m.diagonal().amax().max(1e-300);
    for q in basis {
        let q = DVector::from_column_slice(q);
        m += scale * &q * q.transpose();
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numerical("dense Cholesky failed: matrix not positive definite".into()))?;
    let mut x: Vec<f64> = chol.solve(&DVector::from_column_slice(b)).iter().copied().collect();
    project_out(&mut x, basis);
    Ok(x)
}

/// Jacobi-preconditioned conjugate gradients.
fn pcg(a: &SparseSym, b: &[f64], basis: &[Vec<f64>], opts: &SolveOptions) -> Result<Vec<f64>> {
    let n = a.dim();
    let diag: Vec<f64> = a.matrix().diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let precond = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r * d).collect();
        project_out(&mut z, basis);
        z
    };
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let bnorm = norm2(b);
    for _ in 0..opts.max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Numerical("conjugate gradients met a non-positive curvature direction".into()));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        if norm2(&r) <= 0.1 * opts.tol * bnorm {
            project_out(&mut x, basis);
            return Ok(x);
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    project_out(&mut x, basis);
    if backward_error(a, &x, b) <= opts.tol {
        return Ok(x);
    }
    Err(Error::Numerical(format!("conjugate gradients did not converge in {} iterations", opts.max_iter)))
}

/// One implicit Euler step `(M + τA) u = M u₀`.
pub fn diffuse(op: &AssembledOperator, u0: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("diffusion time must be positive, got {tau}")));
    }
    let m = op.mass();
    if u0.len() != m.len() {
        return Err(Error::DimMismatch { expected: m.len(), found: u0.len() });
    }
    let sys = op.matrix().scaled(tau).add_diagonal(1.0, m);
    let rhs: Vec<f64> = u0.iter().zip(m).map(|(u, m)| u * m).collect();
    solve_spd(&sys, &rhs, &[])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, seed: u64) -> (SparseSym, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let a = &r * r.transpose() + DMatrix::identity(n, n) * 0.5;
        (SparseSym::new(CsrMatrix::from_dense(&a)).unwrap(), a)
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![1.0, -2.0, 3.5];
        for method in [SolveMethod::Direct, SolveMethod::Pcg, SolveMethod::Dense] {
            let opts = SolveOptions { method, ..Default::default() };
            let x = solve_spd_with(&SparseSym::identity(3), &b, &[], &opts).unwrap();
            assert!(x.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-15));
        }
    }

    #[test]
    fn random_spd_matches_dense_oracle() {
        let (a, dense) = random_spd(50, 11);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let oracle = dense.lu().solve(&DVector::from_column_slice(&b)).unwrap();
        for method in [SolveMethod::Direct, SolveMethod::Pcg, SolveMethod::Dense] {
            let opts = SolveOptions { method, ..Default::default() };
            let x = solve_spd_with(&a, &b, &[], &opts).unwrap();
            let err = x.iter().zip(oracle.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-8 * oracle.amax(), "{method:?}: {err}");
        }
    }

    #[test]
    fn singular_path_laplacian() {
        // 1D path graph Laplacian, kernel = constants.
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let a = SparseSym::new(CsrMatrix::from_triplets(n, n, &t)).unwrap();
        let ones = vec![1.0; n];
        let zero = solve_spd(&a, &vec![0.0; n], &[ones.clone()]).unwrap();
        assert!(zero.iter().all(|&x| x == 0.0));
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        for method in [SolveMethod::Direct, SolveMethod::Pcg, SolveMethod::Dense] {
            let opts = SolveOptions { method, ..Default::default() };
            let x = solve_spd_with(&a, &b, &[ones.clone()], &opts).unwrap();
            assert!(dot(&x, &ones).abs() < 1e-8);
            let mut pb = b.clone();
            project_out(&mut pb, &orthonormalize(&[ones.clone()]));
            let r: f64 = a.mul_vec(&x).iter().zip(&pb).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(r < 1e-9, "{method:?}: {r}");
        }
    }
}
