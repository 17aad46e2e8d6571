use faer::{Mat, Side};
use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SparseCholesky;
use crate::sparse::SparseSym;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense below `dense_threshold` unknowns, subspace iteration above.
    Auto,
    Subspace,
    Dense,
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub method: EigenMethod,
    pub dense_threshold: usize,
    /// Residual tolerance relative to `‖A‖ + λ‖M‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Eigenvalues below `zero_rel_tol` times the largest computed
    /// eigenvalue count as zero modes.
    pub zero_rel_tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            dense_threshold: 1000,
            tol: 1e-7,
            max_iter: 500,
            zero_rel_tol: 1e-8,
            seed: 0x5eed,
        }
    }
}

/// Smallest generalized eigenpairs of `A φ = λ M φ`.
#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// `n × k`, M-orthonormal columns.
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Estimate (upper bound) of the largest eigenvalue.
    pub lambda_max: f64,
    pub zero_threshold: f64,
    pub iterations: usize,
    pub dense: bool,
}

impl EigenResult {
    /// Number of leading eigenvalues below the zero threshold.
    pub fn num_zero_modes(&self) -> usize {
        self.values.iter().take_while(|&&l| l.abs() <= self.zero_threshold).count()
    }

    /// Eigenvalues with the zero modes removed.
    pub fn nonzero_values(&self) -> &[f64] {
        &self.values[self.num_zero_modes()..]
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// Largest `|φ_iᵀ M φ_j − δ_ij|`.
    pub fn orthonormality_defect(&self, m: &[f64]) -> f64 {
        let k = self.vectors.ncols();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..=i {
                let g: f64 = (0..m.len()).map(|r| self.vectors[(r, i)] * m[r] * self.vectors[(r, j)]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

fn check_inputs(n: usize, m: &[f64], k: usize) -> Result<()> {
    if m.len() != n {
        return Err(Error::DimMismatch { expected: n, found: m.len() });
    }
    if m.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidInput("mass matrix must be positive".into()));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!("requested {k} eigenpairs of a {n}-dimensional problem")));
    }
    Ok(())
}

/// Gershgorin bound on the largest eigenvalue of `M⁻¹A`.
fn lambda_upper_bound(a: &SparseSym, m: &[f64]) -> f64 {
    (0..a.dim())
        .map(|i| a.matrix().row(i).1.iter().map(|v| v.abs()).sum::<f64>() / m[i])
        .fold(0.0, f64::max)
}

pub fn eigs_generalized(a: &SparseSym, m: &[f64], k: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let n = a.dim();
    check_inputs(n, m, k)?;
    let dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Subspace => false,
        EigenMethod::Auto => n <= opts.dense_threshold,
    };
    let lambda_max = lambda_upper_bound(a, m);
    let (values, vectors, iterations) = if dense {
        let (vals, vecs) = dense_generalized_eigen(&a.matrix().to_dense(), m)?;
        (vals[..k].to_vec(), vecs.columns(0, k).into_owned(), 0)
    } else {
        subspace_iteration(a, m, k, lambda_max, opts)?
    };
    let a_norm = a.matrix().norm_inf();
    let m_norm = m.iter().copied().fold(0.0, f64::max);
    let residuals = residuals(a, m, &values, &vectors);
    for (j, (&l, &r)) in values.iter().zip(&residuals).enumerate() {
        if r > opts.tol * (a_norm + l.abs() * m_norm) {
            return Err(Error::Numerical(format!("eigenpair {j} residual {r:.3e} above tolerance")));
        }
    }
    let zero_threshold = zero_threshold(&values, lambda_max, opts.zero_rel_tol);
    Ok(EigenResult {
        values,
        vectors,
        residuals,
        lambda_max,
        zero_threshold,
        iterations,
        dense,
    })
}

/// Relative to the computed part of the spectrum, but never below the
/// rounding level of the whole operator.
fn zero_threshold(values: &[f64], lambda_max: f64, rel: f64) -> f64 {
    let top = values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    (rel * top).max(ROUNDOFF_FLOOR * lambda_max)
}

const ROUNDOFF_FLOOR: f64 = 1e-13;

fn residuals(a: &SparseSym, m: &[f64], values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    (0..values.len())
        .map(|j| {
            let phi: Vec<f64> = vectors.column(j).iter().copied().collect();
            let ap = a.mul_vec(&phi);
            ap.iter()
                .zip(&phi)
                .zip(m)
                .map(|((a, p), m)| (a - values[j] * m * p).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// All eigenpairs of `A φ = λ M φ` with diagonal `M`, ascending, via the
/// symmetric matrix `M^{-1/2} A M^{-1/2}`.
pub fn dense_generalized_eigen(a: &DMatrix<f64>, m: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let s: Vec<f64> = m.iter().map(|x| 1.0 / x.sqrt()).collect();
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]) * s[i] * s[j]);
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("dense eigensolver failed: {e:?}")))?;
    let vals: Vec<f64> = (0..n).map(|i| evd.S()[i]).collect();
    let u = evd.U();
    let vecs = DMatrix::from_fn(n, n, |i, j| u[(i, j)] * s[i]);
    Ok((vals, vecs))
}

/// Block inverse iteration on `A + σM` with Rayleigh–Ritz after every step.
///
/// The residual bound alone is loose for the low end of a stiff spectrum, so
/// iteration also continues until the Ritz values are stationary.
fn subspace_iteration(
    a: &SparseSym,
    m: &[f64],
    k: usize,
    lambda_max: f64,
    opts: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>, usize)> {
    let n = a.dim();
    let p = (2 * k).max(k + 8).min(n);
    let sigma = 1e-8 * a.trace().abs() / n as f64;
    let shifted = a.add_diagonal(sigma, m);
    let chol = SparseCholesky::new(shifted.matrix())?;
    let a_norm = a.matrix().norm_inf();
    let m_norm = m.iter().copied().fold(0.0, f64::max);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    let mut values = vec![0.0; p];
    for it in 1..=opts.max_iter {
        let mx = DMatrix::from_fn(n, p, |i, j| m[i] * x[(i, j)]);
        let y = chol.solve_columns(&mx);
        let (vals, z) = rayleigh_ritz(a, m, &y, &mut rng)?;
        let stationary = vals[..k]
            .iter()
            .zip(&values[..k])
            .all(|(new, old)| (new - old).abs() <= 1e-11 * new.abs() + 1e-15 * lambda_max);
        x = z;
        values = vals;
        let res = residuals(a, m, &values[..k], &x.columns(0, k).into_owned());
        let worst = res
            .iter()
            .zip(&values)
            .map(|(r, l)| r / (a_norm + l.abs() * m_norm))
            .fold(0.0, f64::max);
        debug!("subspace iteration {it}: worst relative residual {worst:.3e}");
        // Converge a little past the tolerance so the final check has slack.
        if stationary && worst <= 0.1 * opts.tol {
            return Ok((values[..k].to_vec(), x.columns(0, k).into_owned(), it));
        }
    }
    warn!("subspace iteration reached {} iterations", opts.max_iter);
    Ok((values[..k].to_vec(), x.columns(0, k).into_owned(), opts.max_iter))
}

/// Ritz pairs of `(A, M)` on the span of `y`, as M-orthonormal columns.
fn rayleigh_ritz(a: &SparseSym, m: &[f64], y: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let (n, p) = y.shape();
    // M-orthonormal basis of span(y) by Gram-Schmidt with reorthogonalization.
    // The Gram matrix would square the (very large) spread of column scales.
    let mut w = DMatrix::zeros(n, p);
    let mut kept = 0;
    for j in 0..p {
        let mut v = y.column(j).into_owned();
        let norm0: f64 = (0..n).map(|i| m[i] * v[i] * v[i]).sum::<f64>().sqrt();
        for _ in 0..2 {
            for c in 0..kept {
                let wc = w.column(c);
                let proj: f64 = (0..n).map(|i| wc[i] * m[i] * v[i]).sum();
                v.axpy(-proj, &wc, 1.0);
            }
        }
        let nrm: f64 = (0..n).map(|i| m[i] * v[i] * v[i]).sum::<f64>().sqrt();
        if nrm > 1e-10 * norm0 && nrm > 0.0 {
            w.set_column(kept, &(v / nrm));
            kept += 1;
        }
    }
    if kept < p {
        // Refill lost directions with random vectors M-orthogonalized against the rest.
        for c in kept..p {
            let mut v = DMatrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
            for _ in 0..2 {
                for j in 0..c {
                    let wj = w.column(j);
                    let proj: f64 = (0..n).map(|i| wj[i] * m[i] * v[(i, 0)]).sum();
                    for i in 0..n {
                        v[(i, 0)] -= proj * wj[i];
                    }
                }
            }
            let nrm: f64 = (0..n).map(|i| m[i] * v[(i, 0)].powi(2)).sum::<f64>().sqrt();
            w.set_column(c, &(v.column(0) / nrm));
        }
    }
    let mut aw = DMatrix::zeros(n, p);
    for j in 0..p {
        let col: Vec<f64> = w.column(j).iter().copied().collect();
        let ac = a.mul_vec(&col);
        aw.set_column(j, &nalgebra::DVector::from_vec(ac));
    }
    let h = w.transpose() * aw;
    let h = 0.5 * (&h + h.transpose());
    let he = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| he.eigenvalues[i].total_cmp(&he.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| he.eigenvalues[i]).collect();
    let mut z = DMatrix::zeros(n, p);
    for (c, &i) in order.iter().enumerate() {
        let mut col = &w * he.eigenvectors.column(i);
        // Fix the sign so that repeated runs produce identical output.
        let pivot = col.iter().copied().fold(0.0, |acc: f64, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            col.neg_mut();
        }
        z.set_column(c, &col);
    }
    Ok((vals, z))
}
