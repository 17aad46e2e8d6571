//! Symmetric 2- and 4-tensors in Mandel coordinates.
//!
//! A symmetric matrix `S` is stored as `(S11, S22, √2 S12)` in 2D and
//! `(S11, S22, S33, √2 S23, √2 S13, √2 S12)` in 3D, so the Euclidean dot product
//! of two Mandel vectors is the Frobenius product of the matrices. A fourth-order
//! tensor with the minor and major symmetries is then a symmetric `m × m`
//! quadratic form `Q` with `S : T : S = sᵀ Q s`.

use std::f64::consts::SQRT_2;

use nalgebra::{Matrix3, Matrix6, Vector6};

use crate::{Error, Result};

/// Orthonormality tolerance for odeco components.
pub const ORTHO_TOL: f64 = 1e-10;

/// Index pairs of the Mandel coordinates.
const PAIRS_2D: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
const PAIRS_3D: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

pub fn mandel_dim(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn pairs(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &PAIRS_2D
    } else {
        &PAIRS_3D
    }
}

/// Mandel index of the unordered pair `(i, j)`.
fn mandel_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = (i.min(j), i.max(j));
    pairs(dim).iter().position(|&p| p == (i, j)).unwrap()
}

fn mandel_scale(i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else {
        SQRT_2
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("tensor dimension must be 2 or 3, got {dim}")))
    }
}

/// Symmetric second-order tensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym2 {
    dim: usize,
    v: Vector6<f64>,
}

impl Sym2 {
    pub fn zero(dim: usize) -> Self {
        Self { dim, v: Vector6::zeros() }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zero(dim);
        for i in 0..dim {
            s.v[i] = 1.0;
        }
        s
    }

    /// From Mandel coordinates (length 3 or 6).
    pub fn from_mandel(m: &[f64]) -> Result<Self> {
        let dim = match m.len() {
            3 => 2,
            6 => 3,
            n => return Err(Error::DimMismatch { expected: 6, found: n }),
        };
        let mut v = Vector6::zeros();
        v.as_mut_slice()[..m.len()].copy_from_slice(m);
        Ok(Self { dim, v })
    }

    /// From the upper-left `dim × dim` block of `a`; `a` is symmetrized.
    pub fn from_matrix(dim: usize, a: &Matrix3<f64>) -> Self {
        let mut v = Vector6::zeros();
        for (k, &(i, j)) in pairs(dim).iter().enumerate() {
            v[k] = mandel_scale(i, j) * 0.5 * (a[(i, j)] + a[(j, i)]);
        }
        Self { dim, v }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let mut a = Matrix3::zeros();
        for (k, &(i, j)) in pairs(self.dim).iter().enumerate() {
            let x = self.v[k] / mandel_scale(i, j);
            a[(i, j)] = x;
            a[(j, i)] = x;
        }
        a
    }

    /// `ξ ξᵀ`.
    pub fn outer(xi: &[f64]) -> Self {
        let dim = xi.len();
        let mut v = Vector6::zeros();
        for (k, &(i, j)) in pairs(dim).iter().enumerate() {
            v[k] = mandel_scale(i, j) * xi[i] * xi[j];
        }
        Self { dim, v }
    }

    /// `a bᵀ + b aᵀ`.
    pub fn sym_outer(a: &[f64], b: &[f64]) -> Self {
        let dim = a.len();
        let mut v = Vector6::zeros();
        for (k, &(i, j)) in pairs(dim).iter().enumerate() {
            v[k] = mandel_scale(i, j) * (a[i] * b[j] + b[i] * a[j]);
        }
        Self { dim, v }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mandel(&self) -> &[f64] {
        &self.v.as_slice()[..mandel_dim(self.dim)]
    }

    pub fn dot(&self, other: &Sym2) -> f64 {
        self.v.dot(&other.v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { dim: self.dim, v: self.v * s }
    }

    pub fn norm(&self) -> f64 {
        self.v.norm()
    }

    pub(crate) fn vector(&self) -> &Vector6<f64> {
        &self.v
    }
}

/// Fourth-order tensor as a quadratic form on Mandel vectors.
///
/// Only the upper-left `m × m` block of `q` is meaningful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sym4Form {
    dim: usize,
    q: Matrix6<f64>,
    fully_symmetric: bool,
}

impl Sym4Form {
    pub fn zero(dim: usize) -> Self {
        Self { dim, q: Matrix6::zeros(), fully_symmetric: true }
    }

    /// The pairwise-symmetric identity `𝕀 : S = S`.
    pub fn identity(dim: usize) -> Self {
        let m = mandel_dim(dim);
        let mut q = Matrix6::zeros();
        for i in 0..m {
            q[(i, i)] = 1.0;
        }
        Self { dim, q, fully_symmetric: false }
    }

    /// From a row-major `m × m` matrix. The full-symmetry flag is detected.
    pub fn from_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let m = mandel_dim(dim);
        if rows.len() != m * m {
            return Err(Error::DimMismatch { expected: m * m, found: rows.len() });
        }
        let mut q = Matrix6::zeros();
        for i in 0..m {
            for j in 0..m {
                q[(i, j)] = rows[i * m + j];
            }
        }
        let scale = q.abs().max().max(1.0);
        if (q - q.transpose()).abs().max() > 1e-12 * scale {
            return Err(Error::InvalidInput("quadratic form is not symmetric".into()));
        }
        let q = 0.5 * (q + q.transpose());
        let mut f = Self { dim, q, fully_symmetric: false };
        f.fully_symmetric = f.full_symmetry_defect() <= 1e-12 * scale;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mandel_dim(&self) -> usize {
        mandel_dim(self.dim)
    }

    pub fn is_fully_symmetric(&self) -> bool {
        self.fully_symmetric
    }

    /// `Q[i][j]` in Mandel indexing.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.q
    }

    /// Row-major upper triangle of `Q`.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let m = self.mandel_dim();
        (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).map(|(i, j)| self.q[(i, j)]).collect()
    }

    pub fn from_upper_triangle(dim: usize, vals: &[f64]) -> Result<Self> {
        check_dim(dim)?;
        let m = mandel_dim(dim);
        if vals.len() != m * (m + 1) / 2 {
            return Err(Error::DimMismatch { expected: m * (m + 1) / 2, found: vals.len() });
        }
        let mut rows = vec![0.0; m * m];
        let mut k = 0;
        for i in 0..m {
            for j in i..m {
                rows[i * m + j] = vals[k];
                rows[j * m + i] = vals[k];
                k += 1;
            }
        }
        Self::from_rows(dim, &rows)
    }

    /// Coefficient `T_ijkl`.
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let a = mandel_index(self.dim, i, j);
        let b = mandel_index(self.dim, k, l);
        self.q[(a, b)] / (mandel_scale(i, j) * mandel_scale(k, l))
    }

    /// Largest violation of `T_ijkl = T_ikjl` over all index quadruples.
    pub fn full_symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let a = self.component(i, j, k, l);
                        worst = worst.max((a - self.component(i, k, j, l)).abs());
                    }
                }
            }
        }
        worst
    }

    /// `T(v, v, v, v)`.
    pub fn eval(&self, v: &[f64]) -> f64 {
        let s = Sym2::outer(v);
        s.v.dot(&(self.q * s.v))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { q: self.q * s, ..*self }
    }
}

/// Orthonormal components `ξ^α` with weights `w_α`, generating
/// `T = Σ w_α (ξ^α)^⊗4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdecoFrame {
    dim: usize,
    axes: [[f64; 3]; 3],
    weights: [f64; 3],
}

impl OdecoFrame {
    pub fn new(axes: &[&[f64]], weights: &[f64]) -> Result<Self> {
        let dim = axes.len();
        check_dim(dim)?;
        if weights.len() != dim {
            return Err(Error::DimMismatch { expected: dim, found: weights.len() });
        }
        let mut a = [[0.0; 3]; 3];
        let mut w = [0.0; 3];
        for (k, xi) in axes.iter().enumerate() {
            if xi.len() != dim {
                return Err(Error::DimMismatch { expected: dim, found: xi.len() });
            }
            a[k][..dim].copy_from_slice(xi);
            w[k] = weights[k];
        }
        for k in 0..dim {
            if !(w[k] >= 0.0) || !w[k].is_finite() {
                return Err(Error::InvalidInput(format!("frame weight {} is not a nonnegative number", w[k])));
            }
            for l in 0..dim {
                let d: f64 = (0..dim).map(|i| a[k][i] * a[l][i]).sum();
                let target = if k == l { 1.0 } else { 0.0 };
                if (d - target).abs() > ORTHO_TOL {
                    return Err(Error::InvalidInput(format!(
                        "frame components are not orthonormal (ξ{k}·ξ{l} = {d})"
                    )));
                }
            }
        }
        Ok(Self { dim, axes: a, weights: w })
    }

    /// 2D frame `{(cos θ, sin θ), (−sin θ, cos θ)}`.
    pub fn from_angle(theta: f64, weights: [f64; 2]) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            dim: 2,
            axes: [[c, s, 0.0], [-s, c, 0.0], [0.0; 3]],
            weights: [weights[0], weights[1], 0.0],
        }
    }

    /// 3D frame whose components are the columns of the rotation `r`.
    pub fn from_rotation(r: &Matrix3<f64>, weights: [f64; 3]) -> Result<Self> {
        let cols: Vec<[f64; 3]> = (0..3).map(|j| [r[(0, j)], r[(1, j)], r[(2, j)]]).collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| &c[..]).collect();
        Self::new(&refs, &weights)
    }

    pub fn axis_aligned(dim: usize, weights: &[f64]) -> Result<Self> {
        let e = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let refs: Vec<&[f64]> = e[..dim].iter().map(|c| &c[..dim]).collect();
        Self::new(&refs, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn axis(&self, k: usize) -> &[f64] {
        &self.axes[k][..self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights[..self.dim]
    }

    /// Components as matrix columns.
    pub fn rotation(&self) -> Matrix3<f64> {
        let mut r = Matrix3::identity();
        for k in 0..self.dim {
            for i in 0..self.dim {
                r[(i, k)] = self.axes[k][i];
            }
        }
        r
    }

    /// Closed-form spectral norm `max_α |w_α|`.
    pub fn spectral_norm(&self) -> f64 {
        self.weights().iter().fold(0.0, |m, w| m.max(w.abs()))
    }
}

pub fn odeco_to_form(frame: &OdecoFrame) -> Sym4Form {
    let mut q = Matrix6::zeros();
    for k in 0..frame.dim {
        let m = Sym2::outer(frame.axis(k)).v;
        q += frame.weights[k] * m * m.transpose();
    }
    Sym4Form { dim: frame.dim, q, fully_symmetric: true }
}

/// `A : T`.
pub fn contract(a: &Sym2, t: &Sym4Form) -> Result<Sym2> {
    if a.dim != t.dim {
        return Err(Error::DimMismatch { expected: t.dim, found: a.dim });
    }
    Ok(Sym2 { dim: a.dim, v: t.q * a.v })
}

/// `S : T : S`.
pub fn alignment_quadratic(s: &Sym2, t: &Sym4Form) -> Result<f64> {
    if s.dim != t.dim {
        return Err(Error::DimMismatch { expected: t.dim, found: s.dim });
    }
    Ok(s.v.dot(&(t.q * s.v)))
}

/// Tensors with a spectral norm `max_{|v|=1} T(v,v,v,v)`.
pub trait SpectralNorm {
    fn spectral_norm(&self) -> f64;
}

impl SpectralNorm for OdecoFrame {
    fn spectral_norm(&self) -> f64 {
        OdecoFrame::spectral_norm(self)
    }
}

impl SpectralNorm for Sym4Form {
    fn spectral_norm(&self) -> f64 {
        sampled_spectral_norm(self)
    }
}

pub fn spectral_norm<T: SpectralNorm + ?Sized>(t: &T) -> f64 {
    t.spectral_norm()
}

const NORM_SAMPLES: usize = 1024;
const NORM_STARTS: usize = 8;
const NORM_STATIONARY: f64 = 1e-10;

/// Quasi-random sampling of the unit sphere followed by projected ascent
/// from the best few samples.
fn sampled_spectral_norm(t: &Sym4Form) -> f64 {
    let dim = t.dim;
    let samples: Vec<[f64; 3]> = if dim == 2 {
        // v and −v give the same value, so a half circle suffices.
        (0..NORM_SAMPLES)
            .map(|k| {
                let a = std::f64::consts::PI * (k as f64 + 0.5) / NORM_SAMPLES as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect()
    } else {
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..NORM_SAMPLES)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / NORM_SAMPLES as f64;
                let r = (1.0 - z * z).sqrt();
                let a = golden * k as f64;
                [r * a.cos(), r * a.sin(), z]
            })
            .collect()
    };
    let mut scored: Vec<(f64, [f64; 3])> = samples.into_iter().map(|v| (t.eval(&v[..dim]), v)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0].0;
    for &(f0, v0) in scored.iter().take(NORM_STARTS) {
        best = best.max(ascend(t, v0, f0));
    }
    best
}

fn ascend(t: &Sym4Form, mut v: [f64; 3], mut f: f64) -> f64 {
    let dim = t.dim;
    let mut step = 1.0;
    for _ in 0..500 {
        // ∇ T(v,v,v,v) = 4 (v : T) v.
        let s = Sym2 { dim, v: t.q * Sym2::outer(&v[..dim]).v }.to_matrix();
        let mut g = [0.0; 3];
        for i in 0..dim {
            g[i] = 4.0 * (0..dim).map(|j| s[(i, j)] * v[j]).sum::<f64>();
        }
        let radial: f64 = (0..dim).map(|i| g[i] * v[i]).sum();
        for i in 0..dim {
            g[i] -= radial * v[i];
        }
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm <= NORM_STATIONARY * f.abs().max(1.0) {
            break;
        }
        let mut improved = false;
        while step > 1e-16 {
            let mut w = [0.0; 3];
            for i in 0..dim {
                w[i] = v[i] + step * g[i];
            }
            let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            w.iter_mut().for_each(|x| *x /= n);
            let fw = t.eval(&w[..dim]);
            // Armijo: plain increase lets the iterate bounce across the maximum.
            if fw > f + 0.3 * step * gnorm * gnorm {
                v = w;
                f = fw;
                step *= 2.0;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    f
}

/// `Tε = ‖T‖ 𝕀 − (1 − ε) T`.
pub fn modify_epsilon(t: &Sym4Form, norm_t: f64, epsilon: f64) -> Result<Sym4Form> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if !(norm_t >= 0.0) {
        return Err(Error::InvalidInput(format!("tensor norm must be nonnegative, got {norm_t}")));
    }
    let id = Sym4Form::identity(t.dim);
    Ok(Sym4Form {
        dim: t.dim,
        q: norm_t * id.q - (1.0 - epsilon) * t.q,
        fully_symmetric: false,
    })
}

/// `vec(ζζᵀ)ᵀ Q vec(ζζᵀ)`.
pub fn principal_symbol(t_eps: &Sym4Form, zeta: &[f64]) -> Result<f64> {
    if zeta.len() != t_eps.dim {
        return Err(Error::DimMismatch { expected: t_eps.dim, found: zeta.len() });
    }
    Ok(t_eps.eval(zeta))
}
