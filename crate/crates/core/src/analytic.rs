//! Closed-form reference data: the spectrum of the constant-field operator on
//! `[-1, 1]²` and conformal maps for the coframe warp experiment.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, Matrix3};

use crate::exec::Exec;
use crate::fem::{assemble_operator_with, AssembledOperator, BoundaryCondition};
use crate::framefield::{constant_field, map_coframe_field, FrameField};
use crate::geometry::SimplicialMesh;
use crate::solve::{eigs_generalized, EigenOptions, EigenResult};
use crate::symtensor::OdecoFrame;
use crate::{Error, Result};

/// `λ(a, b) = 2ω_a²ω_b² + ε(ω_a⁴ + ω_b⁴)` with `ω_k = kπ/2`.
pub fn square_eigenvalue(a: usize, b: usize, epsilon: f64) -> f64 {
    let wa = a as f64 * FRAC_PI_2;
    let wb = b as f64 * FRAC_PI_2;
    2.0 * wa * wa * wb * wb + epsilon * (wa.powi(4) + wb.powi(4))
}

#[derive(Clone, Debug)]
pub struct SquareMode {
    pub a: usize,
    pub b: usize,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct SquareSpectrum {
    pub epsilon: f64,
    /// Ascending, starting with the constant mode `(0, 0)`.
    pub modes: Vec<SquareMode>,
}

impl SquareSpectrum {
    pub fn values(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.value).collect()
    }

    /// Values without the constant mode.
    pub fn nonzero_values(&self) -> Vec<f64> {
        self.modes.iter().filter(|m| m.value > 0.0).map(|m| m.value).collect()
    }
}

/// The `count` smallest lattice eigenvalues (with multiplicity).
pub fn square_spectrum(epsilon: f64, count: usize) -> Result<SquareSpectrum> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if count == 0 {
        return Err(Error::InvalidInput("count must be positive".into()));
    }
    // Any mode with max(a, b) > L is at least λ(L + 1, 0); grow L until that
    // exceeds the count-th value found inside the box.
    let mut l = ((count as f64).sqrt().ceil() as usize).max(1);
    loop {
        let mut modes: Vec<SquareMode> = (0..=l)
            .flat_map(|a| (0..=l).map(move |b| (a, b)))
            .map(|(a, b)| SquareMode { a, b, value: square_eigenvalue(a, b, epsilon) })
            .collect();
        modes.sort_by(|x, y| x.value.total_cmp(&y.value).then(x.a.cmp(&y.a)));
        if modes.len() >= count && square_eigenvalue(l + 1, 0, epsilon) > modes[count - 1].value {
            modes.truncate(count);
            return Ok(SquareSpectrum { epsilon, modes });
        }
        l *= 2;
    }
}

/// Holomorphic maps of the plane used to warp a base domain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConformalMap {
    /// `z ↦ z + c z²`.
    Polynomial { c: f64 },
    /// `z ↦ exp(z)`.
    Exponential,
}

impl ConformalMap {
    pub fn identity() -> Self {
        ConformalMap::Polynomial { c: 0.0 }
    }

    pub fn apply(&self, p: &[f64]) -> [f64; 3] {
        let (x, y) = (p[0], p[1]);
        match *self {
            ConformalMap::Polynomial { c } => [x + c * (x * x - y * y), y + c * 2.0 * x * y, 0.0],
            ConformalMap::Exponential => {
                let r = x.exp();
                [r * y.cos(), r * y.sin(), 0.0]
            }
        }
    }

    /// `f'(z)` as `(re, im)`.
    pub fn derivative(&self, p: &[f64]) -> (f64, f64) {
        let (x, y) = (p[0], p[1]);
        match *self {
            ConformalMap::Polynomial { c } => (1.0 + 2.0 * c * x, 2.0 * c * y),
            ConformalMap::Exponential => {
                let r = x.exp();
                (r * y.cos(), r * y.sin())
            }
        }
    }

    /// `df` at `p`, padded to 3×3 with a unit `z` entry.
    pub fn jacobian(&self, p: &[f64]) -> Matrix3<f64> {
        let (re, im) = self.derivative(p);
        Matrix3::new(re, -im, 0.0, im, re, 0.0, 0.0, 0.0, 1.0)
    }

    pub fn inverse_jacobian(&self, p: &[f64]) -> Matrix3<f64> {
        let (re, im) = self.derivative(p);
        let d = re * re + im * im;
        Matrix3::new(re / d, im / d, 0.0, -im / d, re / d, 0.0, 0.0, 0.0, 1.0)
    }

    /// Checks that the map is nonsingular and injective on the mesh.
    ///
    /// Polynomial: `|2cz| < 1` at every vertex of a convex mesh gives
    /// `Re f' > 0` there, hence injectivity. Exponential: the `y` extent must
    /// be below `2π`. Both are followed by an orientation check of the warped
    /// elements.
    pub fn validate_on(&self, mesh: &SimplicialMesh) -> Result<()> {
        if mesh.dim() != 2 {
            return Err(Error::InvalidInput("conformal warps are planar".into()));
        }
        match *self {
            ConformalMap::Polynomial { c } => {
                if !c.is_finite() {
                    return Err(Error::InvalidInput("non-finite warp parameter".into()));
                }
                let worst = (0..mesh.num_vertices())
                    .map(|v| {
                        let p = mesh.vertex(v);
                        2.0 * c.abs() * p[0].hypot(p[1])
                    })
                    .fold(0.0, f64::max);
                if worst >= 1.0 {
                    return Err(Error::InvalidInput(format!(
                        "polynomial warp with c = {c} is not injective on this domain (max |2cz| = {worst:.3})"
                    )));
                }
            }
            ConformalMap::Exponential => {
                let (lo, hi) = (0..mesh.num_vertices())
                    .map(|v| mesh.vertex(v)[1])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
                if hi - lo >= 2.0 * PI {
                    return Err(Error::InvalidInput("exponential warp needs a domain of height below 2π".into()));
                }
            }
        }
        mesh.map_vertices(|p| self.apply(p)).map(|_| ())
    }

    pub fn warp_mesh(&self, mesh: &SimplicialMesh) -> Result<SimplicialMesh> {
        self.validate_on(mesh)?;
        mesh.map_vertices(|p| self.apply(p))
    }
}

impl std::str::FromStr for ConformalMap {
    type Err = Error;
    /// `identity`, `exp` or `poly:<c>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(ConformalMap::identity()),
            "exp" | "exponential" => Ok(ConformalMap::Exponential),
            _ => {
                let c = s
                    .strip_prefix("poly:")
                    .or_else(|| s.strip_prefix("polynomial:"))
                    .ok_or_else(|| Error::InvalidInput(format!("unknown map '{s}'")))?;
                let c = c.parse().map_err(|_| Error::InvalidInput(format!("bad polynomial coefficient '{c}'")))?;
                Ok(ConformalMap::Polynomial { c })
            }
        }
    }
}

/// Coframe field on `f(base)` that pulls back to the constant axis-aligned
/// field on `base`. Vertex `v` of the warped mesh is the image of base
/// vertex `v`; the pullback of a field through `f⁻¹` has components given by
/// the columns of `d(f⁻¹)⁻¹ = df`, evaluated at the base point.
pub fn warped_coframe_field(base: &SimplicialMesh, warped: &SimplicialMesh, map: &ConformalMap) -> Result<FrameField> {
    map_coframe_field(warped, |v, _| map.jacobian(base.vertex(v)))
}

#[derive(Clone, Debug)]
pub struct WarpResult {
    pub warped_mesh: SimplicialMesh,
    pub field: FrameField,
    pub unwarped: EigenResult,
    pub warped: EigenResult,
    /// Base eigenvectors, indexed by the warped mesh's vertices (the
    /// connectivity is shared).
    pub base_on_warped: DMatrix<f64>,
}

impl WarpResult {
    /// Median relative deviation of the first `n` nonzero eigenvalues.
    pub fn median_relative_deviation(&self, n: usize) -> f64 {
        median_relative_deviation(self.unwarped.nonzero_values(), self.warped.nonzero_values(), n)
    }
}

pub fn median_relative_deviation(a: &[f64], b: &[f64], n: usize) -> f64 {
    let n = n.min(a.len()).min(b.len());
    if n == 0 {
        return f64::NAN;
    }
    let mut dev: Vec<f64> = a.iter().zip(b).take(n).map(|(x, y)| (x - y).abs() / x.abs().max(1e-300)).collect();
    dev.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        dev[n / 2]
    } else {
        0.5 * (dev[n / 2 - 1] + dev[n / 2])
    }
}

/// Constant-field operator on `base` versus the coframe operator on
/// `map(base)`, with `k` eigenpairs each.
pub fn warp_experiment(
    base: &SimplicialMesh,
    map: &ConformalMap,
    epsilon: f64,
    bc: BoundaryCondition,
    k: usize,
    opts: &EigenOptions,
    exec: Exec,
) -> Result<WarpResult> {
    let warped_mesh = map.warp_mesh(base)?;
    let constant = constant_field(base, &OdecoFrame::axis_aligned(2, &[1.0, 1.0])?)?;
    let field = warped_coframe_field(base, &warped_mesh, map)?;
    let op_base: AssembledOperator = assemble_operator_with(base, &constant, epsilon, bc, exec)?;
    let op_warp = assemble_operator_with(&warped_mesh, &field, epsilon, bc, exec)?;
    let unwarped = eigs_generalized(op_base.matrix(), op_base.mass(), k, opts)?;
    let warped = eigs_generalized(op_warp.matrix(), op_warp.mass(), k, opts)?;
    let base_on_warped = unwarped.vectors.clone();
    Ok(WarpResult { warped_mesh, field, unwarped, warped, base_on_warped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framefield::FieldKind;
    use crate::geometry::generators;

    #[test]
    fn lattice_examples() {
        let w4 = FRAC_PI_2.powi(4);
        assert!((square_eigenvalue(1, 0, 0.3) - 0.3 * w4).abs() < 1e-12);
        assert!((w4 - 6.0881).abs() < 1e-4);
        assert!((square_eigenvalue(1, 1, 1.0) - 4.0 * w4).abs() < 1e-12);
        assert_eq!(square_eigenvalue(0, 0, 0.5), 0.0);
        for a in 0..6 {
            for b in 0..6 {
                let (wa, wb) = ((a as f64 * FRAC_PI_2).powi(2), (b as f64 * FRAC_PI_2).powi(2));
                assert!((square_eigenvalue(a, b, 1.0) - (wa + wb).powi(2)).abs() < 1e-9 * (1.0 + (wa + wb).powi(2)));
            }
        }
    }

    #[test]
    fn spectrum_is_globally_smallest() {
        for eps in [1.0, 0.1, 1e-3] {
            let s = square_spectrum(eps, 40).unwrap();
            assert_eq!(s.modes.len(), 40);
            assert_eq!(s.modes[0].value, 0.0);
            assert!(s.values().windows(2).all(|w| w[0] <= w[1]));
            // Brute force over a large box.
            let mut all: Vec<f64> = (0..200).flat_map(|a| (0..200).map(move |b| square_eigenvalue(a, b, eps))).collect();
            all.sort_by(f64::total_cmp);
            assert_eq!(&all[..40], &s.values()[..]);
        }
        // Multiplicity: (1, 0) and (0, 1).
        let s = square_spectrum(0.5, 3).unwrap();
        assert_eq!(s.values()[1], s.values()[2]);
        assert!(square_spectrum(0.0, 3).is_err());
        assert!(square_spectrum(0.5, 0).is_err());
    }

    #[test]
    fn maps_and_jacobians() {
        let mesh = generators::rectangle_grid([0.0, 0.0], [1.0, FRAC_PI_2], 6, 6).unwrap();
        for map in [ConformalMap::identity(), ConformalMap::Polynomial { c: 0.1 }, ConformalMap::Exponential] {
            for v in 0..mesh.num_vertices() {
                let p = mesh.vertex(v);
                let e = map.jacobian(p) * map.inverse_jacobian(p) - Matrix3::identity();
                assert!(e.amax() < 1e-12);
                // Finite-difference check of df.
                let h = 1e-6;
                let j = map.jacobian(p);
                for c in 0..2 {
                    let mut q = [p[0], p[1]];
                    q[c] += h;
                    let fp = map.apply(&q);
                    q[c] -= 2.0 * h;
                    let fm = map.apply(&q);
                    for r in 0..2 {
                        assert!(((fp[r] - fm[r]) / (2.0 * h) - j[(r, c)]).abs() < 1e-6);
                    }
                }
            }
        }
        assert_eq!(ConformalMap::identity().jacobian(&[0.3, 0.2]), Matrix3::identity());
        // exp maps the rectangle onto a quarter annulus.
        let w = ConformalMap::Exponential.warp_mesh(&mesh).unwrap();
        for v in 0..w.num_vertices() {
            let p = w.vertex(v);
            let r = p[0].hypot(p[1]);
            assert!(r >= 1.0 - 1e-12 && r <= 1f64.exp() + 1e-12);
            assert!(p[0] >= -1e-12 && p[1] >= -1e-12);
        }
        let sq = generators::square_grid(-1.0, 1.0, 4).unwrap();
        assert!(ConformalMap::Polynomial { c: 0.5 }.warp_mesh(&sq).is_err());
        let tall = generators::rectangle_grid([0.0, 0.0], [1.0, 7.0], 2, 8).unwrap();
        assert!(ConformalMap::Exponential.warp_mesh(&tall).is_err());
        assert_eq!("poly:0.05".parse::<ConformalMap>().unwrap(), ConformalMap::Polynomial { c: 0.05 });
        assert!("spiral".parse::<ConformalMap>().is_err());
    }

    #[test]
    fn coframe_field_is_conformal_octahedral() {
        let base = generators::square_grid(-1.0, 1.0, 6).unwrap();
        let map = ConformalMap::Polynomial { c: 0.1 };
        let warped = map.warp_mesh(&base).unwrap();
        let f = warped_coframe_field(&base, &warped, &map).unwrap();
        assert_eq!(f.kind(), FieldKind::ConformalOctahedral);
        for v in 0..base.num_vertices() {
            let (re, im) = map.derivative(base.vertex(v));
            // ‖Tf‖ for the inverse map is |f'|⁻⁴.
            let norm_inverse = (re * re + im * im).powi(-2);
            assert!((f.norm(v) * norm_inverse - 1.0).abs() < 1e-8);
        }
        let id = ConformalMap::identity().warp_mesh(&base).unwrap();
        let g = warped_coframe_field(&base, &id, &ConformalMap::identity()).unwrap();
        assert_eq!(g.kind(), FieldKind::Octahedral);
    }

    #[test]
    fn identity_warp_gives_identical_spectra() {
        let base = generators::square_grid(-1.0, 1.0, 8).unwrap();
        let r = warp_experiment(
            &base,
            &ConformalMap::identity(),
            0.1,
            BoundaryCondition::Neumann,
            12,
            &EigenOptions::default(),
            Exec::default(),
        )
        .unwrap();
        for (a, b) in r.unwarped.values.iter().zip(&r.warped.values) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
        assert!(r.median_relative_deviation(10) < 1e-10);
    }
}
