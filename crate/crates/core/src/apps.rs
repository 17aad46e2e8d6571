//! Spectral distances, descent paths, boundary-value coloring and a region
//! shape measure used to quantify anisotropy.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};

use crate::fem::{AssembledOperator, BoundaryCondition};
use crate::framefield::constant_field;
use crate::geometry::SimplicialMesh;
use crate::solve::{eigs_generalized, solve_box_qp, EigenOptions, QpOptions};
use crate::symtensor::OdecoFrame;
use crate::{assemble_operator, Error, Result};

/// Rows `v ↦ (φ_k(v) / λ_k)_k` over the kept nonzero modes.
#[derive(Clone, Debug)]
pub struct SpectralEmbedding {
    pub coords: DMatrix<f64>,
    pub values: Vec<f64>,
    pub fingerprint: String,
    /// Number of modes discarded as zero.
    pub zero_modes: usize,
}

impl SpectralEmbedding {
    pub fn num_modes(&self) -> usize {
        self.values.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.nrows()
    }

    pub fn distance(&self, p: usize, q: usize) -> f64 {
        self.distance_truncated(p, q, self.num_modes())
    }

    /// Distance using only the first `n` modes.
    pub fn distance_truncated(&self, p: usize, q: usize, n: usize) -> f64 {
        (0..n.min(self.num_modes()))
            .map(|k| (self.coords[(p, k)] - self.coords[(q, k)]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Embedding from the first `n` nonzero eigenpairs of a Neumann operator.
pub fn build_embedding(op: &AssembledOperator, n: usize, opts: &EigenOptions) -> Result<SpectralEmbedding> {
    if op.bc() != BoundaryCondition::Neumann {
        return Err(Error::InvalidInput("spectral distances use the neumann operator".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("at least one mode is required".into()));
    }
    let dim = op.num_vertices();
    let mut extra = 4;
    loop {
        let k = (n + extra).min(dim - 1);
        let eig = eigs_generalized(op.matrix(), op.mass(), k, opts)?;
        let z = eig.num_zero_modes();
        if k - z >= n || k == dim - 1 {
            let kept = n.min(k - z);
            let values: Vec<f64> = eig.values[z..z + kept].to_vec();
            let coords = DMatrix::from_fn(dim, kept, |v, j| eig.vectors[(v, z + j)] / values[j]);
            return Ok(SpectralEmbedding { coords, values, fingerprint: op.fingerprint().to_string(), zero_modes: z });
        }
        extra = 2 * extra + z;
    }
}

/// Embedding at `ε = 1` with the axis-aligned constant field, i.e. the
/// biharmonic distance.
pub fn biharmonic_embedding(mesh: &SimplicialMesh, n: usize, opts: &EigenOptions) -> Result<SpectralEmbedding> {
    let frame = OdecoFrame::axis_aligned(mesh.dim(), &vec![1.0; mesh.dim()])?;
    let field = constant_field(mesh, &frame)?;
    let op = assemble_operator(mesh, &field, 1.0, BoundaryCondition::Neumann)?;
    build_embedding(&op, n, opts)
}

pub fn distance_field(emb: &SpectralEmbedding, source: usize) -> Result<Vec<f64>> {
    if source >= emb.num_vertices() {
        return Err(Error::InvalidInput(format!("source vertex {source} out of range")));
    }
    Ok((0..emb.num_vertices()).map(|v| emb.distance(source, v)).collect())
}

/// Greedy vertex descent: repeatedly step to the neighbour with the largest
/// decrease of `dist` per unit edge length, until no neighbour is lower.
pub fn trace_descent_path(mesh: &SimplicialMesh, dist: &[f64], start: usize) -> Result<Vec<usize>> {
    if dist.len() != mesh.num_vertices() {
        return Err(Error::DimMismatch { expected: mesh.num_vertices(), found: dist.len() });
    }
    if start >= dist.len() {
        return Err(Error::InvalidInput(format!("start vertex {start} out of range")));
    }
    let nbrs = mesh.vertex_neighbors();
    if nbrs[start].is_empty() {
        return Err(Error::InvalidInput(format!("start vertex {start} is isolated")));
    }
    let mut path = vec![start];
    let mut cur = start;
    loop {
        let best = nbrs[cur]
            .iter()
            .map(|&w| (w, (dist[cur] - dist[w]) / mesh.distance(cur, w)))
            .filter(|&(_, slope)| slope > 0.0)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((w, _)) => {
                path.push(w);
                cur = w;
            }
            None => return Ok(path),
        }
    }
}

/// Vertex positions along a path.
pub fn path_positions(mesh: &SimplicialMesh, path: &[usize]) -> Vec<[f64; 3]> {
    path.iter().map(|&v| mesh.vertices()[v]).collect()
}

/// Per channel, minimizes `½cᵀ𝒜c` with the boundary colors fixed and every
/// value boxed by that channel's boundary extremes.
pub fn color_by_boundary(
    mesh: &SimplicialMesh,
    op: &AssembledOperator,
    boundary_colors: &[[f64; 3]],
    opts: &QpOptions,
) -> Result<Vec<[f64; 3]>> {
    let bnd = mesh.boundary_vertices();
    if boundary_colors.len() != bnd.len() {
        return Err(Error::DimMismatch { expected: bnd.len(), found: boundary_colors.len() });
    }
    if op.num_vertices() != mesh.num_vertices() {
        return Err(Error::DimMismatch { expected: mesh.num_vertices(), found: op.num_vertices() });
    }
    if boundary_colors.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::InvalidInput("colors must lie in [0, 1]".into()));
    }
    let n = mesh.num_vertices();
    let mut out = vec![[0.0; 3]; n];
    for ch in 0..3 {
        let fixed: Vec<(usize, f64)> = bnd.iter().zip(boundary_colors).map(|(&v, c)| (v, c[ch])).collect();
        let lo = fixed.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
        let hi = fixed.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
        let res = solve_box_qp(op, &fixed, &vec![lo; n], &vec![hi; n], opts)?;
        if !res.converged {
            log::warn!("channel {ch}: box QP stopped with KKT residual {:.2e}", res.kkt_residual);
        }
        for (o, x) in out.iter_mut().zip(&res.x) {
            o[ch] = x.clamp(lo, hi);
        }
    }
    Ok(out)
}

/// Shape of the superlevel set `{f ≥ level}` of a piecewise-linear function
/// on a triangle mesh.
#[derive(Clone, Copy, Debug)]
pub struct RegionShape {
    pub area: f64,
    pub centroid: [f64; 2],
    /// `√(μmax / μmin)` of the second-moment matrix; 1 for a disk, `a/b`
    /// for an ellipse.
    pub axis_ratio: f64,
    /// Angle of the major axis.
    pub major_angle: f64,
}

/// Exact area moments of the clipped region, triangle by triangle.
pub fn superlevel_shape(mesh: &SimplicialMesh, f: &[f64], level: f64) -> Result<RegionShape> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidInput("region shapes are computed on triangle meshes".into()));
    }
    if f.len() != mesh.num_vertices() {
        return Err(Error::DimMismatch { expected: mesh.num_vertices(), found: f.len() });
    }
    // Integrals of 1, x, y, x², xy, y².
    let mut m = [0.0f64; 6];
    for el in mesh.elements() {
        let pts: Vec<([f64; 2], f64)> = el.iter().map(|&v| ([mesh.vertex(v)[0], mesh.vertex(v)[1]], f[v] - level)).collect();
        let mut poly: Vec<[f64; 2]> = Vec::with_capacity(4);
        for i in 0..3 {
            let (p, a) = pts[i];
            let (q, b) = pts[(i + 1) % 3];
            if a >= 0.0 {
                poly.push(p);
            }
            if (a >= 0.0) != (b >= 0.0) {
                let t = a / (a - b);
                poly.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
        if poly.len() < 3 {
            continue;
        }
        for i in 0..poly.len() {
            let [x0, y0] = poly[i];
            let [x1, y1] = poly[(i + 1) % poly.len()];
            let c = x0 * y1 - x1 * y0;
            m[0] += c / 2.0;
            m[1] += c * (x0 + x1) / 6.0;
            m[2] += c * (y0 + y1) / 6.0;
            m[3] += c * (x0 * x0 + x0 * x1 + x1 * x1) / 12.0;
            m[4] += c * (x0 * y1 + 2.0 * x0 * y0 + 2.0 * x1 * y1 + x1 * y0) / 24.0;
            m[5] += c * (y0 * y0 + y0 * y1 + y1 * y1) / 12.0;
        }
    }
    let area = m[0];
    if !(area > 0.0) {
        return Err(Error::InvalidInput(format!("superlevel set at {level} is empty")));
    }
    let (cx, cy) = (m[1] / area, m[2] / area);
    let cov = Matrix2::new(m[3] / area - cx * cx, m[4] / area - cx * cy, m[4] / area - cx * cy, m[5] / area - cy * cy);
    let eig = SymmetricEigen::new(cov);
    let (imax, imin) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let axis = eig.eigenvectors.column(imax);
    Ok(RegionShape {
        area,
        centroid: [cx, cy],
        axis_ratio: (eig.eigenvalues[imax] / eig.eigenvalues[imin].max(1e-300)).sqrt(),
        major_angle: axis[1].atan2(axis[0]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framefield::harmonic_cross_field_2d;
    use crate::geometry::generators;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nearest(mesh: &SimplicialMesh, p: [f64; 2]) -> usize {
        (0..mesh.num_vertices())
            .min_by(|&a, &b| {
                let da = (mesh.vertex(a)[0] - p[0]).hypot(mesh.vertex(a)[1] - p[1]);
                let db = (mesh.vertex(b)[0] - p[0]).hypot(mesh.vertex(b)[1] - p[1]);
                da.total_cmp(&db)
            })
            .unwrap()
    }

    #[test]
    fn region_shape_of_an_ellipse() {
        let mesh = generators::square_grid(-1.0, 1.0, 80).unwrap();
        let f: Vec<f64> = (0..mesh.num_vertices())
            .map(|v| {
                let p = mesh.vertex(v);
                -((p[0] / 0.6).powi(2) + (p[1] / 0.3).powi(2))
            })
            .collect();
        let s = superlevel_shape(&mesh, &f, -1.0).unwrap();
        assert!((s.axis_ratio - 2.0).abs() < 0.02, "{}", s.axis_ratio);
        assert!((s.area - std::f64::consts::PI * 0.18).abs() < 0.01);
        assert!(s.major_angle.sin().abs() < 1e-6);
        let all = superlevel_shape(&mesh, &vec![1.0; mesh.num_vertices()], 0.0).unwrap();
        assert!((all.area - 4.0).abs() < 1e-12 && (all.axis_ratio - 1.0).abs() < 1e-12);
        assert!(superlevel_shape(&mesh, &f, 1.0).is_err());
    }

    #[test]
    fn metric_properties() {
        let mesh = generators::disk(0.15).unwrap();
        let field = harmonic_cross_field_2d(&mesh).unwrap();
        let op = assemble_operator(&mesh, &field, 0.1, BoundaryCondition::Neumann).unwrap();
        let emb = build_embedding(&op, 16, &EigenOptions::default()).unwrap();
        assert_eq!(emb.num_modes(), 16);
        assert_eq!(emb.zero_modes, 1);
        assert!(emb.values.iter().all(|&l| l > 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = mesh.num_vertices();
        for _ in 0..300 {
            let (p, q, r) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
            assert_eq!(emb.distance(p, p), 0.0);
            assert_eq!(emb.distance(p, q), emb.distance(q, p));
            assert!(emb.distance(p, r) <= emb.distance(p, q) + emb.distance(q, r) + 1e-15);
            assert!(emb.distance_truncated(p, q, 8) <= emb.distance_truncated(p, q, 9));
        }
        let d = distance_field(&emb, 3).unwrap();
        assert_eq!(d[3], 0.0);
        assert!(distance_field(&emb, n).is_err());
        let nat = assemble_operator(&mesh, &field, 0.1, BoundaryCondition::Natural).unwrap();
        assert!(build_embedding(&nat, 4, &EigenOptions::default()).is_err());
    }

    #[test]
    fn unit_epsilon_is_biharmonic() {
        let mesh = generators::disk(0.2).unwrap();
        let field = harmonic_cross_field_2d(&mesh).unwrap();
        let op = assemble_operator(&mesh, &field, 1.0, BoundaryCondition::Neumann).unwrap();
        let a = build_embedding(&op, 12, &EigenOptions::default()).unwrap();
        let b = biharmonic_embedding(&mesh, 12, &EigenOptions::default()).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.coords, b.coords);
    }

    #[test]
    fn descent_paths() {
        let mesh = generators::disk(0.1).unwrap();
        let field = harmonic_cross_field_2d(&mesh).unwrap();
        let op = assemble_operator(&mesh, &field, 0.1, BoundaryCondition::Neumann).unwrap();
        let emb = build_embedding(&op, 32, &EigenOptions::default()).unwrap();
        let src = nearest(&mesh, [0.3, 0.1]);
        let d = distance_field(&emb, src).unwrap();
        assert_eq!(trace_descent_path(&mesh, &d, src).unwrap(), vec![src]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..40 {
            let start = rng.gen_range(0..mesh.num_vertices());
            let path = trace_descent_path(&mesh, &d, start).unwrap();
            assert!(path.windows(2).all(|w| d[w[1]] < d[w[0]]));
        }
        assert!(trace_descent_path(&mesh, &d[1..], 0).is_err());
    }

    #[test]
    fn coloring_bounds_and_constants() {
        let mesh = generators::disk(0.15).unwrap();
        let field = harmonic_cross_field_2d(&mesh).unwrap();
        let op = assemble_operator(&mesh, &field, 0.01, BoundaryCondition::Natural).unwrap();
        let bnd = mesh.boundary_vertices();
        let flat = vec![[0.2, 0.5, 0.9]; bnd.len()];
        let c = color_by_boundary(&mesh, &op, &flat, &QpOptions::default()).unwrap();
        assert!(c.iter().all(|x| (x[0] - 0.2).abs() < 1e-8 && (x[1] - 0.5).abs() < 1e-8 && (x[2] - 0.9).abs() < 1e-8));
        let colors: Vec<[f64; 3]> = bnd
            .iter()
            .map(|&v| {
                let p = mesh.vertex(v);
                let a = p[1].atan2(p[0]);
                [0.5 + 0.5 * (2.0 * a).cos(), if p[0] > 0.0 { 1.0 } else { 0.0 }, 0.5 + 0.4 * a.sin()]
            })
            .collect();
        let c = color_by_boundary(&mesh, &op, &colors, &QpOptions::default()).unwrap();
        for ch in 0..3 {
            let lo = colors.iter().map(|x| x[ch]).fold(f64::INFINITY, f64::min);
            let hi = colors.iter().map(|x| x[ch]).fold(f64::NEG_INFINITY, f64::max);
            assert!(c.iter().all(|x| x[ch] >= lo && x[ch] <= hi));
        }
        let bad = vec![[1.5, 0.0, 0.0]; bnd.len()];
        assert!(color_by_boundary(&mesh, &op, &bad, &QpOptions::default()).is_err());
    }
}
