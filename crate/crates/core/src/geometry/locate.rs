use super::SimplicialMesh;

/// Uniform-grid bucket index for point-in-simplex queries.
pub struct PointLocator<'a> {
    mesh: &'a SimplicialMesh,
    lo: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<usize>>,
}

/// Barycentric coordinates below `-INSIDE_TOL` mean "outside the element".
const INSIDE_TOL: f64 = 1e-10;

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a SimplicialMesh) -> Self {
        let dim = mesh.dim();
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for j in 0..dim {
            lo[j] = mesh.vertices().iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            hi[j] = mesh.vertices().iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
        }
        let extent: f64 = (0..dim).map(|j| hi[j] - lo[j]).fold(0.0, f64::max);
        let cells_per_side = ((mesh.num_elements() as f64).powf(1.0 / dim as f64)).ceil().max(1.0);
        let cell = (extent / cells_per_side).max(1e-300);
        let mut dims = [1usize; 3];
        for j in 0..dim {
            dims[j] = (((hi[j] - lo[j]) / cell).floor() as usize + 1).max(1);
        }
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (e, el) in mesh.elements().enumerate() {
            let mut a = [0usize; 3];
            let mut b = [0usize; 3];
            for j in 0..dim {
                let xs = el.iter().map(|&v| mesh.vertices()[v][j]);
                let (mn, mx) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(m, n), x| (m.min(x), n.max(x)));
                a[j] = Self::coord(mn, lo[j], cell, dims[j]);
                b[j] = Self::coord(mx, lo[j], cell, dims[j]);
            }
            for i in a[0]..=b[0] {
                for k in a[1]..=b[1] {
                    for l in a[2]..=b[2] {
                        buckets[(i * dims[1] + k) * dims[2] + l].push(e);
                    }
                }
            }
        }
        Self {
            mesh,
            lo,
            cell,
            dims,
            buckets,
        }
    }

    fn coord(x: f64, lo: f64, cell: f64, n: usize) -> usize {
        (((x - lo) / cell).floor().max(0.0) as usize).min(n - 1)
    }

    /// Element containing `p` and the barycentric coordinates of `p` in it.
    ///
    /// Points outside the mesh resolve to the element whose smallest
    /// barycentric coordinate is largest (the least-violated element); the
    /// returned `bool` reports whether `p` was inside.
    pub fn locate(&self, p: &[f64]) -> (usize, [f64; 4], bool) {
        let dim = self.mesh.dim();
        let mut c = [0usize; 3];
        for j in 0..dim {
            c[j] = Self::coord(p[j], self.lo[j], self.cell, self.dims[j]);
        }
        let bucket = &self.buckets[(c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]];
        if let Some(hit) = self.best_of(bucket.iter().copied(), p) {
            if hit.2 {
                return hit;
            }
        }
        self.best_of(0..self.mesh.num_elements(), p)
            .expect("mesh has at least one element")
    }

    fn best_of(&self, elems: impl Iterator<Item = usize>, p: &[f64]) -> Option<(usize, [f64; 4], bool)> {
        let dim = self.mesh.dim();
        let mut best: Option<(usize, [f64; 4], f64)> = None;
        for e in elems {
            let b = self.mesh.barycentric(e, p);
            let worst = b[..=dim].iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -INSIDE_TOL {
                return Some((e, b, true));
            }
            if best.as_ref().is_none_or(|x| worst > x.2) {
                best = Some((e, b, worst));
            }
        }
        best.map(|(e, b, _)| (e, b, false))
    }

    /// Barycentric interpolation of per-vertex `values` at `p`.
    pub fn interpolate(&self, values: &[f64], p: &[f64]) -> f64 {
        let (e, b, _) = self.locate(p);
        self.mesh
            .element(e)
            .iter()
            .zip(b)
            .map(|(&v, w)| w * values[v])
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generators;

    #[test]
    fn locates_vertices_and_interpolates_linears() {
        let m = generators::disk(0.1).unwrap();
        let loc = PointLocator::new(&m);
        let f: Vec<f64> = m.vertices().iter().map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
        for q in [[0.1, 0.2], [-0.5, 0.3], [0.0, -0.9], [0.33, 0.44]] {
            let (_, _, inside) = loc.locate(&q);
            assert!(inside);
            let v = loc.interpolate(&f, &q);
            assert!((v - (2.0 * q[0] - q[1] + 0.5)).abs() < 1e-12);
        }
        let (_, _, inside) = loc.locate(&[3.0, 0.0]);
        assert!(!inside);
    }

    #[test]
    fn locates_in_3d() {
        let m = generators::ball(3).unwrap();
        let loc = PointLocator::new(&m);
        let (e, b, inside) = loc.locate(&[0.1, -0.2, 0.3]);
        assert!(inside);
        let p: Vec<f64> = (0..3)
            .map(|j| m.element(e).iter().zip(b).map(|(&v, w)| w * m.vertices()[v][j]).sum())
            .collect();
        assert!((p[0] - 0.1).abs() < 1e-12 && (p[1] + 0.2).abs() < 1e-12 && (p[2] - 0.3).abs() < 1e-12);
    }
}
