//! Simplicial meshes of planar (triangles) and volumetric (tetrahedra)
//! domains, with the measures and gradients needed by the mixed FEM.

pub mod generators;
pub mod io;
mod locate;
mod refine;

use std::collections::HashMap;

use nalgebra::{Matrix2, Matrix3};

use crate::sparse::CsrMatrix;
use crate::{Error, Exec, Result};

pub use locate::PointLocator;
pub use refine::refine_uniform;

/// Outward-oriented local facets of a positively oriented triangle.
const TRI_FACETS: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];
/// Outward-oriented local facets of a positively oriented tetrahedron.
const TET_FACETS: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// Triangle mesh (`dim == 2`) or tetrahedral mesh (`dim == 3`).
///
/// Vertices are stored as 3-vectors; for planar meshes the third coordinate is
/// always zero. Elements are positively oriented.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplicialMesh {
    dim: usize,
    vertices: Vec<[f64; 3]>,
    elements: Vec<usize>,
    boundary_facets: Vec<usize>,
}

impl SimplicialMesh {
    /// Validates and builds a mesh. Elements are flat `dim + 1` tuples.
    ///
    /// A mesh whose elements are *all* negatively oriented is flipped; a mix of
    /// orientations is an inverted-element error.
    pub fn new(dim: usize, vertices: Vec<[f64; 3]>, mut elements: Vec<usize>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Geometry(format!("unsupported dimension {dim}")));
        }
        let k = dim + 1;
        if elements.is_empty() || elements.len() % k != 0 {
            return Err(Error::Geometry("element list is empty or ragged".into()));
        }
        if let Some(&bad) = elements.iter().find(|&&i| i >= vertices.len()) {
            return Err(Error::Geometry(format!("vertex index {bad} out of range")));
        }
        if dim == 2 && vertices.iter().any(|v| v[2] != 0.0) {
            return Err(Error::Geometry("planar mesh has nonzero z coordinates".into()));
        }

        let scale = bbox_diagonal(&vertices).max(f64::MIN_POSITIVE);
        let tol = 1e-13 * scale.powi(dim as i32);
        let mut signs = Vec::with_capacity(elements.len() / k);
        for (e, el) in elements.chunks(k).enumerate() {
            let v = signed_volume(dim, &vertices, el);
            if v.abs() <= tol || !v.is_finite() {
                return Err(Error::Geometry(format!("element {e} is degenerate (volume {v:e})")));
            }
            signs.push(v > 0.0);
        }
        if signs.iter().all(|s| !s) {
            for el in elements.chunks_mut(k) {
                el.swap(0, 1);
            }
        } else if let Some(e) = signs.iter().position(|s| !s) {
            return Err(Error::Geometry(format!("element {e} is inverted")));
        }

        let mut seen = HashMap::new();
        for (e, el) in elements.chunks(k).enumerate() {
            let mut key = [usize::MAX; 4];
            key[..k].copy_from_slice(el);
            key[..k].sort_unstable();
            if key[..k].windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Geometry(format!("element {e} repeats a vertex")));
            }
            if let Some(prev) = seen.insert(key, e) {
                return Err(Error::Geometry(format!("elements {prev} and {e} are duplicates")));
            }
        }

        let boundary_facets = find_boundary_facets(dim, &elements)?;
        Ok(Self {
            dim,
            vertices,
            elements,
            boundary_facets,
        })
    }

    pub fn from_triangles(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> Result<Self> {
        Self::new(
            2,
            vertices.iter().map(|p| [p[0], p[1], 0.0]).collect(),
            triangles.iter().flatten().copied().collect(),
        )
    }

    pub fn from_tetrahedra(vertices: &[[f64; 3]], tets: &[[usize; 4]]) -> Result<Self> {
        Self::new(3, vertices.to_vec(), tets.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of independent components of a symmetric `dim x dim` tensor.
    pub fn mandel_dim(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len() / (self.dim + 1)
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i][..self.dim]
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.elements[e * k..(e + 1) * k]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.elements.chunks(self.dim + 1)
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.boundary_facets.len() / self.dim
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = &[usize]> {
        self.boundary_facets.chunks(self.dim)
    }

    /// Sorted list of vertices on the boundary.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut v = self.boundary_facets.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for &v in &self.boundary_facets {
            mask[v] = true;
        }
        mask
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        let mask = self.boundary_mask();
        (0..self.num_vertices()).filter(|&v| !mask[v]).collect()
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        signed_volume(self.dim, &self.vertices, self.element(e))
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.num_elements()).map(|e| self.element_volume(e)).sum()
    }

    /// Unique edges as sorted vertex pairs, in lexicographic order.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges = Vec::new();
        for el in self.elements() {
            for i in 0..el.len() {
                for j in i + 1..el.len() {
                    edges.push([el[i].min(el[j]), el[i].max(el[j])]);
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Sorted 1-ring neighbours of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.num_vertices()];
        for [a, b] in self.edges() {
            nbrs[a].push(b);
            nbrs[b].push(a);
        }
        for n in &mut nbrs {
            n.sort_unstable();
        }
        nbrs
    }

    /// Elements incident to each vertex, in increasing order.
    pub fn vertex_elements(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.num_vertices()];
        for (e, el) in self.elements().enumerate() {
            for &v in el {
                inc[v].push(e);
            }
        }
        inc
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        dist(&self.vertices[a], &self.vertices[b])
    }

    /// Same connectivity with every vertex moved by `f`. Fails if the map
    /// inverts or collapses an element.
    pub fn map_vertices(&self, f: impl Fn(&[f64]) -> [f64; 3]) -> Result<Self> {
        let vertices = (0..self.num_vertices())
            .map(|i| {
                let mut p = f(self.vertex(i));
                if self.dim == 2 {
                    p[2] = 0.0;
                }
                p
            })
            .collect::<Vec<_>>();
        let k = self.dim + 1;
        for (e, el) in self.elements.chunks(k).enumerate() {
            if signed_volume(self.dim, &vertices, el) <= 0.0 {
                return Err(Error::Geometry(format!("mapped element {e} is inverted")));
            }
        }
        Ok(Self {
            dim: self.dim,
            vertices,
            elements: self.elements.clone(),
            boundary_facets: self.boundary_facets.clone(),
        })
    }

    /// Constant gradients of the barycentric hat functions on element `e`
    /// (one row per local vertex) and the element volume.
    pub fn shape_gradients(&self, e: usize) -> ([[f64; 3]; 4], f64) {
        shape_gradients(self.dim, &self.vertices, self.element(e))
    }

    /// Barycentric coordinates of `p` with respect to element `e`.
    pub fn barycentric(&self, e: usize, p: &[f64]) -> [f64; 4] {
        let el = self.element(e);
        let (grads, _) = self.shape_gradients(e);
        let mut b = [0.0; 4];
        let p0 = &self.vertices[el[0]];
        let mut rest = 0.0;
        for a in 1..=self.dim {
            b[a] = (0..self.dim).map(|j| grads[a][j] * (p[j] - p0[j])).sum();
            rest += b[a];
        }
        b[0] = 1.0 - rest;
        b
    }
}

fn bbox_diagonal(vertices: &[[f64; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in vertices {
        for j in 0..3 {
            lo[j] = lo[j].min(v[j]);
            hi[j] = hi[j].max(v[j]);
        }
    }
    dist(&lo, &hi)
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn signed_volume(dim: usize, vertices: &[[f64; 3]], el: &[usize]) -> f64 {
    let p0 = vertices[el[0]];
    let d = |a: usize, j: usize| vertices[el[a]][j] - p0[j];
    if dim == 2 {
        0.5 * (d(1, 0) * d(2, 1) - d(1, 1) * d(2, 0))
    } else {
        let m = Matrix3::new(
            d(1, 0),
            d(2, 0),
            d(3, 0),
            d(1, 1),
            d(2, 1),
            d(3, 1),
            d(1, 2),
            d(2, 2),
            d(3, 2),
        );
        m.determinant() / 6.0
    }
}

fn shape_gradients(dim: usize, vertices: &[[f64; 3]], el: &[usize]) -> ([[f64; 3]; 4], f64) {
    let p0 = vertices[el[0]];
    let d = |a: usize, j: usize| vertices[el[a]][j] - p0[j];
    let mut g = [[0.0; 3]; 4];
    let vol;
    if dim == 2 {
        // Columns are edge vectors; rows of the inverse are the hat gradients.
        let jac = Matrix2::new(d(1, 0), d(2, 0), d(1, 1), d(2, 1));
        vol = 0.5 * jac.determinant();
        let inv = jac.try_inverse().expect("degenerate triangle");
        for a in 0..2 {
            for j in 0..2 {
                g[a + 1][j] = inv[(a, j)];
            }
        }
    } else {
        let jac = Matrix3::new(
            d(1, 0),
            d(2, 0),
            d(3, 0),
            d(1, 1),
            d(2, 1),
            d(3, 1),
            d(1, 2),
            d(2, 2),
            d(3, 2),
        );
        vol = jac.determinant() / 6.0;
        let inv = jac.try_inverse().expect("degenerate tetrahedron");
        for a in 0..3 {
            for j in 0..3 {
                g[a + 1][j] = inv[(a, j)];
            }
        }
    }
    for j in 0..dim {
        g[0][j] = -(1..=dim).map(|a| g[a][j]).sum::<f64>();
    }
    (g, vol)
}

fn find_boundary_facets(dim: usize, elements: &[usize]) -> Result<Vec<usize>> {
    let k = dim + 1;
    let key = |f: &[usize]| {
        let mut s = [usize::MAX; 3];
        s[..f.len()].copy_from_slice(f);
        s[..f.len()].sort_unstable();
        s
    };
    let local: Vec<&[usize]> = if dim == 2 {
        TRI_FACETS.iter().map(|f| &f[..]).collect()
    } else {
        TET_FACETS.iter().map(|f| &f[..]).collect()
    };
    let mut count: HashMap<[usize; 3], u32> = HashMap::new();
    for el in elements.chunks(k) {
        for lf in &local {
            let f: Vec<usize> = lf.iter().map(|&i| el[i]).collect();
            *count.entry(key(&f)).or_insert(0) += 1;
        }
    }
    if let Some((f, c)) = count.iter().find(|(_, &c)| c > 2) {
        return Err(Error::Geometry(format!(
            "non-manifold facet {:?} shared by {c} elements",
            &f[..dim]
        )));
    }
    let mut out = Vec::new();
    for el in elements.chunks(k) {
        for lf in &local {
            let f: Vec<usize> = lf.iter().map(|&i| el[i]).collect();
            if count[&key(&f)] == 1 {
                out.extend(f);
            }
        }
    }
    Ok(out)
}

/// Per-element and per-vertex measures plus boundary frames.
#[derive(Clone, Debug)]
pub struct MeshMeasures {
    pub element_volumes: Vec<f64>,
    /// Barycentric dual cell volume of every vertex.
    pub dual_volumes: Vec<f64>,
    /// Sorted boundary vertices; the remaining boundary arrays are indexed
    /// parallel to this list.
    pub boundary_vertices: Vec<usize>,
    pub boundary_normals: Vec<[f64; 3]>,
    /// Orthonormal basis of the tangent space (only the first entry is used in 2D).
    pub boundary_tangents: Vec<[[f64; 3]; 2]>,
    /// Lumped facet measure (facet measure / dim summed over incident facets).
    pub boundary_areas: Vec<f64>,
    boundary_slot: Vec<usize>,
}

impl MeshMeasures {
    /// Position of `v` in `boundary_vertices`, if it is a boundary vertex.
    pub fn boundary_slot(&self, v: usize) -> Option<usize> {
        match self.boundary_slot[v] {
            usize::MAX => None,
            s => Some(s),
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.element_volumes.iter().sum()
    }
}

/// Unit outward normal and measure of a boundary facet.
pub fn facet_normal(mesh: &SimplicialMesh, facet: &[usize]) -> ([f64; 3], f64) {
    let v = mesh.vertices();
    if mesh.dim() == 2 {
        let (a, b) = (v[facet[0]], v[facet[1]]);
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        ([d[1] / len, -d[0] / len, 0.0], len)
    } else {
        let (a, b, c) = (v[facet[0]], v[facet[1]], v[facet[2]]);
        let n = cross(&sub(&b, &a), &sub(&c, &a));
        let len = norm3(&n);
        ([n[0] / len, n[1] / len, n[2] / len], 0.5 * len)
    }
}

pub fn compute_measures(mesh: &SimplicialMesh) -> Result<MeshMeasures> {
    let dim = mesh.dim();
    let element_volumes: Vec<f64> = (0..mesh.num_elements()).map(|e| mesh.element_volume(e)).collect();
    if let Some(e) = element_volumes.iter().position(|&v| v <= 0.0) {
        return Err(Error::Geometry(format!("element {e} has zero measure")));
    }
    let mut dual_volumes = vec![0.0; mesh.num_vertices()];
    for (el, &vol) in mesh.elements().zip(&element_volumes) {
        for &v in el {
            dual_volumes[v] += vol / (dim + 1) as f64;
        }
    }

    let boundary_vertices = mesh.boundary_vertices();
    let mut boundary_slot = vec![usize::MAX; mesh.num_vertices()];
    for (s, &v) in boundary_vertices.iter().enumerate() {
        boundary_slot[v] = s;
    }
    let nb = boundary_vertices.len();
    let mut acc = vec![[0.0; 3]; nb];
    let mut boundary_areas = vec![0.0; nb];
    for f in mesh.boundary_facets() {
        let (n, meas) = facet_normal(mesh, f);
        for &v in f {
            let s = boundary_slot[v];
            for j in 0..3 {
                acc[s][j] += meas * n[j];
            }
            boundary_areas[s] += meas / dim as f64;
        }
    }
    let mut boundary_normals = Vec::with_capacity(nb);
    let mut boundary_tangents = Vec::with_capacity(nb);
    for (s, a) in acc.iter().enumerate() {
        let len = norm3(a);
        if len <= 1e-300 {
            return Err(Error::Geometry(format!(
                "boundary normal vanishes at vertex {}",
                boundary_vertices[s]
            )));
        }
        let n = [a[0] / len, a[1] / len, a[2] / len];
        boundary_normals.push(n);
        boundary_tangents.push(tangent_basis(dim, &n));
    }
    Ok(MeshMeasures {
        element_volumes,
        dual_volumes,
        boundary_vertices,
        boundary_normals,
        boundary_tangents,
        boundary_areas,
        boundary_slot,
    })
}

fn tangent_basis(dim: usize, n: &[f64; 3]) -> [[f64; 3]; 2] {
    if dim == 2 {
        return [[-n[1], n[0], 0.0], [0.0; 3]];
    }
    // Helper axis least aligned with n.
    let k = (0..3)
        .min_by(|&a, &b| n[a].abs().partial_cmp(&n[b].abs()).unwrap())
        .unwrap();
    let mut h = [0.0; 3];
    h[k] = 1.0;
    let d = h[0] * n[0] + h[1] * n[1] + h[2] * n[2];
    let t1 = [h[0] - d * n[0], h[1] - d * n[1], h[2] - d * n[2]];
    let l = norm3(&t1);
    let t1 = [t1[0] / l, t1[1] / l, t1[2] / l];
    let t2 = cross(n, &t1);
    [t1, t2]
}

pub(crate) fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Piecewise-constant gradient operator: `(#elements·dim) x #vertices`, rows
/// grouped per element.
pub fn gradient_matrix(mesh: &SimplicialMesh) -> CsrMatrix {
    gradient_matrix_with(mesh, Exec::default())
}

pub fn gradient_matrix_with(mesh: &SimplicialMesh, exec: Exec) -> CsrMatrix {
    let dim = mesh.dim();
    let triplets = exec.flat_map_ranges(mesh.num_elements(), |range| {
        let mut t = Vec::with_capacity(range.len() * dim * (dim + 1));
        for e in range {
            let (g, _) = mesh.shape_gradients(e);
            for j in 0..dim {
                for (a, &v) in mesh.element(e).iter().enumerate() {
                    t.push((e * dim + j, v, g[a][j]));
                }
            }
        }
        t
    });
    CsrMatrix::from_triplets(mesh.num_elements() * dim, mesh.num_vertices(), &triplets)
}

/// Average length over unique edges.
pub fn mean_edge_length(mesh: &SimplicialMesh) -> f64 {
    let edges = mesh.edges();
    edges.iter().map(|&[a, b]| mesh.distance(a, b)).sum::<f64>() / edges.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn unit_square() -> SimplicialMesh {
        SimplicialMesh::from_triangles(
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            &[[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    fn unit_tet() -> SimplicialMesh {
        SimplicialMesh::from_tetrahedra(
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            &[[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn square_has_four_boundary_edges() {
        let m = unit_square();
        assert_eq!(m.num_boundary_facets(), 4);
        assert_eq!(m.boundary_vertices(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn tet_has_four_faces_and_volume_one_sixth() {
        let m = unit_tet();
        assert_eq!(m.num_boundary_facets(), 4);
        assert_relative_eq!(m.element_volume(0), 1.0 / 6.0, epsilon = 1e-15);
        // Outward orientation: face normals point away from the centroid.
        let c = [0.25, 0.25, 0.25];
        for f in m.boundary_facets() {
            let (n, _) = facet_normal(&m, f);
            let p = m.vertices()[f[0]];
            let d = sub(&p, &c);
            assert!(n[0] * d[0] + n[1] * d[1] + n[2] * d[2] > 0.0);
        }
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let r = SimplicialMesh::from_triangles(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], &[[0, 1, 2]]);
        assert!(matches!(r, Err(Error::Geometry(_))));
    }

    #[test]
    fn mixed_orientation_is_rejected_but_global_flip_is_repaired() {
        let v = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(SimplicialMesh::from_triangles(&v, &[[0, 1, 2], [0, 3, 2]]).is_err());
        let m = SimplicialMesh::from_triangles(&v, &[[0, 2, 1], [0, 3, 2]]).unwrap();
        assert!((0..2).all(|e| m.element_volume(e) > 0.0));
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [1.5, 0.5]];
        // Edge (0,1) would be shared by three triangles; the third overlaps but
        // is individually valid.
        let r = SimplicialMesh::from_triangles(&v, &[[0, 1, 2], [1, 0, 3], [0, 1, 4]]);
        assert!(r.is_err());
    }

    #[test]
    fn duplicate_elements_are_rejected() {
        let v = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(SimplicialMesh::from_triangles(&v, &[[0, 1, 2], [1, 2, 0]]).is_err());
    }

    #[test]
    fn square_measures() {
        let m = unit_square();
        let meas = compute_measures(&m).unwrap();
        assert_relative_eq!(meas.element_volumes[0], 0.5);
        assert_relative_eq!(meas.dual_volumes.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        // Corner normal is the average of two perpendicular facet normals.
        let s = meas.boundary_slot(0).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(meas.boundary_normals[s][0], -h, epsilon = 1e-15);
        assert_relative_eq!(meas.boundary_normals[s][1], -h, epsilon = 1e-15);
        assert_relative_eq!(meas.boundary_areas.iter().sum::<f64>(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn straight_edge_normal_is_exact() {
        let m = generators::square_grid(-1.0, 1.0, 4).unwrap();
        let meas = compute_measures(&m).unwrap();
        for (s, &v) in meas.boundary_vertices.iter().enumerate() {
            let p = m.vertex(v);
            if (p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 0.9 {
                assert_relative_eq!(meas.boundary_normals[s][0], 1.0, epsilon = 1e-15);
                assert_eq!(meas.boundary_normals[s][1], 0.0);
            }
        }
    }

    #[test]
    fn tangents_are_orthonormal_in_3d() {
        let m = generators::ball(2).unwrap();
        let meas = compute_measures(&m).unwrap();
        for (n, t) in meas.boundary_normals.iter().zip(&meas.boundary_tangents) {
            let d = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
            assert_relative_eq!(d(n, n), 1.0, epsilon = 1e-14);
            assert_relative_eq!(d(&t[0], &t[0]), 1.0, epsilon = 1e-14);
            assert_relative_eq!(d(&t[1], &t[1]), 1.0, epsilon = 1e-14);
            assert!(d(n, &t[0]).abs() < 1e-14 && d(n, &t[1]).abs() < 1e-14 && d(&t[0], &t[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn corner_triangle_gradient() {
        let m = SimplicialMesh::from_triangles(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], &[[0, 1, 2]]).unwrap();
        let g = gradient_matrix(&m);
        let grad = g.mul_vec(&[0.0, 1.0, 0.0]);
        assert_relative_eq!(grad[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(grad[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn gradient_is_exact_on_affine_functions() {
        for mesh in [generators::disk(0.3).unwrap(), generators::ball(2).unwrap()] {
            let g = gradient_matrix(&mesh);
            let a = [0.3, -1.7, 2.2];
            let u: Vec<f64> = mesh
                .vertices()
                .iter()
                .map(|p| 0.5 + a[0] * p[0] + a[1] * p[1] + a[2] * p[2])
                .collect();
            let gu = g.mul_vec(&u);
            for (k, val) in gu.iter().enumerate() {
                assert!((val - a[k % mesh.dim()]).abs() < 1e-12);
            }
            let c = g.mul_vec(&vec![3.0; mesh.num_vertices()]);
            assert!(c.iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn gradient_parallel_matches_sequential() {
        let mesh = generators::disk(0.05).unwrap();
        assert_eq!(
            gradient_matrix_with(&mesh, Exec::Parallel),
            gradient_matrix_with(&mesh, Exec::Sequential)
        );
    }

    #[test]
    fn mean_edge_of_square() {
        let expected = (4.0 + 2f64.sqrt()) / 5.0;
        assert_relative_eq!(mean_edge_length(&unit_square()), expected, epsilon = 1e-15);
        assert_relative_eq!(expected, 1.0828, epsilon = 1e-4);
    }

    #[test]
    fn regular_tet_mean_edge_is_one() {
        let h = 0.5 / 2f64.sqrt();
        let m = SimplicialMesh::from_tetrahedra(
            &[[0.5, 0.0, -h], [-0.5, 0.0, -h], [0.0, 0.5, h], [0.0, -0.5, h]],
            &[[0, 1, 2, 3]],
        )
        .unwrap();
        assert_relative_eq!(mean_edge_length(&m), 1.0, epsilon = 1e-15);
    }
}
