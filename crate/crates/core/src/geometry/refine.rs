use std::collections::HashMap;

use super::{dist, signed_volume, SimplicialMesh};

/// Uniform midpoint refinement: 1-to-4 for triangles, 1-to-8 for tetrahedra.
///
/// Coarse vertices keep their indices; each edge midpoint is appended in order
/// of first appearance. The central octahedron of a tetrahedron is split along
/// its shortest diagonal.
pub fn refine_uniform(mesh: &SimplicialMesh) -> SimplicialMesh {
    let dim = mesh.dim();
    let mut vertices = mesh.vertices().to_vec();
    let mut midpoint: HashMap<[usize; 2], usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 3]>| -> usize {
        let key = [a.min(b), a.max(b)];
        *midpoint.entry(key).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([
                0.5 * (p[0] + q[0]),
                0.5 * (p[1] + q[1]),
                0.5 * (p[2] + q[2]),
            ]);
            vertices.len() - 1
        })
    };

    let mut elements = Vec::with_capacity(mesh.num_elements() * (1 << dim) * (dim + 1));
    for el in mesh.elements() {
        if dim == 2 {
            let [a, b, c] = [el[0], el[1], el[2]];
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            elements.extend([a, ab, ca, ab, b, bc, ca, bc, c, ab, bc, ca]);
        } else {
            let v = [el[0], el[1], el[2], el[3]];
            let mut m = [[0usize; 4]; 4];
            for i in 0..4 {
                for j in i + 1..4 {
                    let k = mid(v[i], v[j], &mut vertices);
                    m[i][j] = k;
                    m[j][i] = k;
                }
            }
            elements.extend([v[0], m[0][1], m[0][2], m[0][3]]);
            elements.extend([m[0][1], v[1], m[1][2], m[1][3]]);
            elements.extend([m[0][2], m[1][2], v[2], m[2][3]]);
            elements.extend([m[0][3], m[1][3], m[2][3], v[3]]);

            // Octahedron diagonals join midpoints of opposite edges.
            let diagonals = [
                (m[0][1], m[2][3], [m[0][2], m[1][2], m[1][3], m[0][3]]),
                (m[0][2], m[1][3], [m[0][1], m[0][3], m[2][3], m[1][2]]),
                (m[0][3], m[1][2], [m[0][1], m[0][2], m[2][3], m[1][3]]),
            ];
            let (p, q, ring) = diagonals
                .into_iter()
                .min_by(|x, y| {
                    dist(&vertices[x.0], &vertices[x.1])
                        .partial_cmp(&dist(&vertices[y.0], &vertices[y.1]))
                        .unwrap()
                })
                .unwrap();
            for i in 0..4 {
                let mut t = [p, q, ring[i], ring[(i + 1) % 4]];
                if signed_volume(3, &vertices, &t) < 0.0 {
                    t.swap(2, 3);
                }
                elements.extend(t);
            }
        }
    }
    SimplicialMesh::new(dim, vertices, elements).expect("refinement of a valid mesh is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generators, mean_edge_length};
    use approx::assert_relative_eq;

    #[test]
    fn square_counts() {
        let m = SimplicialMesh::from_triangles(
            &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
            &[[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let r = refine_uniform(&m);
        assert_eq!(r.num_elements(), 8);
        assert_eq!(r.num_vertices(), 9);
        assert_eq!(&r.vertices()[..4], m.vertices());
        // 16 edges: 8 boundary halves, 2 diagonal halves, 6 midsegments.
        let expected = (6.0 + 2.0 * 2f64.sqrt()) / 16.0;
        assert_relative_eq!(mean_edge_length(&r), expected, epsilon = 1e-15);
    }

    #[test]
    fn tet_counts_and_volume() {
        let m = SimplicialMesh::from_tetrahedra(
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            &[[0, 1, 2, 3]],
        )
        .unwrap();
        let r = refine_uniform(&m);
        assert_eq!(r.num_elements(), 8);
        assert_eq!(r.num_vertices(), 10);
        assert_relative_eq!(r.total_volume(), m.total_volume(), max_relative = 1e-12);
        assert_eq!(r.num_boundary_facets(), 16);
    }

    #[test]
    fn refinement_preserves_volume_and_boundary() {
        for m in [generators::disk(0.25).unwrap(), generators::ball(2).unwrap()] {
            let r = refine_uniform(&m);
            assert_relative_eq!(r.total_volume(), m.total_volume(), max_relative = 1e-12);
            assert_eq!(r.num_boundary_facets(), m.num_boundary_facets() << (m.dim() - 1));
            // Every coarse boundary vertex stays on the boundary.
            let mask = r.boundary_mask();
            assert!(m.boundary_vertices().iter().all(|&v| mask[v]));
        }
    }

    #[test]
    fn triangle_refinement_halves_every_edge() {
        // Every child edge is half of a parent edge (a split half or a
        // midsegment), so the mean halves up to the change in edge multiset.
        let m = generators::disk(0.2).unwrap();
        let r = refine_uniform(&m);
        let ratio = mean_edge_length(&r) / mean_edge_length(&m);
        assert!((ratio - 0.5).abs() < 0.01, "ratio {ratio}");
        let coarse: Vec<f64> = m.edges().iter().map(|&[a, b]| m.distance(a, b)).collect();
        for [a, b] in r.edges() {
            let half = 2.0 * r.distance(a, b);
            assert!(coarse.iter().any(|&l| (l - half).abs() < 1e-12));
        }
    }
}
