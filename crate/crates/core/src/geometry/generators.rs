//! Test and experiment domains: squares, disks, annuli, balls, cylinders.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{signed_volume, SimplicialMesh};
use crate::{Error, Result};

/// Structured triangulation of `[lo, hi]²` with `n x n` cells, every cell
/// split along its `(lo, lo) → (hi, hi)` diagonal.
///
/// The alternating (checkerboard) split is avoided on purpose: its vertices
/// have degree 4 and 8 in turn and the weak Hessian of a quadratic is not
/// reproduced there, so fourth-order spectra converge to the wrong limit.
pub fn square_grid(lo: f64, hi: f64, n: usize) -> Result<SimplicialMesh> {
    rectangle_grid([lo, lo], [hi, hi], n, n)
}

pub fn rectangle_grid(lo: [f64; 2], hi: [f64; 2], nx: usize, ny: usize) -> Result<SimplicialMesh> {
    if nx == 0 || ny == 0 || hi[0] <= lo[0] || hi[1] <= lo[1] {
        return Err(Error::InvalidInput("empty rectangle".into()));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut verts = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            verts.push([
                lo[0] + (hi[0] - lo[0]) * i as f64 / nx as f64,
                lo[1] + (hi[1] - lo[1]) * j as f64 / ny as f64,
            ]);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    SimplicialMesh::from_triangles(&verts, &tris)
}

/// Triangulates the band between two closed polylines given by angle-sorted
/// vertex indices by merging them in angular order.
fn stitch(inner: &[(f64, usize)], outer: &[(f64, usize)], tris: &mut Vec<[usize; 3]>) {
    let (n, m) = (inner.len(), outer.len());
    let (mut i, mut j) = (0, 0);
    let ang = |ring: &[(f64, usize)], k: usize| ring[k % ring.len()].0 + 2.0 * PI * (k / ring.len()) as f64;
    while i < n || j < m {
        let advance_inner = if i == n {
            false
        } else if j == m {
            true
        } else {
            ang(inner, i + 1) < ang(outer, j + 1)
        };
        if advance_inner {
            tris.push([inner[i % n].1, outer[j % m].1, inner[(i + 1) % n].1]);
            i += 1;
        } else {
            tris.push([inner[i % n].1, outer[j % m].1, outer[(j + 1) % m].1]);
            j += 1;
        }
    }
}

fn orient_ccw(verts: &[[f64; 2]], tris: &mut [[usize; 3]]) {
    for t in tris.iter_mut() {
        let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if area < 0.0 {
            t.swap(1, 2);
        }
    }
}

/// Unit disk meshed by concentric rings of spacing ≈ `h`; ring `k` carries
/// `6k` vertices, giving near-equilateral triangles.
pub fn disk(h: f64) -> Result<SimplicialMesh> {
    circle_rings(1.0, h)
}

pub fn circle_rings(radius: f64, h: f64) -> Result<SimplicialMesh> {
    if !(h > 0.0 && h < radius) {
        return Err(Error::InvalidInput(format!("disk spacing {h} must be in (0, radius)")));
    }
    let rings = (radius / h).round().max(1.0) as usize;
    let mut verts = vec![[0.0, 0.0]];
    let mut prev: Vec<(f64, usize)> = vec![(0.0, 0)];
    let mut tris = Vec::new();
    for k in 1..=rings {
        let r = radius * k as f64 / rings as f64;
        let count = 6 * k;
        // Small per-ring rotation keeps the angular merge free of exact ties.
        let offset = if k % 2 == 0 { PI / count as f64 } else { 0.0 };
        let ring: Vec<(f64, usize)> = (0..count)
            .map(|i| {
                let t = offset + 2.0 * PI * i as f64 / count as f64;
                verts.push([r * t.cos(), r * t.sin()]);
                (t, verts.len() - 1)
            })
            .collect();
        if k == 1 {
            for i in 0..count {
                tris.push([0, ring[i].1, ring[(i + 1) % count].1]);
            }
        } else {
            stitch(&prev, &ring, &mut tris);
        }
        prev = ring;
    }
    orient_ccw(&verts, &mut tris);
    SimplicialMesh::from_triangles(&verts, &tris)
}

/// Annulus `r_in <= |x| <= r_out` meshed by rings of spacing ≈ `h`.
pub fn annulus(r_in: f64, r_out: f64, h: f64) -> Result<SimplicialMesh> {
    if !(r_in > 0.0 && r_out > r_in && h > 0.0) {
        return Err(Error::InvalidInput("annulus needs 0 < r_in < r_out and h > 0".into()));
    }
    let rings = ((r_out - r_in) / h).round().max(1.0) as usize;
    let mut verts = Vec::new();
    let mut prev: Vec<(f64, usize)> = Vec::new();
    let mut tris = Vec::new();
    for k in 0..=rings {
        let r = r_in + (r_out - r_in) * k as f64 / rings as f64;
        let count = ((2.0 * PI * r / h).round() as usize).max(6);
        let offset = if k % 2 == 1 { PI / count as f64 } else { 0.0 };
        let ring: Vec<(f64, usize)> = (0..count)
            .map(|i| {
                let t = offset + 2.0 * PI * i as f64 / count as f64;
                verts.push([r * t.cos(), r * t.sin()]);
                (t, verts.len() - 1)
            })
            .collect();
        if k > 0 {
            stitch(&prev, &ring, &mut tris);
        }
        prev = ring;
    }
    orient_ccw(&verts, &mut tris);
    SimplicialMesh::from_triangles(&verts, &tris)
}

/// Kuhn (6 tets per cube) triangulation of an `nx x ny x nz` box grid.
fn box_tets(n: [usize; 3]) -> (Vec<[f64; 3]>, Vec<[usize; 4]>) {
    let idx = |i: usize, j: usize, k: usize| (k * (n[1] + 1) + j) * (n[0] + 1) + i;
    let mut verts = Vec::new();
    for k in 0..=n[2] {
        for j in 0..=n[1] {
            for i in 0..=n[0] {
                verts.push([
                    i as f64 / n[0] as f64,
                    j as f64 / n[1] as f64,
                    k as f64 / n[2] as f64,
                ]);
            }
        }
    }
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut tets = Vec::new();
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                for p in &perms {
                    let mut c = [i, j, k];
                    let mut t = [idx(c[0], c[1], c[2]), 0, 0, 0];
                    for (s, &axis) in p.iter().enumerate() {
                        c[axis] += 1;
                        t[s + 1] = idx(c[0], c[1], c[2]);
                    }
                    tets.push(t);
                }
            }
        }
    }
    (verts, tets)
}

fn orient_tets(verts: &[[f64; 3]], tets: &mut [[usize; 4]]) {
    for t in tets.iter_mut() {
        if signed_volume(3, verts, t) < 0.0 {
            t.swap(2, 3);
        }
    }
}

/// Unit ball: a Kuhn-triangulated cube grid (`n` cells per side) pushed
/// radially onto the ball by `x ↦ x‖x‖∞/‖x‖₂`.
pub fn ball(n: usize) -> Result<SimplicialMesh> {
    if n == 0 {
        return Err(Error::InvalidInput("ball needs at least one cell".into()));
    }
    let (verts, mut tets) = box_tets([n, n, n]);
    let verts: Vec<[f64; 3]> = verts
        .iter()
        .map(|p| {
            let x = [2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0, 2.0 * p[2] - 1.0];
            let l2 = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let linf = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if l2 == 0.0 {
                x
            } else {
                let s = linf / l2;
                [x[0] * s, x[1] * s, x[2] * s]
            }
        })
        .collect();
    orient_tets(&verts, &mut tets);
    SimplicialMesh::from_tetrahedra(&verts, &tets)
}

/// Axis-aligned box `[lo, hi]` with `n` Kuhn-split cells per axis.
pub fn box_grid(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Result<SimplicialMesh> {
    let (verts, mut tets) = box_tets(n);
    let verts: Vec<[f64; 3]> = verts
        .iter()
        .map(|p| [0usize, 1, 2].map(|j| lo[j] + (hi[j] - lo[j]) * p[j]))
        .collect();
    orient_tets(&verts, &mut tets);
    SimplicialMesh::from_tetrahedra(&verts, &tets)
}

/// Cylinder of the given radius over `0 <= z <= height`, extruding a ring
/// disk mesh in layers of thickness ≈ `h`. Prisms are split into three
/// tetrahedra with a global-index rule so that shared faces conform.
pub fn cylinder(radius: f64, height: f64, h: f64) -> Result<SimplicialMesh> {
    let base = circle_rings(radius, h)?;
    let layers = (height / h).round().max(1.0) as usize;
    let nb = base.num_vertices();
    let mut verts = Vec::with_capacity(nb * (layers + 1));
    for l in 0..=layers {
        let z = height * l as f64 / layers as f64;
        verts.extend(base.vertices().iter().map(|p| [p[0], p[1], z]));
    }
    let mut tets = Vec::new();
    for l in 0..layers {
        for el in base.elements() {
            let mut t = [el[0], el[1], el[2]];
            t.sort_unstable();
            let [a, b, c] = t.map(|v| v + l * nb);
            let [a2, b2, c2] = t.map(|v| v + (l + 1) * nb);
            tets.push([a, b, c, c2]);
            tets.push([a, b, b2, c2]);
            tets.push([a, a2, b2, c2]);
        }
    }
    orient_tets(&verts, &mut tets);
    SimplicialMesh::from_tetrahedra(&verts, &tets)
}

/// Randomly perturbs interior vertices by up to `amount` times the shortest
/// incident edge, rejecting moves that would invert an element.
pub fn jitter(mesh: &SimplicialMesh, amount: f64, seed: u64) -> SimplicialMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = mesh.dim();
    let mask = mesh.boundary_mask();
    let nbrs = mesh.vertex_neighbors();
    let incident = mesh.vertex_elements();
    let mut verts = mesh.vertices().to_vec();
    let elements: Vec<usize> = mesh.elements().flatten().copied().collect();
    for v in 0..mesh.num_vertices() {
        if mask[v] {
            continue;
        }
        let hmin = nbrs[v]
            .iter()
            .map(|&w| super::dist(&verts[v], &verts[w]))
            .fold(f64::INFINITY, f64::min);
        let old = verts[v];
        for _ in 0..8 {
            let mut p = old;
            for x in p.iter_mut().take(dim) {
                *x += amount * hmin * rng.gen_range(-1.0..1.0);
            }
            verts[v] = p;
            let ok = incident[v].iter().all(|&e| {
                let el = &elements[e * (dim + 1)..(e + 1) * (dim + 1)];
                let vol = signed_volume(dim, &verts, el);
                let vol0 = signed_volume(dim, mesh.vertices(), el);
                vol > 0.2 * vol0
            });
            if ok {
                break;
            }
            verts[v] = old;
        }
    }
    SimplicialMesh::new(dim, verts, elements).expect("jitter keeps elements valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_grid_area() {
        let m = square_grid(-1.0, 1.0, 5).unwrap();
        assert_eq!(m.num_vertices(), 36);
        assert_relative_eq!(m.total_volume(), 4.0, epsilon = 1e-13);
        assert_eq!(m.num_boundary_facets(), 20);
    }

    #[test]
    fn disk_is_a_closed_polygon() {
        let m = disk(0.1).unwrap();
        // 10 rings of 6k points plus the center.
        assert_eq!(m.num_vertices(), 1 + 6 * 55);
        assert_eq!(m.num_boundary_facets(), 60);
        let inscribed = 0.5 * 60.0 * (2.0 * PI / 60.0).sin();
        assert_relative_eq!(m.total_volume(), inscribed, epsilon = 1e-12);
        // Euler characteristic of a disk.
        let chi = m.num_vertices() as i64 - m.edges().len() as i64 + m.num_elements() as i64;
        assert_eq!(chi, 1);
    }

    #[test]
    fn annulus_has_two_boundary_loops() {
        let m = annulus(0.5, 1.0, 0.1).unwrap();
        let chi = m.num_vertices() as i64 - m.edges().len() as i64 + m.num_elements() as i64;
        assert_eq!(chi, 0);
    }

    #[test]
    fn ball_and_cylinder_are_valid() {
        let b = ball(4).unwrap();
        assert_eq!(b.num_elements(), 6 * 64);
        assert!(b.total_volume() > 3.5 && b.total_volume() < 4.0 * PI / 3.0);
        let c = cylinder(0.5, 1.0, 0.25).unwrap();
        let area = circle_rings(0.5, 0.25).unwrap().total_volume();
        assert_relative_eq!(c.total_volume(), area, epsilon = 1e-12);
        // Closed surface: V - E + F = 2 on the boundary.
        let mut edges = Vec::new();
        for f in c.boundary_facets() {
            for i in 0..3 {
                let (a, b) = (f[i], f[(i + 1) % 3]);
                edges.push([a.min(b), a.max(b)]);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let chi = c.boundary_vertices().len() as i64 - edges.len() as i64 + c.num_boundary_facets() as i64;
        assert_eq!(chi, 2);
    }

    #[test]
    fn jitter_is_seeded_and_valid() {
        let m = square_grid(0.0, 1.0, 6).unwrap();
        let a = jitter(&m, 0.3, 7);
        let b = jitter(&m, 0.3, 7);
        assert_eq!(a, b);
        assert_ne!(a.vertices(), m.vertices());
        assert_relative_eq!(a.total_volume(), 1.0, epsilon = 1e-12);
    }
}
