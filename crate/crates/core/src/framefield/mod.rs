//! Per-vertex frame fields and their generators.

pub mod rotation;

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::geometry::{MeshMeasures, PointLocator, SimplicialMesh};
use crate::solve::SparseCholesky;
use crate::sparse::CsrMatrix;
use crate::symtensor::{contract, odeco_to_form, spectral_norm, OdecoFrame, Sym2, Sym4Form};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// All weights equal to one.
    Octahedral,
    /// Weights equal to each other at every vertex.
    ConformalOctahedral,
    Odeco,
}

impl FieldKind {
    pub fn name(self) -> &'static str {
        match self {
            FieldKind::Octahedral => "octahedral",
            FieldKind::ConformalOctahedral => "conformal_octahedral",
            FieldKind::Odeco => "odeco",
        }
    }
}

const WEIGHT_TOL: f64 = 1e-12;

fn classify(frames: &[OdecoFrame]) -> FieldKind {
    let equal = |f: &OdecoFrame| {
        let w = f.weights();
        let s = w.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        w.iter().all(|x| (x - w[0]).abs() <= WEIGHT_TOL * s)
    };
    if frames.iter().all(|f| f.weights().iter().all(|w| (w - 1.0).abs() <= WEIGHT_TOL)) {
        FieldKind::Octahedral
    } else if frames.iter().all(equal) {
        FieldKind::ConformalOctahedral
    } else {
        FieldKind::Odeco
    }
}

/// Per-vertex odeco frames with their cached quadratic forms and norms.
#[derive(Clone, Debug)]
pub struct FrameField {
    dim: usize,
    frames: Vec<OdecoFrame>,
    forms: Vec<Sym4Form>,
    norms: Vec<f64>,
    kind: FieldKind,
    singular: Vec<usize>,
}

impl FrameField {
    pub fn from_frames(frames: Vec<OdecoFrame>) -> Result<Self> {
        let dim = frames.first().map(OdecoFrame::dim).ok_or_else(|| Error::InvalidInput("empty frame field".into()))?;
        if let Some(f) = frames.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimMismatch { expected: dim, found: f.dim() });
        }
        let forms = frames.iter().map(odeco_to_form).collect();
        let norms = frames.iter().map(spectral_norm).collect();
        let kind = classify(&frames);
        Ok(Self { dim, frames, forms, norms, kind, singular: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn frame(&self, v: usize) -> &OdecoFrame {
        &self.frames[v]
    }

    pub fn frames(&self) -> &[OdecoFrame] {
        &self.frames
    }

    pub fn form(&self, v: usize) -> &Sym4Form {
        &self.forms[v]
    }

    pub fn norm(&self, v: usize) -> f64 {
        self.norms[v]
    }

    /// Vertices where the generator could not define a direction.
    pub fn singular_vertices(&self) -> &[usize] {
        &self.singular
    }

    /// Errors unless the field has one frame per vertex of `mesh`.
    pub fn check_mesh(&self, mesh: &SimplicialMesh) -> Result<()> {
        if self.dim != mesh.dim() {
            return Err(Error::DimMismatch { expected: mesh.dim(), found: self.dim });
        }
        if self.len() != mesh.num_vertices() {
            return Err(Error::InvalidInput(format!(
                "field has {} frames but the mesh has {} vertices",
                self.len(),
                mesh.num_vertices()
            )));
        }
        Ok(())
    }

    /// 2D angles `4θ` as unit vectors `(cos 4θ, sin 4θ)`.
    pub fn quad_angle_vectors(&self) -> Vec<[f64; 2]> {
        self.frames
            .iter()
            .map(|f| {
                let a = f.axis(0);
                let t = 4.0 * a[1].atan2(a[0]);
                [t.cos(), t.sin()]
            })
            .collect()
    }

    /// Unit quaternion per vertex (3D) representing the frame up to sign.
    pub fn quaternions(&self) -> Vec<UnitQuaternion<f64>> {
        self.frames.iter().map(|f| rotation::proper_rotation(&f.rotation())).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        if self.dim == 2 {
            s.push_str("theta,w1,w2\n");
            for f in &self.frames {
                let a = f.axis(0);
                let w = f.weights();
                let _ = writeln!(s, "{:e},{:e},{:e}", a[1].atan2(a[0]), w[0], w[1]);
            }
        } else {
            s.push_str("qw,qx,qy,qz,w1,w2,w3\n");
            for f in &self.frames {
                let q = rotation::proper_rotation(&f.rotation());
                let w = f.weights();
                let _ = writeln!(s, "{:e},{:e},{:e},{:e},{:e},{:e},{:e}", q.w, q.i, q.j, q.k, w[0], w[1], w[2]);
            }
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty field file"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let dim = match cols.as_slice() {
            ["theta", "w1", "w2"] => 2,
            ["qw", "qx", "qy", "qz", "w1", "w2", "w3"] => 3,
            _ => return Err(Error::parse(1, format!("unrecognized field header '{header}'"))),
        };
        let mut frames = Vec::new();
        for (i, line) in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(i + 1, "invalid number"))?;
            if vals.len() != cols.len() {
                return Err(Error::parse(i + 1, format!("expected {} columns, found {}", cols.len(), vals.len())));
            }
            let frame = if dim == 2 {
                if vals[1] < 0.0 || vals[2] < 0.0 {
                    return Err(Error::parse(i + 1, "negative weight"));
                }
                OdecoFrame::from_angle(vals[0], [vals[1], vals[2]])
            } else {
                let q = Quaternion::new(vals[0], vals[1], vals[2], vals[3]);
                if (q.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::parse(i + 1, "quaternion is not unit length"));
                }
                let r = UnitQuaternion::from_quaternion(q).to_rotation_matrix();
                OdecoFrame::from_rotation(r.matrix(), [vals[4], vals[5], vals[6]])
                    .map_err(|e| Error::parse(i + 1, e.to_string()))?
            };
            frames.push(frame);
        }
        Self::from_frames(frames)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn constant_field(mesh: &SimplicialMesh, frame: &OdecoFrame) -> Result<FrameField> {
    if frame.dim() != mesh.dim() {
        return Err(Error::DimMismatch { expected: mesh.dim(), found: frame.dim() });
    }
    FrameField::from_frames(vec![*frame; mesh.num_vertices()])
}

/// Below this magnitude the interpolated `4θ` vector has no direction.
const SINGULAR_TOL: f64 = 1e-8;

/// Per-vertex `(cos 4θ, sin 4θ)` on the boundary, from the length-weighted
/// average over incident boundary edges.
fn boundary_quad_angles(mesh: &SimplicialMesh) -> Vec<Option<[f64; 2]>> {
    let mut acc = vec![None; mesh.num_vertices()];
    for f in mesh.boundary_facets() {
        let (a, b) = (mesh.vertex(f[0]), mesh.vertex(f[1]));
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = dx.hypot(dy);
        let t = 4.0 * dy.atan2(dx);
        for &v in f {
            let e: &mut [f64; 2] = acc[v].get_or_insert([0.0, 0.0]);
            e[0] += len * t.cos();
            e[1] += len * t.sin();
        }
    }
    acc.into_iter()
        .map(|e: Option<[f64; 2]>| {
            e.map(|[x, y]| {
                let n = x.hypot(y);
                if n > SINGULAR_TOL {
                    [x / n, y / n]
                } else {
                    [1.0, 0.0]
                }
            })
        })
        .collect()
}

/// P1 stiffness matrix (cotangent Laplacian in 2D).
pub fn stiffness_matrix(mesh: &SimplicialMesh) -> CsrMatrix {
    let k = mesh.dim() + 1;
    let mut t = Vec::with_capacity(mesh.num_elements() * k * k);
    for e in 0..mesh.num_elements() {
        let (g, vol) = mesh.shape_gradients(e);
        let el = mesh.element(e);
        for a in 0..k {
            for b in 0..k {
                let d: f64 = (0..mesh.dim()).map(|j| g[a][j] * g[b][j]).sum();
                t.push((el[a], el[b], vol * d));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), mesh.num_vertices(), &t)
}

/// Harmonic extension of boundary values, one Dirichlet solve per component.
fn harmonic_extension(mesh: &SimplicialMesh, boundary: &[Option<[f64; 2]>]) -> Result<Vec<[f64; 2]>> {
    let n = mesh.num_vertices();
    let interior: Vec<usize> = (0..n).filter(|&v| boundary[v].is_none()).collect();
    let bnd: Vec<usize> = (0..n).filter(|&v| boundary[v].is_some()).collect();
    let mut out: Vec<[f64; 2]> = boundary.iter().map(|b| b.unwrap_or([0.0, 0.0])).collect();
    if interior.is_empty() {
        return Ok(out);
    }
    let k = stiffness_matrix(mesh);
    let kii = k.submatrix(&interior, &interior);
    let kib = k.submatrix(&interior, &bnd);
    let chol = SparseCholesky::new(&kii)?;
    for c in 0..2 {
        let ub: Vec<f64> = bnd.iter().map(|&v| out[v][c]).collect();
        let rhs: Vec<f64> = kib.mul_vec(&ub).iter().map(|x| -x).collect();
        let sol = chol.solve(&rhs);
        for (i, &v) in interior.iter().enumerate() {
            out[v][c] = sol[i];
        }
    }
    Ok(out)
}

/// Boundary-aligned cross field from the harmonic extension of the boundary
/// tangent direction in the `4θ` representation.
pub fn harmonic_cross_field_2d(mesh: &SimplicialMesh) -> Result<FrameField> {
    if mesh.dim() != 2 {
        return Err(Error::DimMismatch { expected: 2, found: mesh.dim() });
    }
    if mesh.num_boundary_facets() == 0 {
        return Err(Error::Geometry("harmonic cross field needs a mesh with boundary".into()));
    }
    let vals = harmonic_extension(mesh, &boundary_quad_angles(mesh))?;
    let mut singular = Vec::new();
    let frames = vals
        .iter()
        .enumerate()
        .map(|(v, &[x, y])| {
            let r = x.hypot(y);
            let theta = if r > SINGULAR_TOL {
                0.25 * y.atan2(x)
            } else {
                singular.push(v);
                0.0
            };
            OdecoFrame::from_angle(theta, [1.0, 1.0])
        })
        .collect();
    if !singular.is_empty() {
        warn!("cross field has {} singular vertices; given unit weight and angle 0", singular.len());
    }
    let mut field = FrameField::from_frames(frames)?;
    field.singular = singular;
    Ok(field)
}

/// Magnitudes of the harmonically interpolated `4θ` vectors before
/// normalization. Near-zero entries mark singular regions.
pub fn harmonic_quad_magnitudes(mesh: &SimplicialMesh) -> Result<Vec<f64>> {
    Ok(harmonic_extension(mesh, &boundary_quad_angles(mesh))?.iter().map(|v| v[0].hypot(v[1])).collect())
}

/// Frames rotating about `axis` by `pitch · (x · axis)`.
pub fn helical_field_3d(mesh: &SimplicialMesh, axis: [f64; 3], pitch: f64) -> Result<FrameField> {
    if mesh.dim() != 3 {
        return Err(Error::DimMismatch { expected: 3, found: mesh.dim() });
    }
    let a = Vector3::from(axis);
    let n = a.norm();
    if !(n > 1e-12) {
        return Err(Error::InvalidInput("helix axis must be nonzero".into()));
    }
    let a = a / n;
    let helper = if a.x.abs() <= a.y.abs() && a.x.abs() <= a.z.abs() {
        Vector3::x()
    } else if a.y.abs() <= a.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let u = (helper - a * a.dot(&helper)).normalize();
    let w = a.cross(&u);
    let base = Matrix3::from_columns(&[u, w, a]);
    let unit_axis = nalgebra::Unit::new_unchecked(a);
    let frames = mesh
        .vertices()
        .iter()
        .map(|p| {
            let s = a.dot(&Vector3::from(*p));
            let r = nalgebra::Rotation3::from_axis_angle(&unit_axis, pitch * s);
            OdecoFrame::from_rotation(&(r.matrix() * base), [1.0, 1.0, 1.0])
        })
        .collect::<Result<Vec<_>>>()?;
    FrameField::from_frames(frames)
}

/// Columns of the inverse Jacobian must be orthogonal to this relative tolerance.
const CONFORMAL_TOL: f64 = 1e-6;

/// Map coframe field: at each vertex the components are the normalized
/// columns of `inv_jacobian(v, x)` and the weights their fourth powers.
///
/// Non-orthogonal columns are rejected, since the result would not be odeco.
pub fn map_coframe_field<F>(mesh: &SimplicialMesh, inv_jacobian: F) -> Result<FrameField>
where
    F: Fn(usize, &[f64]) -> Matrix3<f64>,
{
    let dim = mesh.dim();
    let mut frames = Vec::with_capacity(mesh.num_vertices());
    for v in 0..mesh.num_vertices() {
        let j = inv_jacobian(v, mesh.vertex(v));
        let sub = j.fixed_view::<3, 3>(0, 0).into_owned();
        let det = if dim == 2 { sub[(0, 0)] * sub[(1, 1)] - sub[(0, 1)] * sub[(1, 0)] } else { sub.determinant() };
        let scale = (0..dim).map(|c| sub.column(c).rows(0, dim).norm()).fold(0.0, f64::max);
        if !(det.abs() > 1e-14 * scale.powi(dim as i32)) {
            return Err(Error::InvalidInput(format!("singular Jacobian at vertex {v}")));
        }
        let mut cols: Vec<[f64; 3]> = Vec::with_capacity(dim);
        let mut weights = Vec::with_capacity(dim);
        for c in 0..dim {
            let col = sub.column(c);
            let len = col.rows(0, dim).norm();
            let mut unit = [0.0; 3];
            for i in 0..dim {
                unit[i] = col[i] / len;
            }
            cols.push(unit);
            weights.push(len.powi(4));
        }
        for a in 0..dim {
            for b in a + 1..dim {
                let d: f64 = (0..dim).map(|i| cols[a][i] * cols[b][i]).sum();
                if d.abs() > CONFORMAL_TOL {
                    return Err(Error::InvalidInput(format!(
                        "Jacobian columns at vertex {v} are not orthogonal (cosine {d:.2e})"
                    )));
                }
            }
        }
        // Remove the residual non-orthogonality so the frame passes the strict check.
        let mut ortho = cols.clone();
        for a in 0..dim {
            for b in 0..a {
                let d: f64 = (0..dim).map(|i| ortho[a][i] * ortho[b][i]).sum();
                for i in 0..dim {
                    ortho[a][i] -= d * ortho[b][i];
                }
            }
            let n = (0..dim).map(|i| ortho[a][i] * ortho[a][i]).sum::<f64>().sqrt();
            for i in 0..dim {
                ortho[a][i] /= n;
            }
        }
        let refs: Vec<&[f64]> = ortho.iter().map(|c| &c[..dim]).collect();
        frames.push(OdecoFrame::new(&refs, &weights)?);
    }
    FrameField::from_frames(frames)
}

/// Per-boundary-vertex residual `‖(nnᵀ):T − w nnᵀ‖ / ‖T‖`, in the order of
/// `measures.boundary_vertices`.
pub fn check_boundary_alignment(field: &FrameField, measures: &MeshMeasures) -> Vec<f64> {
    let dim = field.dim();
    measures
        .boundary_vertices
        .iter()
        .zip(&measures.boundary_normals)
        .map(|(&v, n)| {
            let p = Sym2::outer(&n[..dim]);
            let c = contract(&p, field.form(v)).expect("field and mesh dimensions agree");
            let cm = c.to_matrix();
            let mut w = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    w += n[i] * cm[(i, j)] * n[j];
                }
            }
            let diff = c.vector() - p.vector() * w;
            diff.norm() / field.norm(v).max(1e-12)
        })
        .collect()
}

/// Transfers a field to another mesh of the same domain. The result is
/// octahedral.
///
/// 2D: barycentric interpolation of the `4θ` vectors. 3D: the frame of the
/// nearest fine vertex; target vertices that do not coincide with a source
/// vertex are then averaged with their one-ring, modulo cross symmetry.
pub fn resample_field(field: &FrameField, fine: &SimplicialMesh, coarse: &SimplicialMesh) -> Result<FrameField> {
    field.check_mesh(fine)?;
    if coarse.dim() != fine.dim() {
        return Err(Error::DimMismatch { expected: fine.dim(), found: coarse.dim() });
    }
    let locator = PointLocator::new(fine);
    if fine.dim() == 2 {
        let q = field.quad_angle_vectors();
        let cs: Vec<f64> = q.iter().map(|v| v[0]).collect();
        let sn: Vec<f64> = q.iter().map(|v| v[1]).collect();
        let frames = coarse
            .vertices()
            .iter()
            .map(|p| {
                let (x, y) = (locator.interpolate(&cs, &p[..2]), locator.interpolate(&sn, &p[..2]));
                let theta = if x.hypot(y) > SINGULAR_TOL { 0.25 * y.atan2(x) } else { 0.0 };
                OdecoFrame::from_angle(theta, [1.0, 1.0])
            })
            .collect();
        return FrameField::from_frames(frames);
    }

    let group = rotation::octahedral_group();
    let quats = field.quaternions();
    let scale = crate::geometry::mean_edge_length(fine);
    let mut sampled = Vec::with_capacity(coarse.num_vertices());
    let mut exact = Vec::with_capacity(coarse.num_vertices());
    for p in coarse.vertices() {
        let (e, _, _) = locator.locate(p);
        let (best, d) = fine
            .element(e)
            .iter()
            .map(|&v| (v, crate::geometry::dist(fine.vertex(v), p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        sampled.push(quats[best]);
        exact.push(d <= 1e-12 * scale);
    }
    let neighbors = coarse.vertex_neighbors();
    let frames = (0..coarse.num_vertices())
        .map(|v| {
            let q = if exact[v] {
                sampled[v]
            } else {
                let ring: Vec<UnitQuaternion<f64>> =
                    std::iter::once(sampled[v]).chain(neighbors[v].iter().map(|&u| sampled[u])).collect();
                rotation::average(&ring, &group)
            };
            OdecoFrame::from_rotation(q.to_rotation_matrix().matrix(), [1.0; 3])
        })
        .collect::<Result<Vec<_>>>()?;
    FrameField::from_frames(frames)
}

/// Winding number of the `4θ` vectors along the oriented boundary, divided by
/// four: the total index of the cross field's singularities.
pub fn boundary_index(field: &FrameField, mesh: &SimplicialMesh) -> Option<f64> {
    if field.dim() != 2 {
        return None;
    }
    let q = field.quad_angle_vectors();
    let mut total = 0.0;
    let mut any = false;
    for f in mesh.boundary_facets() {
        let (a, b) = (q[f[0]], q[f[1]]);
        let mut d = b[1].atan2(b[0]) - a[1].atan2(a[0]);
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        total += d;
        any = true;
    }
    any.then(|| total / (2.0 * PI) / 4.0)
}
