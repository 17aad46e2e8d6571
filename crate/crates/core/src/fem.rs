//! Mixed finite element matrices and the reduced fourth-order operator.
//!
//! Unknowns: a scalar `u` per vertex, and per vertex two Mandel vectors, the
//! Hessian surrogate `V` and the multiplier `Λ`. With `K = DᵀAG` and
//! `M̄ = M⁻¹ M_Tε M⁻¹`, eliminating `V`, `Λ` and the constraint `BΛ = 0`
//! leaves `𝒜 = Kᵀ P K` where `P = M̄ − M̄Bᵀ(BM̄Bᵀ)⁺BM̄`. All of `M`, `M_Tε`
//! and `B` are block diagonal over vertices, so `P` is assembled vertex by
//! vertex.

use std::f64::consts::SQRT_2;
use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sha2::{Digest, Sha256};

use crate::exec::Exec;
use crate::framefield::FrameField;
use crate::geometry::{compute_measures, gradient_matrix_with, MeshMeasures, SimplicialMesh};
use crate::solve::solve_spd;
use crate::sparse::{CsrMatrix, SparseSym};
use crate::symtensor::{mandel_dim, modify_epsilon, Sym2, Sym4Form};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// `Λ = 0` on the boundary.
    Natural,
    /// `tᵀΛn = 0` for every boundary tangent `t`.
    Neumann,
}

impl BoundaryCondition {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryCondition::Natural => "natural",
            BoundaryCondition::Neumann => "neumann",
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BoundaryCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "natural" => Ok(BoundaryCondition::Natural),
            "neumann" => Ok(BoundaryCondition::Neumann),
            _ => Err(Error::InvalidInput(format!("unknown boundary condition '{s}'"))),
        }
    }
}

/// Mandel index pairs (must match `symtensor`).
fn mandel_pairs(dim: usize) -> &'static [(usize, usize)] {
    if dim == 2 {
        &[(0, 0), (1, 1), (0, 1)]
    } else {
        &[(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)]
    }
}

/// Tensor divergence of per-vertex Mandel fields: `(#elements·dim) × (#vertices·m)`.
pub fn divergence_matrix(mesh: &SimplicialMesh) -> CsrMatrix {
    divergence_matrix_with(mesh, Exec::default())
}

pub fn divergence_matrix_with(mesh: &SimplicialMesh, exec: Exec) -> CsrMatrix {
    let dim = mesh.dim();
    let m = mandel_dim(dim);
    let pairs = mandel_pairs(dim);
    let triplets = exec.flat_map_ranges(mesh.num_elements(), |range| {
        let mut t = Vec::with_capacity(range.len() * (dim + 1) * dim * dim);
        for e in range {
            let (g, _) = mesh.shape_gradients(e);
            for j in 0..dim {
                for (a, &v) in mesh.element(e).iter().enumerate() {
                    // (∇·Λ)_j = Σ_i ∂_i Λ_ij, with Λ_ij = λ_k / √2 off the diagonal.
                    for (k, &(p, q)) in pairs.iter().enumerate() {
                        let val = if p == q {
                            if p == j { g[a][j] } else { continue }
                        } else if p == j {
                            g[a][q] / SQRT_2
                        } else if q == j {
                            g[a][p] / SQRT_2
                        } else {
                            continue;
                        };
                        t.push((e * dim + j, v * m + k, val));
                    }
                }
            }
        }
        t
    });
    CsrMatrix::from_triplets(mesh.num_elements() * dim, mesh.num_vertices() * m, &triplets)
}

/// `Q^ε(v)` at every vertex.
pub fn modified_forms(field: &FrameField, epsilon: f64) -> Result<Vec<Sym4Form>> {
    (0..field.len())
        .map(|v| modify_epsilon(field.form(v), field.norm(v), epsilon))
        .collect()
}

/// Block-diagonal `M_Tε` with blocks `dual_volume(v) · Q^ε(v)`.
pub fn energy_block_matrix(field: &FrameField, measures: &MeshMeasures, epsilon: f64) -> Result<CsrMatrix> {
    let forms = modified_forms(field, epsilon)?;
    let m = mandel_dim(field.dim());
    let n = field.len();
    let mut t = Vec::with_capacity(n * m * m);
    for (v, q) in forms.iter().enumerate() {
        for i in 0..m {
            for j in 0..m {
                let x = measures.dual_volumes[v] * q.get(i, j);
                if x != 0.0 {
                    t.push((v * m + i, v * m + j, x));
                }
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n * m, n * m, &t))
}

/// Per-boundary-vertex constraint rows (each `m` wide), in the order of
/// `measures.boundary_vertices`.
fn constraint_blocks(dim: usize, measures: &MeshMeasures, bc: BoundaryCondition) -> Vec<DMatrix<f64>> {
    let m = mandel_dim(dim);
    measures
        .boundary_normals
        .iter()
        .zip(&measures.boundary_tangents)
        .map(|(n, ts)| match bc {
            BoundaryCondition::Natural => DMatrix::identity(m, m),
            BoundaryCondition::Neumann => {
                let rows: Vec<Sym2> =
                    ts[..dim - 1].iter().map(|t| Sym2::sym_outer(&t[..dim], &n[..dim]).scaled(0.5)).collect();
                DMatrix::from_fn(dim - 1, m, |r, c| rows[r].mandel()[c])
            }
        })
        .collect()
}

/// Constraint matrix `B` acting on the stacked Mandel multiplier.
pub fn boundary_constraint_matrix(mesh: &SimplicialMesh, measures: &MeshMeasures, bc: BoundaryCondition) -> CsrMatrix {
    let m = mesh.mandel_dim();
    let blocks = constraint_blocks(mesh.dim(), measures, bc);
    let mut t = Vec::new();
    let mut row = 0;
    for (blk, &v) in blocks.iter().zip(&measures.boundary_vertices) {
        for r in 0..blk.nrows() {
            for c in 0..m {
                if blk[(r, c)] != 0.0 {
                    t.push((row, v * m + c, blk[(r, c)]));
                }
            }
            row += 1;
        }
    }
    CsrMatrix::from_triplets(row, mesh.num_vertices() * m, &t)
}

/// `X⁺` for a small symmetric PSD matrix; Cholesky when well conditioned,
/// otherwise an eigenvalue pseudoinverse with relative cutoff `1e-12`.
fn small_inverse(x: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(x.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if max > 0.0 && min > 1e-12 * max {
        if let Some(ch) = x.clone().cholesky() {
            return (ch.inverse(), false);
        }
    }
    let cutoff = 1e-12 * max;
    let mut inv = DMatrix::zeros(x.nrows(), x.ncols());
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l > cutoff && l > 0.0 {
            let u = eig.eigenvectors.column(k);
            inv += u * u.transpose() / l;
        }
    }
    (inv, true)
}

fn mbar_block(q: &Sym4Form, dual: f64) -> DMatrix<f64> {
    let m = q.mandel_dim();
    DMatrix::from_fn(m, m, |i, j| q.get(i, j) / dual)
}

/// Projected middle block `P_v` for every vertex.
fn projector_blocks(
    forms: &[Sym4Form],
    measures: &MeshMeasures,
    constraints: &[DMatrix<f64>],
) -> (Vec<DMatrix<f64>>, usize) {
    let mut pseudo = 0;
    let blocks = forms
        .iter()
        .enumerate()
        .map(|(v, q)| {
            let mbar = mbar_block(q, measures.dual_volumes[v]);
            match measures.boundary_slot(v) {
                None => mbar,
                Some(s) => {
                    let b = &constraints[s];
                    let bm = b * &mbar;
                    let schur = &bm * b.transpose();
                    let (inv, used_pseudo) = small_inverse(&(0.5 * (&schur + schur.transpose())));
                    pseudo += used_pseudo as usize;
                    let p = &mbar - bm.transpose() * inv * &bm;
                    0.5 * (&p + p.transpose())
                }
            }
        })
        .collect();
    (blocks, pseudo)
}

/// Largest `|B_v P_v|` and largest change of `P_v` when every constraint
/// block is premultiplied by a random well-conditioned matrix, both relative
/// to `max |P_v|`.
pub fn projector_checks(
    mesh: &SimplicialMesh,
    field: &FrameField,
    epsilon: f64,
    bc: BoundaryCondition,
    seed: u64,
) -> Result<(f64, f64)> {
    use rand::{Rng, SeedableRng};
    field.check_mesh(mesh)?;
    let measures = compute_measures(mesh)?;
    let forms = modified_forms(field, epsilon)?;
    let cons = constraint_blocks(mesh.dim(), &measures, bc);
    let (p, _) = projector_blocks(&forms, &measures, &cons);
    let scale = p.iter().map(|b| b.amax()).fold(0.0, f64::max).max(1e-300);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let scaled: Vec<DMatrix<f64>> = cons
        .iter()
        .map(|b| {
            let r = b.nrows();
            let s = DMatrix::from_fn(r, r, |_, _| rng.gen_range(-1.0..1.0)) + DMatrix::identity(r, r) * (r as f64 + 1.0);
            s * b
        })
        .collect();
    let (q, _) = projector_blocks(&forms, &measures, &scaled);
    let bp = measures
        .boundary_vertices
        .iter()
        .enumerate()
        .map(|(s, &v)| (&cons[s] * &p[v]).amax())
        .fold(0.0, f64::max);
    let rescale = p.iter().zip(&q).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    Ok((bp / scale, rescale / scale))
}

/// All matrices of the mixed formulation.
#[derive(Clone, Debug)]
pub struct MixedSystem {
    pub dim: usize,
    pub g: CsrMatrix,
    pub d: CsrMatrix,
    /// Element volumes repeated `dim` times.
    pub a: Vec<f64>,
    /// Dual volumes repeated `m` times.
    pub m: Vec<f64>,
    pub energy: CsrMatrix,
    pub b: CsrMatrix,
    pub bc: BoundaryCondition,
    pub forms: Vec<Sym4Form>,
    pub measures: MeshMeasures,
}

impl MixedSystem {
    pub fn new(mesh: &SimplicialMesh, field: &FrameField, epsilon: f64, bc: BoundaryCondition) -> Result<Self> {
        Self::new_with(mesh, field, epsilon, bc, Exec::default())
    }

    pub fn new_with(mesh: &SimplicialMesh, field: &FrameField, epsilon: f64, bc: BoundaryCondition, exec: Exec) -> Result<Self> {
        field.check_mesh(mesh)?;
        let measures = compute_measures(mesh)?;
        if measures.boundary_vertices.is_empty() {
            return Err(Error::Geometry("mesh has no boundary".into()));
        }
        let dim = mesh.dim();
        let mdim = mandel_dim(dim);
        let a = measures.element_volumes.iter().flat_map(|&v| std::iter::repeat_n(v, dim)).collect();
        let m = measures.dual_volumes.iter().flat_map(|&v| std::iter::repeat_n(v, mdim)).collect();
        Ok(Self {
            dim,
            g: gradient_matrix_with(mesh, exec),
            d: divergence_matrix_with(mesh, exec),
            a,
            m,
            energy: energy_block_matrix(field, &measures, epsilon)?,
            b: boundary_constraint_matrix(mesh, &measures, bc),
            bc,
            forms: modified_forms(field, epsilon)?,
            measures,
        })
    }

    /// `K = DᵀAG`, mapping vertex values to stacked Mandel vectors.
    pub fn coupling(&self) -> CsrMatrix {
        self.coupling_with(Exec::default())
    }

    pub fn coupling_with(&self, exec: Exec) -> CsrMatrix {
        self.d.scale_rows(&self.a).transpose().matmul_with(&self.g, exec)
    }

    /// `𝒜u` from a dense solve of the full saddle-point system. Test oracle
    /// for small meshes.
    pub fn kkt_apply_dense(&self, u: &[f64]) -> Result<Vec<f64>> {
        let nm = self.m.len();
        let nb = self.b.nrows();
        let size = 2 * nm + nb;
        let mut kkt = DMatrix::zeros(size, size);
        for (r, c, v) in self.energy.triplets() {
            kkt[(r, c)] += v;
        }
        for i in 0..nm {
            kkt[(i, nm + i)] = self.m[i];
            kkt[(nm + i, i)] = self.m[i];
        }
        for (r, c, v) in self.b.triplets() {
            kkt[(nm + c, 2 * nm + r)] += v;
            kkt[(2 * nm + r, nm + c)] += v;
        }
        let k = self.coupling();
        let ku = k.mul_vec(u);
        let mut rhs = DVector::zeros(size);
        for i in 0..nm {
            rhs[nm + i] = -ku[i];
        }
        // The multiplier block may be rank deficient at zero-weight vertices.
        let sol = kkt
            .clone()
            .lu()
            .solve(&rhs)
            .or_else(|| kkt.svd(true, true).solve(&rhs, 1e-13).ok())
            .ok_or_else(|| Error::Numerical("saddle-point system is singular".into()))?;
        let lambda: Vec<f64> = (0..nm).map(|i| sol[nm + i]).collect();
        Ok(k.tr_mul_vec(&lambda))
    }
}

/// The reduced operator `𝒜`, the lumped vertex mass and provenance data.
#[derive(Clone, Debug)]
pub struct AssembledOperator {
    matrix: SparseSym,
    mass: Vec<f64>,
    bc: BoundaryCondition,
    epsilon: f64,
    dim: usize,
    fingerprint: String,
    pseudo_inverse_blocks: usize,
}

impl AssembledOperator {
    pub fn matrix(&self) -> &SparseSym {
        &self.matrix
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.mass.len()
    }

    /// SHA-256 of the field's CSV serialization.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Boundary vertices whose constraint block needed a pseudoinverse.
    pub fn pseudo_inverse_blocks(&self) -> usize {
        self.pseudo_inverse_blocks
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(u)
    }
}

pub fn field_fingerprint(field: &FrameField) -> String {
    let digest = Sha256::digest(field.to_csv().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn assemble_operator(mesh: &SimplicialMesh, field: &FrameField, epsilon: f64, bc: BoundaryCondition) -> Result<AssembledOperator> {
    assemble_operator_with(mesh, field, epsilon, bc, Exec::default())
}

pub fn assemble_operator_with(
    mesh: &SimplicialMesh,
    field: &FrameField,
    epsilon: f64,
    bc: BoundaryCondition,
    exec: Exec,
) -> Result<AssembledOperator> {
    let sys = MixedSystem::new_with(mesh, field, epsilon, bc, exec)?;
    let constraints = constraint_blocks(mesh.dim(), &sys.measures, bc);
    let (blocks, pseudo) = projector_blocks(&sys.forms, &sys.measures, &constraints);
    if pseudo > 0 {
        warn!("{pseudo} boundary constraint blocks were singular; used a pseudoinverse");
    }
    let k = sys.coupling_with(exec);
    let matrix = reduce_blocks(&k, &blocks, mesh.num_vertices(), exec)?;
    Ok(AssembledOperator {
        matrix,
        mass: sys.measures.dual_volumes.clone(),
        bc,
        epsilon,
        dim: mesh.dim(),
        fingerprint: field_fingerprint(field),
        pseudo_inverse_blocks: pseudo,
    })
}

/// `Σ_v K_vᵀ P_v K_v` with exact symmetry: only `a ≤ b` pairs are computed
/// and mirrored.
fn reduce_blocks(k: &CsrMatrix, blocks: &[DMatrix<f64>], n: usize, exec: Exec) -> Result<SparseSym> {
    let triplets = exec.flat_map_ranges(blocks.len(), |range| {
        let mut t = Vec::new();
        for v in range {
            let p = &blocks[v];
            let m = p.nrows();
            if p.iter().all(|&x| x == 0.0) {
                continue;
            }
            let mut support: Vec<usize> = (0..m).flat_map(|i| k.row(v * m + i).0.iter().copied()).collect();
            support.sort_unstable();
            support.dedup();
            let s = support.len();
            let mut kv = DMatrix::zeros(m, s);
            for i in 0..m {
                let (cols, vals) = k.row(v * m + i);
                for (&c, &x) in cols.iter().zip(vals) {
                    kv[(i, support.binary_search(&c).unwrap())] = x;
                }
            }
            let w = p * &kv;
            for a in 0..s {
                for b in a..s {
                    let x: f64 = (0..m).map(|i| kv[(i, a)] * w[(i, b)]).sum();
                    t.push((support[a], support[b], x));
                    if a != b {
                        t.push((support[b], support[a], x));
                    }
                }
            }
        }
        t
    });
    SparseSym::new(CsrMatrix::from_triplets(n, n, &triplets))
}

/// Natural-condition operator via sparse products `K°ᵀ M̄° K°`, where `°`
/// keeps only interior vertex blocks. Independent of the per-vertex
/// projector path.
pub fn natural_operator_by_products(mesh: &SimplicialMesh, field: &FrameField, epsilon: f64) -> Result<SparseSym> {
    let sys = MixedSystem::new(mesh, field, epsilon, BoundaryCondition::Natural)?;
    let m = mandel_dim(mesh.dim());
    let mut t = Vec::new();
    for (v, q) in sys.forms.iter().enumerate() {
        if sys.measures.boundary_slot(v).is_some() {
            continue;
        }
        let dual = sys.measures.dual_volumes[v];
        for i in 0..m {
            for j in 0..m {
                let x = q.get(i, j) / dual;
                if x != 0.0 {
                    t.push((v * m + i, v * m + j, x));
                }
            }
        }
    }
    let nm = mesh.num_vertices() * m;
    let mbar = CsrMatrix::from_triplets(nm, nm, &t);
    let k = sys.coupling();
    let a = k.transpose().matmul(&mbar.matmul(&k));
    symmetrized(a)
}

/// Mixed-FEM Bilaplacian `GᵀAD°M°⁻¹D°ᵀAG` with natural conditions.
pub fn bilaplacian_natural(mesh: &SimplicialMesh) -> Result<SparseSym> {
    let measures = compute_measures(mesh)?;
    let dim = mesh.dim();
    let m = mandel_dim(dim);
    let interior: Vec<usize> = (0..mesh.num_vertices())
        .filter(|&v| measures.boundary_slot(v).is_none())
        .flat_map(|v| (0..m).map(move |i| v * m + i))
        .collect();
    let a: Vec<f64> = measures.element_volumes.iter().flat_map(|&v| std::iter::repeat_n(v, dim)).collect();
    let g = gradient_matrix_with(mesh, Exec::default());
    let d = divergence_matrix(mesh);
    let all_rows: Vec<usize> = (0..d.nrows()).collect();
    let d0 = d.submatrix(&all_rows, &interior);
    let inv_mass: Vec<f64> = interior.iter().map(|&c| 1.0 / measures.dual_volumes[c / m]).collect();
    let ag = g.scale_rows(&a);
    let k0 = d0.transpose().matmul(&ag);
    let op = ag.transpose().matmul(&d0.matmul(&k0.scale_rows(&inv_mass)));
    symmetrized(op)
}

/// `½(X + Xᵀ)`, removing rounding-level asymmetry from product assembly.
fn symmetrized(x: CsrMatrix) -> Result<SparseSym> {
    SparseSym::new(x.add(0.5, &x.transpose(), 0.5))
}

/// Solves `𝒜u = 0` in the interior with `u = values` on `boundary`.
pub fn apply_dirichlet_partition(op: &AssembledOperator, boundary: &[usize], values: &[f64]) -> Result<Vec<f64>> {
    if op.bc() != BoundaryCondition::Neumann {
        return Err(Error::InvalidInput("the Dirichlet problem requires the neumann operator".into()));
    }
    if boundary.len() != values.len() {
        return Err(Error::DimMismatch { expected: boundary.len(), found: values.len() });
    }
    let n = op.num_vertices();
    let mut is_bnd = vec![false; n];
    let mut u = vec![0.0; n];
    for (&v, &x) in boundary.iter().zip(values) {
        if v >= n {
            return Err(Error::InvalidInput(format!("boundary vertex {v} out of range")));
        }
        is_bnd[v] = true;
        u[v] = x;
    }
    let interior: Vec<usize> = (0..n).filter(|&v| !is_bnd[v]).collect();
    if interior.is_empty() {
        return Ok(u);
    }
    let bnd: Vec<usize> = (0..n).filter(|&v| is_bnd[v]).collect();
    let aii = op.matrix().principal(&interior);
    let aib = op.matrix().matrix().submatrix(&interior, &bnd);
    let ub: Vec<f64> = bnd.iter().map(|&v| u[v]).collect();
    let rhs: Vec<f64> = aib.mul_vec(&ub).iter().map(|x| -x).collect();
    let ui = solve_spd(&aii, &rhs, &[]).map_err(|e| match e {
        Error::Numerical(msg) => Error::Numerical(format!("interior block is singular or ill-posed: {msg}")),
        other => other,
    })?;
    for (k, &v) in interior.iter().enumerate() {
        u[v] = ui[k];
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framefield::{constant_field, harmonic_cross_field_2d, helical_field_3d, map_coframe_field};
    use crate::geometry::generators;
    use crate::symtensor::OdecoFrame;
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_diff(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
        let d = a.add(1.0, b, -1.0);
        d.max_abs() / a.max_abs().max(b.max_abs()).max(1e-300)
    }

    fn small_meshes() -> Vec<SimplicialMesh> {
        vec![
            generators::jitter(&generators::square_grid(-1.0, 1.0, 5).unwrap(), 0.2, 3),
            generators::disk(0.35).unwrap(),
            generators::ball(2).unwrap(),
        ]
    }

    fn fields(mesh: &SimplicialMesh) -> Vec<FrameField> {
        if mesh.dim() == 2 {
            vec![
                constant_field(mesh, &OdecoFrame::from_angle(0.4, [1.0, 1.0])).unwrap(),
                harmonic_cross_field_2d(mesh).unwrap(),
            ]
        } else {
            vec![helical_field_3d(mesh, [0.2, 0.1, 1.0], 0.9).unwrap()]
        }
    }

    #[test]
    fn divergence_examples() {
        let mesh = generators::disk(0.3).unwrap();
        let d = divergence_matrix(&mesh);
        let n = mesh.num_vertices();
        // Constant Λ has zero divergence.
        let lam: Vec<f64> = (0..n).flat_map(|_| [0.3, -1.2, 0.7]).collect();
        assert!(d.mul_vec(&lam).iter().all(|x| x.abs() < 1e-12));
        // Λ11 = x1 has divergence (1, 0).
        let lam: Vec<f64> = (0..n).flat_map(|v| [mesh.vertex(v)[0], 0.0, 0.0]).collect();
        let div = d.mul_vec(&lam);
        for e in 0..mesh.num_elements() {
            assert!((div[2 * e] - 1.0).abs() < 1e-12 && div[2 * e + 1].abs() < 1e-12);
        }
        // Λ12 = x2 (Mandel √2 x2) has divergence (1, 0).
        let lam: Vec<f64> = (0..n).flat_map(|v| [0.0, 0.0, SQRT_2 * mesh.vertex(v)[1]]).collect();
        let div = d.mul_vec(&lam);
        for e in 0..mesh.num_elements() {
            assert!((div[2 * e] - 1.0).abs() < 1e-12 && div[2 * e + 1].abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_theorem_identity() {
        // Σ_e vol (∇·Λ)·g = ∮ nᵀΛg, exact for piecewise-linear Λ.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for mesh in small_meshes() {
            let dim = mesh.dim();
            let m = mesh.mandel_dim();
            let n = mesh.num_vertices();
            let d = divergence_matrix(&mesh);
            let lam: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let div = d.mul_vec(&lam);
            let lhs: f64 = (0..mesh.num_elements())
                .map(|e| mesh.element_volume(e) * (0..dim).map(|j| div[e * dim + j] * g[j]).sum::<f64>())
                .sum();
            let mut rhs = 0.0;
            for f in mesh.boundary_facets() {
                let (nrm, meas) = crate::geometry::facet_normal(&mesh, f);
                // Facet average of a linear integrand is the vertex mean.
                for &v in f {
                    let s = Sym2::from_mandel(&lam[v * m..(v + 1) * m]).unwrap().to_matrix();
                    let mut val = 0.0;
                    for i in 0..dim {
                        for j in 0..dim {
                            val += nrm[i] * s[(i, j)] * g[j];
                        }
                    }
                    rhs += meas * val / dim as f64;
                }
            }
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn energy_blocks() {
        let mesh = generators::disk(0.3).unwrap();
        let meas = compute_measures(&mesh).unwrap();
        let f = harmonic_cross_field_2d(&mesh).unwrap();
        let e1 = energy_block_matrix(&f, &meas, 1.0).unwrap();
        let mass: Vec<f64> = meas.dual_volumes.iter().flat_map(|&v| [v; 3]).collect();
        assert!(rel_diff(&e1, &CsrMatrix::from_diagonal(&mass)) < 1e-15);
        for eps in [1e-3, 0.1, 0.5, 1.0] {
            for q in modified_forms(&f, eps).unwrap() {
                let blk = DMatrix::from_fn(3, 3, |i, j| q.get(i, j));
                let ev = SymmetricEigen::new(blk).eigenvalues;
                assert!(ev.min() >= eps * (1.0 - 1e-12));
            }
        }
        let z = map_coframe_field(&mesh, |_, _| Matrix3::new(1.0, 2.0, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0)).unwrap_err();
        assert!(z.is_input_error());
    }

    #[test]
    fn constraint_rows() {
        let mesh = generators::square_grid(0.0, 1.0, 3).unwrap();
        let meas = compute_measures(&mesh).unwrap();
        let b = boundary_constraint_matrix(&mesh, &meas, BoundaryCondition::Neumann);
        assert_eq!(b.nrows(), meas.boundary_vertices.len());
        // Bottom edge midpoint: n = (0, −1), t = (1, 0) → the Λ12 row.
        let s = meas
            .boundary_vertices
            .iter()
            .position(|&v| mesh.vertex(v)[1] == 0.0 && mesh.vertex(v)[0] > 0.0 && mesh.vertex(v)[0] < 1.0)
            .unwrap();
        let (cols, vals) = b.row(s);
        assert_eq!(cols.len(), 1);
        assert_eq!(cols[0] % 3, 2);
        assert!((vals[0].abs() - SQRT_2 / 2.0).abs() < 1e-15);
        // Every row stays inside one vertex block.
        for r in 0..b.nrows() {
            let (cols, _) = b.row(r);
            assert!(cols.iter().all(|c| c / 3 == cols[0] / 3));
        }
        let nat = boundary_constraint_matrix(&mesh, &meas, BoundaryCondition::Natural);
        assert_eq!(nat.nrows(), 3 * meas.boundary_vertices.len());
    }

    #[test]
    fn operator_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for mesh in small_meshes() {
            for field in fields(&mesh) {
                for bc in [BoundaryCondition::Natural, BoundaryCondition::Neumann] {
                    let op = assemble_operator(&mesh, &field, 0.1, bc).unwrap();
                    let a = op.matrix();
                    let norm = a.matrix().norm_inf();
                    assert_eq!(a.asymmetry(), 0.0);
                    for _ in 0..10 {
                        let x: Vec<f64> = (0..a.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                        let xax = crate::sparse::dot(&x, &a.mul_vec(&x));
                        assert!(xax >= -1e-10 * norm * crate::sparse::dot(&x, &x));
                    }
                    let ones = vec![1.0; a.dim()];
                    assert!(a.mul_vec(&ones).iter().all(|y| y.abs() <= 1e-10 * norm));
                    for j in 0..mesh.dim() {
                        let xj: Vec<f64> = (0..a.dim()).map(|v| mesh.vertex(v)[j]).collect();
                        let r = crate::sparse::norm2(&a.mul_vec(&xj));
                        if bc == BoundaryCondition::Natural {
                            assert!(r <= 1e-10 * norm, "natural {r}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn neumann_does_not_annihilate_coordinates() {
        let mesh = generators::disk(0.25).unwrap();
        let f = harmonic_cross_field_2d(&mesh).unwrap();
        let op = assemble_operator(&mesh, &f, 0.1, BoundaryCondition::Neumann).unwrap();
        let norm = op.matrix().matrix().norm_inf();
        for j in 0..2 {
            let xj: Vec<f64> = (0..mesh.num_vertices()).map(|v| mesh.vertex(v)[j]).collect();
            assert!(crate::sparse::norm2(&op.apply(&xj)) > 1e-6 * norm);
        }
    }

    #[test]
    fn projector_annihilates_constraints_and_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for mesh in small_meshes() {
            let field = &fields(&mesh)[0];
            let meas = compute_measures(&mesh).unwrap();
            let forms = modified_forms(field, 0.2).unwrap();
            for bc in [BoundaryCondition::Natural, BoundaryCondition::Neumann] {
                let cons = constraint_blocks(mesh.dim(), &meas, bc);
                let (p, _) = projector_blocks(&forms, &meas, &cons);
                for (s, &v) in meas.boundary_vertices.iter().enumerate() {
                    let bp = &cons[s] * &p[v];
                    assert!(bp.amax() <= 1e-10 * p[v].amax().max(1.0));
                }
                let scaled: Vec<DMatrix<f64>> = cons
                    .iter()
                    .map(|b| {
                        let r = b.nrows();
                        let mut s = DMatrix::from_fn(r, r, |_, _| rng.gen_range(-1.0..1.0));
                        s += DMatrix::identity(r, r) * 2.0;
                        s * b
                    })
                    .collect();
                let (q, _) = projector_blocks(&forms, &meas, &scaled);
                for (a, b) in p.iter().zip(&q) {
                    assert!((a - b).amax() <= 1e-10 * a.amax().max(1.0));
                }
            }
        }
    }

    #[test]
    fn natural_shortcut_matches_schur() {
        for mesh in small_meshes() {
            for field in fields(&mesh) {
                let general = assemble_operator(&mesh, &field, 0.3, BoundaryCondition::Natural).unwrap();
                let short = natural_operator_by_products(&mesh, &field, 0.3).unwrap();
                assert!(rel_diff(general.matrix().matrix(), short.matrix()) < 1e-12);
            }
        }
    }

    #[test]
    fn bilaplacian_at_epsilon_one() {
        for mesh in small_meshes() {
            let bil = bilaplacian_natural(&mesh).unwrap();
            let ops: Vec<AssembledOperator> = fields(&mesh)
                .iter()
                .chain(std::iter::once(
                    &constant_field(&mesh, &OdecoFrame::axis_aligned(mesh.dim(), &vec![1.0; mesh.dim()]).unwrap()).unwrap(),
                ))
                .map(|f| assemble_operator(&mesh, f, 1.0, BoundaryCondition::Natural).unwrap())
                .collect();
            for op in &ops {
                assert!(rel_diff(op.matrix().matrix(), bil.matrix()) < 1e-12);
                assert!(rel_diff(op.matrix().matrix(), ops[0].matrix().matrix()) < 1e-12);
            }
        }
    }

    #[test]
    fn all_boundary_mesh_gives_zero_natural_operator() {
        let mesh = SimplicialMesh::from_triangles(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], &[[0, 1, 2], [0, 2, 3]]).unwrap();
        let f = constant_field(&mesh, &OdecoFrame::from_angle(0.0, [1.0, 1.0])).unwrap();
        let op = assemble_operator(&mesh, &f, 0.5, BoundaryCondition::Natural).unwrap();
        assert!(op.matrix().matrix().max_abs() < 1e-14);
    }

    #[test]
    fn kkt_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for mesh in small_meshes() {
            assert!(mesh.num_vertices() <= 200);
            for field in fields(&mesh) {
                for bc in [BoundaryCondition::Natural, BoundaryCondition::Neumann] {
                    let sys = MixedSystem::new(&mesh, &field, 0.15, bc).unwrap();
                    let op = assemble_operator(&mesh, &field, 0.15, bc).unwrap();
                    let u: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let oracle = sys.kkt_apply_dense(&u).unwrap();
                    let got = op.apply(&u);
                    let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    let err = got.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    assert!(err <= 1e-8 * scale.max(1.0), "{bc}: {err} (scale {scale})");
                }
            }
        }
    }

    #[test]
    fn zero_weight_boundary_vertex_uses_pseudoinverse() {
        let mesh = generators::disk(0.35).unwrap();
        let bv = mesh.boundary_vertices()[0];
        let f = map_coframe_field(&mesh, |v, _| if v == bv { Matrix3::identity() * 1e-6 } else { Matrix3::identity() }).unwrap();
        // Weight 1e-24: numerically zero relative to its neighbours.
        let op = assemble_operator(&mesh, &f, 0.2, BoundaryCondition::Neumann).unwrap();
        assert_eq!(op.matrix().asymmetry(), 0.0);
        let ones = vec![1.0; mesh.num_vertices()];
        let norm = op.matrix().matrix().norm_inf();
        assert!(op.apply(&ones).iter().all(|y| y.abs() <= 1e-10 * norm));
    }

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let mesh = generators::disk(0.1).unwrap();
        let f = harmonic_cross_field_2d(&mesh).unwrap();
        let a = assemble_operator_with(&mesh, &f, 0.1, BoundaryCondition::Neumann, Exec::Parallel).unwrap();
        let b = assemble_operator_with(&mesh, &f, 0.1, BoundaryCondition::Neumann, Exec::Sequential).unwrap();
        assert_eq!(a.matrix().matrix(), b.matrix().matrix());
    }

    #[test]
    fn dirichlet_constant_data() {
        let mesh = generators::disk(0.2).unwrap();
        let f = harmonic_cross_field_2d(&mesh).unwrap();
        let op = assemble_operator(&mesh, &f, 0.1, BoundaryCondition::Neumann).unwrap();
        let bnd = mesh.boundary_vertices();
        let u = apply_dirichlet_partition(&op, &bnd, &vec![2.5; bnd.len()]).unwrap();
        assert!(u.iter().all(|x| (x - 2.5).abs() < 1e-8));
        let nat = assemble_operator(&mesh, &f, 0.1, BoundaryCondition::Natural).unwrap();
        assert!(apply_dirichlet_partition(&nat, &bnd, &vec![0.0; bnd.len()]).is_err());
    }
}
