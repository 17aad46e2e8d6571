//! Reproducible experiments with pass/fail checks. Each runner returns a
//! [`Report`] holding the checks and a CSV table of the raw numbers.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::time::Instant;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{self, ConformalMap};
use crate::apps::{build_embedding, biharmonic_embedding, distance_field};
use crate::exec::Exec;
use crate::fem::{
    apply_dirichlet_partition, assemble_operator_with, bilaplacian_natural, projector_checks, AssembledOperator,
    BoundaryCondition, MixedSystem,
};
use crate::framefield::{constant_field, harmonic_cross_field_2d, helical_field_3d, resample_field, FrameField};
use crate::geometry::{generators, mean_edge_length, refine_uniform, PointLocator, SimplicialMesh};
use crate::solve::{brute_force_box_qp, diffuse, eigs_generalized, EigenOptions, EigenResult, QpOptions};
use crate::sparse::{dot, CsrMatrix, SparseSym};
use crate::symtensor::{alignment_quadratic, modify_epsilon, odeco_to_form, principal_symbol, OdecoFrame, Sym2};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub experiment: String,
    pub checks: Vec<Check>,
    /// Raw numbers, CSV with a header line.
    pub table: String,
    pub seconds: f64,
}

impl Report {
    fn new(experiment: &str, checks: Vec<Check>, table: String, start: Instant) -> Self {
        Self { experiment: experiment.into(), checks, table, seconds: start.elapsed().as_secs_f64() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "[{}] {}: {} ({})", if c.passed { "PASS" } else { "FAIL" }, self.experiment, c.name, c.detail);
        }
        s
    }
}

fn octahedral(dim: usize) -> OdecoFrame {
    OdecoFrame::axis_aligned(dim, &vec![1.0; dim]).expect("unit weights")
}

fn rel_max_diff(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    a.add(1.0, b, -1.0).max_abs() / a.max_abs().max(b.max_abs()).max(1e-300)
}

/// Per mode, whether `errors[level][mode]` strictly decreases with level.
fn monotone_modes(errors: &[Vec<f64>]) -> Vec<bool> {
    let modes = errors.first().map_or(0, Vec::len);
    (0..modes).map(|k| errors.windows(2).all(|w| w[1][k] < w[0][k])).collect()
}

// ---------------------------------------------------------------------------
// Bilaplacian reduction

/// Two octahedral fields at `ε = 1` with natural conditions against each
/// other and against `GᵀAD°M°⁻¹D°ᵀAG`.
pub fn bilaplacian_reduction(mesh: &SimplicialMesh, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let f1 = if mesh.dim() == 2 {
        harmonic_cross_field_2d(mesh)?
    } else {
        helical_field_3d(mesh, [0.0, 0.0, 1.0], 1.3)?
    };
    let f2 = if mesh.dim() == 2 {
        constant_field(mesh, &OdecoFrame::from_angle(0.37, [1.0, 1.0]))?
    } else {
        constant_field(mesh, &octahedral(3))?
    };
    let a1 = assemble_operator_with(mesh, &f1, 1.0, BoundaryCondition::Natural, exec)?;
    let a2 = assemble_operator_with(mesh, &f2, 1.0, BoundaryCondition::Natural, exec)?;
    let bil = bilaplacian_natural(mesh)?;
    let d12 = rel_max_diff(a1.matrix().matrix(), a2.matrix().matrix());
    let d1b = rel_max_diff(a1.matrix().matrix(), bil.matrix());
    let d2b = rel_max_diff(a2.matrix().matrix(), bil.matrix());
    let table = format!("pair,relative_max_difference\nfield1_vs_field2,{d12:.3e}\nfield1_vs_bilaplacian,{d1b:.3e}\nfield2_vs_bilaplacian,{d2b:.3e}\n");
    let checks = vec![
        Check::new("two octahedral fields agree", d12 <= 1e-12, format!("rel diff {d12:.2e}, tol 1e-12")),
        Check::new("equals mixed Bilaplacian", d1b.max(d2b) <= 1e-12, format!("rel diff {:.2e}, tol 1e-12", d1b.max(d2b))),
    ];
    Ok(Report::new("bilaplacian", checks, table, start))
}

// ---------------------------------------------------------------------------
// Analytic square spectrum

#[derive(Clone, Debug)]
pub struct SquareConfig {
    /// Cells per side of the structured `[-1, 1]²` grids, coarse to fine.
    pub cells: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub modes: usize,
    /// Modes (from the first) that must meet `max_rel_error` at the finest level.
    pub leading: usize,
    pub max_rel_error: f64,
    pub min_monotone_fraction: f64,
    pub bc: BoundaryCondition,
    /// Also tabulated (without checks) for comparison.
    pub compare_bc: Option<BoundaryCondition>,
    pub eigen: EigenOptions,
}

impl Default for SquareConfig {
    /// Mean edge lengths ≈ 0.05, 0.025, 0.0125.
    fn default() -> Self {
        Self {
            cells: vec![46, 92, 184],
            epsilons: vec![1.0, 0.1],
            modes: 20,
            leading: 10,
            max_rel_error: 0.05,
            min_monotone_fraction: 0.9,
            bc: BoundaryCondition::Neumann,
            compare_bc: None,
            eigen: EigenOptions::default(),
        }
    }
}

/// First `n` nonzero eigenvalues of the constant axis-aligned operator.
fn constant_field_spectrum(
    mesh: &SimplicialMesh,
    epsilon: f64,
    bc: BoundaryCondition,
    n: usize,
    opts: &EigenOptions,
    exec: Exec,
) -> Result<(Vec<f64>, EigenResult)> {
    let field = constant_field(mesh, &octahedral(mesh.dim()))?;
    let op = assemble_operator_with(mesh, &field, epsilon, bc, exec)?;
    nonzero_spectrum(&op, n, opts)
}

/// Requests more pairs until `n` nonzero eigenvalues are available.
pub fn nonzero_spectrum(op: &AssembledOperator, n: usize, opts: &EigenOptions) -> Result<(Vec<f64>, EigenResult)> {
    let dim = op.num_vertices();
    let mut extra = match op.bc() {
        BoundaryCondition::Neumann => 2,
        BoundaryCondition::Natural => op.dim() + 2,
    };
    loop {
        let k = (n + extra).min(dim - 1);
        let eig = eigs_generalized(op.matrix(), op.mass(), k, opts)?;
        let nz = eig.nonzero_values();
        if nz.len() >= n {
            return Ok((nz[..n].to_vec(), eig));
        }
        if k == dim - 1 {
            return Err(Error::InvalidInput(format!("only {} nonzero eigenvalues available", nz.len())));
        }
        extra *= 2;
    }
}

pub fn square_spectrum(cfg: &SquareConfig, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let mut table = String::from("bc,epsilon,cells,mean_edge,mode,analytic,discrete,abs_error\n");
    let mut checks = Vec::new();
    let meshes: Vec<SimplicialMesh> = cfg.cells.iter().map(|&n| generators::square_grid(-1.0, 1.0, n)).collect::<Result<_>>()?;
    let bcs: Vec<(BoundaryCondition, bool)> =
        std::iter::once((cfg.bc, true)).chain(cfg.compare_bc.map(|b| (b, false))).collect();
    for &(bc, gated) in &bcs {
        for &eps in &cfg.epsilons {
            let exact = analytic::square_spectrum(eps, cfg.modes + 1)?.nonzero_values();
            let mut errors = Vec::new();
            let mut finest_rel = Vec::new();
            for (mesh, &cells) in meshes.iter().zip(&cfg.cells) {
                let (vals, _) = constant_field_spectrum(mesh, eps, bc, cfg.modes, &cfg.eigen, exec)?;
                let h = mean_edge_length(mesh);
                let err: Vec<f64> = vals.iter().zip(&exact).map(|(d, a)| (d - a).abs()).collect();
                for (k, ((d, a), e)) in vals.iter().zip(&exact).zip(&err).enumerate() {
                    let _ = writeln!(table, "{bc},{eps},{cells},{h:.6},{},{a:.10e},{d:.10e},{e:.6e}", k + 1);
                }
                finest_rel = vals.iter().zip(&exact).map(|(d, a)| (d - a).abs() / a).collect();
                info!("square bc={bc} eps={eps} cells={cells}: max abs error {:.3e}", err.iter().fold(0.0f64, |m, e| m.max(*e)));
                errors.push(err);
            }
            if !gated {
                continue;
            }
            let mono = monotone_modes(&errors);
            let frac = mono.iter().filter(|&&b| b).count() as f64 / mono.len() as f64;
            let worst = finest_rel[..cfg.leading.min(finest_rel.len())].iter().fold(0.0f64, |m, e| m.max(*e));
            checks.push(Check::new(
                format!("eps={eps} monotone error decrease"),
                frac >= cfg.min_monotone_fraction,
                format!("{:.0}% of {} modes, need {:.0}%", 100.0 * frac, mono.len(), 100.0 * cfg.min_monotone_fraction),
            ));
            checks.push(Check::new(
                format!("eps={eps} finest relative error, first {} modes", cfg.leading),
                worst < cfg.max_rel_error,
                format!("max {:.3}%, need < {:.1}%", 100.0 * worst, 100.0 * cfg.max_rel_error),
            ));
        }
    }
    Ok(Report::new("square-spectrum", checks, table, start))
}

// ---------------------------------------------------------------------------
// Refinement hierarchies

/// `levels` meshes, each the midpoint refinement of the previous one.
pub fn hierarchy(base: &SimplicialMesh, levels: usize) -> Vec<SimplicialMesh> {
    let mut out = vec![base.clone()];
    while out.len() < levels {
        let next = refine_uniform(out.last().expect("non-empty"));
        out.push(next);
    }
    out
}

#[derive(Clone, Debug)]
pub struct RefineConfig {
    pub base_edge: f64,
    pub levels: usize,
    pub epsilon: f64,
    /// 1-based indices of nonzero modes.
    pub modes: Vec<usize>,
    pub eigen: EigenOptions,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { base_edge: 0.2, levels: 4, epsilon: 0.1, modes: vec![10, 20, 30, 40], eigen: EigenOptions::default() }
    }
}

fn convergence_table(
    experiment: &str,
    meshes: &[SimplicialMesh],
    spectra: &[Vec<f64>],
    modes: &[usize],
    start: Instant,
) -> Report {
    let finest = spectra.last().expect("at least one level");
    let mut table = String::from("level,mean_edge,mode,eigenvalue,abs_error_vs_finest\n");
    let mut errors = Vec::new();
    for (l, (mesh, vals)) in meshes.iter().zip(spectra).enumerate() {
        let h = mean_edge_length(mesh);
        let err: Vec<f64> = modes.iter().map(|&k| (vals[k - 1] - finest[k - 1]).abs()).collect();
        for (&k, e) in modes.iter().zip(&err) {
            let _ = writeln!(table, "{l},{h:.6},{k},{:.10e},{e:.6e}", vals[k - 1]);
        }
        if l + 1 < meshes.len() {
            errors.push(err);
        }
    }
    let mono = monotone_modes(&errors);
    let checks = modes
        .iter()
        .zip(&mono)
        .map(|(&k, &ok)| {
            let trail: Vec<String> = errors.iter().map(|e| format!("{:.3e}", e[modes.iter().position(|&m| m == k).unwrap()])).collect();
            Check::new(format!("mode {k} error decreases"), ok, trail.join(" > "))
        })
        .collect();
    Report::new(experiment, checks, table, start)
}

/// Disk hierarchy with the finest-level harmonic cross field resampled to
/// every coarser level; Neumann spectra compared against the finest level.
pub fn refine_spectrum(cfg: &RefineConfig, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let meshes = hierarchy(&generators::disk(cfg.base_edge)?, cfg.levels);
    let finest = meshes.last().expect("levels >= 1");
    let fine_field = harmonic_cross_field_2d(finest)?;
    let n = cfg.modes.iter().copied().max().unwrap_or(1);
    let mut spectra = Vec::new();
    for mesh in &meshes {
        let field = resample_field(&fine_field, finest, mesh)?;
        let op = assemble_operator_with(mesh, &field, cfg.epsilon, BoundaryCondition::Neumann, exec)?;
        let (vals, _) = nonzero_spectrum(&op, n, &cfg.eigen)?;
        info!("refine level with {} vertices done", mesh.num_vertices());
        spectra.push(vals);
    }
    Ok(convergence_table("refine-spectrum", &meshes, &spectra, &cfg.modes, start))
}

#[derive(Clone, Debug)]
pub struct BallConfig {
    /// Cells per side of the cube grid behind the coarsest ball.
    pub base_cells: usize,
    pub levels: usize,
    pub epsilon: f64,
    pub modes: Vec<usize>,
    pub eigen: EigenOptions,
}

impl Default for BallConfig {
    /// 384, 3072 and 24576 tetrahedra.
    fn default() -> Self {
        Self { base_cells: 4, levels: 3, epsilon: 0.1, modes: vec![10, 20, 30], eigen: EigenOptions::default() }
    }
}

/// Unit-ball hierarchy with the constant axis-aligned field.
pub fn ball_spectrum(cfg: &BallConfig, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let meshes = hierarchy(&generators::ball(cfg.base_cells)?, cfg.levels);
    let n = cfg.modes.iter().copied().max().unwrap_or(1);
    let mut spectra = Vec::new();
    for mesh in &meshes {
        let (vals, _) = constant_field_spectrum(mesh, cfg.epsilon, BoundaryCondition::Neumann, n, &cfg.eigen, exec)?;
        info!("ball level with {} tets done", mesh.num_elements());
        spectra.push(vals);
    }
    Ok(convergence_table("ball-spectrum", &meshes, &spectra, &cfg.modes, start))
}

#[derive(Clone, Debug)]
pub struct DirichletConfig {
    pub base_edge: f64,
    pub levels: usize,
    pub epsilon: f64,
    /// Periods of the boundary square wave around the domain.
    pub periods: usize,
}

impl Default for DirichletConfig {
    fn default() -> Self {
        Self { base_edge: 0.2, levels: 4, epsilon: 0.1, periods: 4 }
    }
}

/// Square-wave Dirichlet data on a disk hierarchy. Coarse vertices keep
/// their index under refinement, so errors are measured on them directly.
pub fn dirichlet_convergence(cfg: &DirichletConfig, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let meshes = hierarchy(&generators::disk(cfg.base_edge)?, cfg.levels);
    let finest = meshes.last().expect("levels >= 1");
    let fine_field = harmonic_cross_field_2d(finest)?;
    let mut solutions = Vec::new();
    for mesh in &meshes {
        let field = resample_field(&fine_field, finest, mesh)?;
        let op = assemble_operator_with(mesh, &field, cfg.epsilon, BoundaryCondition::Neumann, exec)?;
        let bnd = mesh.boundary_vertices();
        let vals: Vec<f64> = bnd
            .iter()
            .map(|&v| {
                let p = mesh.vertex(v);
                if (cfg.periods as f64 * p[1].atan2(p[0])).sin() >= 0.0 { 1.0 } else { -1.0 }
            })
            .collect();
        solutions.push(apply_dirichlet_partition(&op, &bnd, &vals)?);
    }
    let reference = solutions.last().expect("levels >= 1");
    let mut table = String::from("level,mean_edge,l2_error_vs_finest\n");
    let mut errs = Vec::new();
    for (l, (mesh, u)) in meshes.iter().zip(&solutions).enumerate().take(meshes.len() - 1) {
        let m = crate::geometry::compute_measures(mesh)?;
        let e = (0..mesh.num_vertices()).map(|v| m.dual_volumes[v] * (u[v] - reference[v]).powi(2)).sum::<f64>().sqrt();
        let _ = writeln!(table, "{l},{:.6},{e:.6e}", mean_edge_length(mesh));
        errs.push(e);
    }
    let ok = errs.windows(2).all(|w| w[1] < w[0]);
    let trail: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    let checks = vec![Check::new("L2 error decreases", ok, trail.join(" > "))];
    Ok(Report::new("dirichlet-convergence", checks, table, start))
}

// ---------------------------------------------------------------------------
// Oracle suites

/// Small meshes (≤ 200 vertices) with a nontrivial field each.
pub fn small_test_cases(seed: u64) -> Result<Vec<(String, SimplicialMesh, FrameField)>> {
    let sq = generators::jitter(&generators::square_grid(-1.0, 1.0, 6)?, 0.25, seed);
    let disk = generators::jitter(&generators::disk(0.3)?, 0.2, seed + 1);
    let ann = generators::annulus(0.4, 1.0, 0.3)?;
    let ball = generators::jitter(&generators::ball(3)?, 0.15, seed + 2);
    let cyl = generators::cylinder(0.5, 1.0, 0.35)?;
    let mut out = Vec::new();
    out.push(("square".to_string(), sq.clone(), harmonic_cross_field_2d(&sq)?));
    out.push(("disk".to_string(), disk.clone(), harmonic_cross_field_2d(&disk)?));
    out.push(("annulus".to_string(), ann.clone(), harmonic_cross_field_2d(&ann)?));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames: Vec<OdecoFrame> = (0..ann.num_vertices())
        .map(|_| OdecoFrame::from_angle(rng.gen_range(0.0..PI), [rng.gen_range(0.0..2.0); 2]))
        .collect();
    out.push(("annulus-conformal".to_string(), ann, FrameField::from_frames(frames)?));
    out.push(("ball".to_string(), ball.clone(), helical_field_3d(&ball, [0.3, 0.2, 1.0], 1.1)?));
    out.push(("cylinder".to_string(), cyl.clone(), helical_field_3d(&cyl, [0.0, 0.0, 1.0], PI / 2.0)?));
    for (name, mesh, _) in &out {
        if mesh.num_vertices() > 200 {
            return Err(Error::InvalidInput(format!("test mesh {name} has {} vertices", mesh.num_vertices())));
        }
    }
    Ok(out)
}

/// `𝒜u` from the Schur assembly against a dense solve of the full
/// saddle-point system.
pub fn kkt_equivalence(epsilons: &[f64], rhs_count: usize, seed: u64, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = String::from("mesh,vertices,bc,epsilon,max_rel_error\n");
    let mut worst: f64 = 0.0;
    for (name, mesh, field) in small_test_cases(seed)? {
        for bc in [BoundaryCondition::Natural, BoundaryCondition::Neumann] {
            for &eps in epsilons {
                let sys = MixedSystem::new_with(&mesh, &field, eps, bc, exec)?;
                let op = assemble_operator_with(&mesh, &field, eps, bc, exec)?;
                let mut case_worst: f64 = 0.0;
                for _ in 0..rhs_count {
                    let u: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let oracle = sys.kkt_apply_dense(&u)?;
                    let got = op.apply(&u);
                    let scale = oracle.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    let err = got.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    case_worst = case_worst.max(err / scale.max(1e-300));
                }
                let _ = writeln!(table, "{name},{},{bc},{eps},{case_worst:.3e}", mesh.num_vertices());
                worst = worst.max(case_worst);
            }
        }
    }
    let checks = vec![Check::new("Schur operator matches full KKT solve", worst <= 1e-8, format!("max rel error {worst:.2e}, tol 1e-8"))];
    Ok(Report::new("kkt", checks, table, start))
}

/// Symmetry, PSD, constants and affine functions in the kernel, `B·P = 0`
/// and invariance under rescaled constraints.
pub fn operator_invariants(epsilons: &[f64], seed: u64, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let mut table =
        String::from("mesh,bc,epsilon,asymmetry,min_eig_rel,const_residual,affine_residual,bp_rel,rescale_rel\n");
    let (mut asym, mut neg, mut cres, mut ares, mut bp, mut resc): (f64, f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (name, mesh, field) in small_test_cases(seed)? {
        for bc in [BoundaryCondition::Natural, BoundaryCondition::Neumann] {
            for &eps in epsilons {
                let op = assemble_operator_with(&mesh, &field, eps, bc, exec)?;
                let a = op.matrix();
                let amax = a.matrix().max_abs().max(1e-300);
                let norm = a.matrix().norm_inf().max(1e-300);
                let s = a.asymmetry() / amax;
                let dense = a.matrix().to_dense();
                let ev = nalgebra::SymmetricEigen::new(dense).eigenvalues;
                let lmin = ev.min() / ev.max().abs().max(1e-300);
                let ones = vec![1.0; a.dim()];
                let c = crate::sparse::norm2(&a.mul_vec(&ones)) / (norm * crate::sparse::norm2(&ones));
                let aff = if bc == BoundaryCondition::Natural {
                    (0..mesh.dim())
                        .map(|j| {
                            let x: Vec<f64> = (0..a.dim()).map(|v| mesh.vertex(v)[j]).collect();
                            crate::sparse::norm2(&a.mul_vec(&x)) / (norm * crate::sparse::norm2(&x))
                        })
                        .fold(0.0, f64::max)
                } else {
                    0.0
                };
                let (b, r) = projector_checks(&mesh, &field, eps, bc, seed)?;
                let _ = writeln!(table, "{name},{bc},{eps},{s:.2e},{lmin:.2e},{c:.2e},{aff:.2e},{b:.2e},{r:.2e}");
                asym = asym.max(s);
                neg = neg.min(lmin);
                cres = cres.max(c);
                ares = ares.max(aff);
                bp = bp.max(b);
                resc = resc.max(r);
            }
        }
    }
    let checks = vec![
        Check::new("symmetric", asym <= 1e-12, format!("max |a_ij - a_ji| / max|a| = {asym:.1e}, tol 1e-12")),
        Check::new("positive semidefinite", neg >= -1e-10, format!("min eigenvalue / max = {neg:.1e}, tol -1e-10")),
        Check::new("constants in kernel", cres <= 1e-10, format!("|A1| / (|A| |1|) = {cres:.1e}, tol 1e-10")),
        Check::new("affine kernel (natural)", ares <= 1e-10, format!("|Ax| / (|A| |x|) = {ares:.1e}, tol 1e-10")),
        Check::new("B P = 0", bp <= 1e-10, format!("max |B_v P_v| / max |P_v| = {bp:.1e}, tol 1e-10")),
        Check::new("constraint rescaling invariance", resc <= 1e-10, format!("max change / max |P_v| = {resc:.1e}, tol 1e-10")),
    ];
    Ok(Report::new("invariants", checks, table, start))
}

fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> OdecoFrame {
    if dim == 2 {
        OdecoFrame::from_angle(rng.gen_range(0.0..2.0 * PI), [1.0, 1.0])
    } else {
        let q = nalgebra::UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        OdecoFrame::from_rotation(q.to_rotation_matrix().matrix(), [1.0; 3]).expect("rotation")
    }
}

/// Alignment inequality and equality, the zero form on mixed directions, and
/// the ellipticity bound, `samples` draws each (split over 2D and 3D).
pub fn tensor_properties(samples: usize, seed: u64) -> Result<Report> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut ineq, mut eq, mut mixed, mut ell) = (f64::NEG_INFINITY, 0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..samples {
        let dim = 2 + i % 2;
        let frame = random_rotation(dim, &mut rng);
        let t = odeco_to_form(&frame);
        // Random symmetric S: S:T:S ≤ tr(S²).
        let m: Vec<f64> = (0..crate::symtensor::mandel_dim(dim)).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = Sym2::from_mandel(&m)?;
        let tr = s.dot(&s);
        ineq = ineq.max((alignment_quadratic(&s, &t)? - tr) / tr);
        // S with the frame as eigenvectors: equality.
        let lam: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut sa = Sym2::zero(dim);
        for (k, l) in lam.iter().enumerate() {
            let p = Sym2::outer(frame.axis(k)).scaled(*l);
            sa = Sym2::from_mandel(&sa.mandel().iter().zip(p.mandel()).map(|(a, b)| a + b).collect::<Vec<_>>())?;
        }
        let sum_sq: f64 = lam.iter().map(|l| l * l).sum();
        eq = eq.max((alignment_quadratic(&sa, &t)? - sum_sq).abs() / sum_sq.max(1e-300));
        // ξᵃ⊗ξᵇ + ξᵇ⊗ξᵃ: zero.
        let (a, b) = (rng.gen_range(0..dim), rng.gen_range(0..dim - 1));
        let b = if b >= a { b + 1 } else { b };
        let sm = Sym2::sym_outer(frame.axis(a), frame.axis(b));
        mixed = mixed.max(alignment_quadratic(&sm, &t)?.abs());
        // Conformal octahedral with weight w: σ ≥ εw|ζ|⁴.
        let w = rng.gen_range(0.05..3.0);
        let eps = rng.gen_range(1e-4..=1.0);
        let tw = t.scaled(w);
        let te = modify_epsilon(&tw, w, eps)?;
        let zeta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z2 = dot(&zeta, &zeta);
        ell = ell.min(principal_symbol(&te, &zeta)? / (eps * w * z2 * z2));
    }
    let table = format!(
        "property,value\nmax_rel_excess_over_trace,{ineq:.3e}\nmax_rel_equality_defect,{eq:.3e}\nmax_mixed_direction_value,{mixed:.3e}\nmin_symbol_over_bound,{ell:.12}\n"
    );
    let checks = vec![
        Check::new("alignment inequality", ineq <= 1e-10, format!("max (S:T:S - tr S²)/tr S² = {ineq:.1e}, {samples} samples")),
        Check::new("aligned equality", eq <= 1e-10, format!("max rel defect {eq:.1e}, {samples} samples")),
        Check::new("mixed-direction zero form", mixed <= 1e-12, format!("max |value| {mixed:.1e}, {samples} samples")),
        Check::new("ellipticity bound", ell >= 1.0 - 1e-10, format!("min symbol / (eps w |z|^4) = {ell:.12}, {samples} samples")),
    ];
    Ok(Report::new("tensor", checks, table, start))
}

/// Box QP against exhaustive enumeration on random small instances, and
/// bound respect of a boundary coloring.
pub fn qp_oracle(trials: usize, max_vars: usize, seed: u64, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = String::from("trial,vars,fixed,qp_objective,oracle_objective,abs_diff\n");
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let n = rng.gen_range(2..=max_vars);
        let r = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        // Rank-deficient PSD half the time, like the operators.
        let rank = if t % 2 == 0 { n } else { (n / 2).max(1) };
        let rr = r.columns(0, rank).into_owned();
        let a = &rr * rr.transpose();
        let nfix = rng.gen_range(1..=n.div_ceil(3));
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..nfix {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.gen_range(0.2..1.5)).collect();
        let fixed: Vec<(usize, f64)> = idx[..nfix].iter().map(|&i| (i, rng.gen_range(lower[i]..=upper[i]))).collect();
        let sym = SparseSym::new(CsrMatrix::from_dense(&a))?;
        let res = crate::solve::solve_box_qp_matrix(&sym, &fixed, &lower, &upper, &QpOptions::default())?;
        let (_, best) = brute_force_box_qp(&a, &fixed, &lower, &upper)?;
        let diff = (res.objective - best).abs();
        let _ = writeln!(table, "{t},{n},{nfix},{:.12e},{best:.12e},{diff:.3e}", res.objective);
        worst = worst.max(diff / best.abs().max(1.0));
    }
    // Coloring bounds on a disk.
    let mesh = generators::disk(0.12)?;
    let field = harmonic_cross_field_2d(&mesh)?;
    let op = assemble_operator_with(&mesh, &field, 0.01, BoundaryCondition::Natural, exec)?;
    let bnd = mesh.boundary_vertices();
    let colors: Vec<[f64; 3]> = bnd
        .iter()
        .map(|&v| {
            let a = mesh.vertex(v)[1].atan2(mesh.vertex(v)[0]);
            [0.5 + 0.5 * (3.0 * a).sin(), if a > 0.0 { 0.9 } else { 0.1 }, 0.5 + 0.3 * a.cos()]
        })
        .collect();
    let out = crate::apps::color_by_boundary(&mesh, &op, &colors, &QpOptions::default())?;
    let mut violation: f64 = 0.0;
    for ch in 0..3 {
        let lo = colors.iter().map(|c| c[ch]).fold(f64::INFINITY, f64::min);
        let hi = colors.iter().map(|c| c[ch]).fold(f64::NEG_INFINITY, f64::max);
        for c in &out {
            violation = violation.max(lo - c[ch]).max(c[ch] - hi);
        }
    }
    let checks = vec![
        Check::new("box QP matches enumeration", worst <= 1e-8, format!("max objective diff {worst:.1e} over {trials} trials, tol 1e-8")),
        Check::new("coloring respects bounds", violation <= 0.0, format!("max violation {violation:.1e}")),
    ];
    Ok(Report::new("qp", checks, table, start))
}

// ---------------------------------------------------------------------------
// Anisotropy

/// Radius of the superlevel set `{f ≥ level}` around `center` along the
/// frame axes versus along the diagonals between them.
///
/// Returns `(axis_radius, diagonal_radius)`, each averaged over the four
/// directions. The radius along a ray is the first downward crossing of
/// `level`, bisected to `1e-6` of the step.
pub fn star_radii(mesh: &SimplicialMesh, f: &[f64], center: [f64; 2], axis_angle: f64, level: f64) -> Result<(f64, f64)> {
    if mesh.dim() != 2 {
        return Err(Error::InvalidInput("star radii are measured on triangle meshes".into()));
    }
    let loc = PointLocator::new(mesh);
    if loc.interpolate(f, &center) < level {
        return Err(Error::InvalidInput("level is above the value at the center".into()));
    }
    let step = 0.25 * mean_edge_length(mesh);
    let radius = |theta: f64| -> Result<f64> {
        let dir = [theta.cos(), theta.sin()];
        let at = |r: f64| {
            let p = [center[0] + r * dir[0], center[1] + r * dir[1]];
            let (_, _, inside) = loc.locate(&p);
            (loc.interpolate(f, &p), inside)
        };
        let mut r0 = 0.0;
        loop {
            let r1 = r0 + step;
            let (v, inside) = at(r1);
            if !inside {
                return Err(Error::InvalidInput("superlevel set reaches the boundary".into()));
            }
            if v < level {
                let (mut a, mut b) = (r0, r1);
                while b - a > 1e-6 * step {
                    let m = 0.5 * (a + b);
                    if at(m).0 >= level {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return Ok(0.5 * (a + b));
            }
            r0 = r1;
        }
    };
    let mut axis = 0.0;
    let mut diag = 0.0;
    for k in 0..4 {
        let t = axis_angle + k as f64 * PI / 2.0;
        axis += radius(t)? / 4.0;
        diag += radius(t + PI / 4.0)? / 4.0;
    }
    Ok((axis, diag))
}

fn nearest_vertex(mesh: &SimplicialMesh, p: [f64; 2]) -> usize {
    (0..mesh.num_vertices())
        .min_by(|&a, &b| {
            let da = (mesh.vertex(a)[0] - p[0]).hypot(mesh.vertex(a)[1] - p[1]);
            let db = (mesh.vertex(b)[0] - p[0]).hypot(mesh.vertex(b)[1] - p[1]);
            da.total_cmp(&db)
        })
        .expect("mesh has vertices")
}

#[derive(Clone, Debug)]
pub struct AnisotropyConfig {
    pub disk_edge: f64,
    pub tau: f64,
    pub epsilons: Vec<f64>,
    /// Isoline level as a fraction of the peak response.
    pub level: f64,
    /// Frame angle of the constant field.
    pub angle: f64,
}

impl Default for AnisotropyConfig {
    fn default() -> Self {
        Self { disk_edge: 0.01, tau: 1e-5, epsilons: vec![1.0, 2e-1, 4e-2, 8e-3], level: 0.5, angle: 0.0 }
    }
}

/// Impulse response at the disk center under one implicit Euler step of the
/// natural-condition operator, for decreasing `ε`.
pub fn anisotropy(cfg: &AnisotropyConfig, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let mesh = generators::disk(cfg.disk_edge)?;
    let field = constant_field(&mesh, &OdecoFrame::from_angle(cfg.angle, [1.0, 1.0]))?;
    let c = nearest_vertex(&mesh, [0.0, 0.0]);
    let center = [mesh.vertex(c)[0], mesh.vertex(c)[1]];
    let mut table = String::from("epsilon,axis_radius,diagonal_radius,ratio\n");
    let mut ratios = Vec::new();
    for &eps in &cfg.epsilons {
        let op = assemble_operator_with(&mesh, &field, eps, BoundaryCondition::Natural, exec)?;
        let mut u0 = vec![0.0; mesh.num_vertices()];
        u0[c] = 1.0 / op.mass()[c];
        let u = diffuse(&op, &u0, cfg.tau)?;
        let peak = u[c];
        let (ra, rd) = star_radii(&mesh, &u, center, cfg.angle, cfg.level * peak)?;
        let ratio = ra.max(rd) / ra.min(rd);
        let _ = writeln!(table, "{eps},{ra:.6e},{rd:.6e},{ratio:.6}");
        ratios.push(ratio);
    }
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let trail: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    let mut checks = vec![Check::new("anisotropy increases as eps decreases", increasing, trail.join(" < "))];
    if let Some(i) = cfg.epsilons.iter().position(|&e| e == 1.0) {
        checks.push(Check::new("isotropic at eps=1", (ratios[i] - 1.0).abs() < 0.05, format!("ratio {:.4}, need within 5% of 1", ratios[i])));
    }
    Ok(Report::new("anisotropy", checks, table, start))
}

// ---------------------------------------------------------------------------
// Warp sweep

#[derive(Clone, Debug)]
pub struct WarpConfig {
    pub cells: usize,
    pub coefficients: Vec<f64>,
    pub epsilon: f64,
    pub modes: usize,
    pub bc: BoundaryCondition,
    pub eigen: EigenOptions,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self {
            cells: 32,
            coefficients: vec![0.05, 0.025, 0.0125, 0.0],
            epsilon: 0.1,
            modes: 30,
            bc: BoundaryCondition::Neumann,
            eigen: EigenOptions::default(),
        }
    }
}

/// Polynomial warps of `[-1, 1]²`: spectral deviation against `c`.
pub fn warp_sweep(cfg: &WarpConfig, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let base = generators::square_grid(-1.0, 1.0, cfg.cells)?;
    let mut table = String::from("c,mode,unwarped,warped,rel_deviation\n");
    let mut devs = Vec::new();
    let k = cfg.modes + 4;
    for &c in &cfg.coefficients {
        let r = analytic::warp_experiment(&base, &ConformalMap::Polynomial { c }, cfg.epsilon, cfg.bc, k, &cfg.eigen, exec)?;
        let (a, b) = (r.unwarped.nonzero_values(), r.warped.nonzero_values());
        for (i, (x, y)) in a.iter().zip(b).take(cfg.modes).enumerate() {
            let _ = writeln!(table, "{c},{},{x:.10e},{y:.10e},{:.6e}", i + 1, (x - y).abs() / x);
        }
        devs.push((c, r.median_relative_deviation(cfg.modes)));
    }
    let mut sorted = devs.clone();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let positive: Vec<&(f64, f64)> = sorted.iter().filter(|d| d.0 != 0.0).collect();
    let mono = positive.windows(2).all(|w| w[1].1 < w[0].1);
    let trail: Vec<String> = positive.iter().map(|(c, d)| format!("c={c}: {d:.3e}")).collect();
    let mut checks = vec![Check::new("deviation decreases as c -> 0", mono, trail.join(", "))];
    if let Some(&(_, d0)) = devs.iter().find(|d| d.0 == 0.0) {
        checks.push(Check::new("no deviation at c = 0", d0 < 1e-10, format!("{d0:.1e}, tol 1e-10")));
    }
    Ok(Report::new("warp", checks, table, start))
}

// ---------------------------------------------------------------------------
// Distances

/// Metric axioms on random triples and the `ε = 1` biharmonic identity.
pub fn distance_properties(triples: usize, modes: usize, seed: u64, exec: Exec) -> Result<Report> {
    let start = Instant::now();
    let mesh = generators::disk(0.08)?;
    let field = harmonic_cross_field_2d(&mesh)?;
    let opts = EigenOptions::default();
    let op = assemble_operator_with(&mesh, &field, 0.05, BoundaryCondition::Neumann, exec)?;
    let emb = build_embedding(&op, modes, &opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.num_vertices();
    let (mut sym, mut ident, mut tri) = (true, true, 0.0f64);
    for _ in 0..triples {
        let (p, q, r) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        sym &= emb.distance(p, q) == emb.distance(q, p);
        ident &= emb.distance(p, p) == 0.0 && (p == q || emb.distance(p, q) > 0.0);
        tri = tri.max(emb.distance(p, r) - emb.distance(p, q) - emb.distance(q, r));
    }
    let unit = assemble_operator_with(&mesh, &field, 1.0, BoundaryCondition::Neumann, exec)?;
    let a = build_embedding(&unit, modes, &opts)?;
    let b = biharmonic_embedding(&mesh, modes, &opts)?;
    let src = nearest_vertex(&mesh, [0.4, 0.2]);
    let identical = a.values == b.values && distance_field(&a, src)? == distance_field(&b, src)?;
    let table = format!("property,value\nsymmetric,{sym}\nidentity,{ident}\nmax_triangle_excess,{tri:.3e}\nbiharmonic_identical,{identical}\n");
    let checks = vec![
        Check::new("symmetry", sym, format!("{triples} random pairs, exact")),
        Check::new("identity", ident, format!("{triples} random pairs, exact")),
        Check::new("triangle inequality", tri <= 1e-14, format!("max excess {tri:.1e} over {triples} triples")),
        Check::new("eps=1 equals biharmonic distance", identical, "bitwise comparison of spectra and distances".to_string()),
    ];
    Ok(Report::new("distance", checks, table, start))
}
