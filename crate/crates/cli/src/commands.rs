use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use frameop::analytic::{self, ConformalMap};
use frameop::apps;
use frameop::export::{self, PointData};
use frameop::fem::{self, assemble_operator_with, AssembledOperator, BoundaryCondition};
use frameop::framefield::{self, constant_field, FrameField};
use frameop::geometry::{generators, io, refine_uniform, SimplicialMesh};
use frameop::solve::{self, EigenOptions, QpOptions};
use frameop::validate::{self, Report};
use frameop::{CsrMatrix, Exec, OdecoFrame};

use crate::manifest::Manifest;
use crate::{
    BcArg, Cli, ColorArgs, Command, DiffuseArgs, DirichletArgs, DistanceArgs, EigsArgs, Experiment, FieldAction,
    FieldGenArgs, FieldKindArg, MapArg, MeshAction, MeshGenArgs, OperatorArgs, Shape, SourceArgs, ValidateArgs,
    EXIT_INPUT, EXIT_NUMERICAL, EXIT_USAGE, EXIT_VALIDATION,
};

#[derive(Debug)]
pub enum CliError {
    Core(frameop::Error),
    Io(std::io::Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_input_error() => EXIT_NUMERICAL,
            CliError::Core(_) | CliError::Io(_) => EXIT_INPUT,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Usage(m) => write!(f, "{m}"),
        }
    }
}

impl From<frameop::Error> for CliError {
    fn from(e: frameop::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn input_error(msg: impl Into<String>) -> CliError {
    CliError::Core(frameop::Error::InvalidInput(msg.into()))
}

/// Output directory plus the manifest being built.
struct Run {
    out: PathBuf,
    manifest: Manifest,
}

impl Run {
    fn write(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.out.join(name);
        export::write_text(&p, text)?;
        self.manifest.output(&p);
        Ok(p)
    }

    fn finish(self) -> Result<()> {
        self.manifest.write(&self.out)?;
        Ok(())
    }
}

pub fn run(cli: &Cli) -> Result<u8> {
    fs::create_dir_all(&cli.out)?;
    let mut run = Run { out: cli.out.clone(), manifest: Manifest::new() };
    let code = match &cli.command {
        Command::Mesh { action: MeshAction::Gen(a) } => mesh_gen(&mut run, a)?,
        Command::Field { action: FieldAction::Gen(a) } => field_gen(&mut run, a)?,
        Command::Assemble(a) => assemble(&mut run, a)?,
        Command::Dirichlet(a) => dirichlet(&mut run, a)?,
        Command::Diffuse(a) => diffuse(&mut run, a)?,
        Command::Eigs(a) => eigs(&mut run, a)?,
        Command::Distance(a) => distance(&mut run, a)?,
        Command::Color(a) => color(&mut run, a)?,
        Command::Validate(a) => validate(&mut run, a)?,
    };
    run.finish()?;
    Ok(code)
}

fn mesh_gen(run: &mut Run, a: &MeshGenArgs) -> Result<u8> {
    let mut mesh = match a.shape {
        Shape::Square => generators::square_grid(-1.0, 1.0, a.n)?,
        Shape::Disk => generators::disk(a.h)?,
        Shape::Annulus => generators::annulus(0.5, 1.0, a.h)?,
        Shape::Ball => generators::ball(a.n)?,
        Shape::Box => generators::box_grid([-1.0; 3], [1.0; 3], [a.n; 3])?,
        Shape::Cylinder => generators::cylinder(1.0, 2.0, a.h)?,
    };
    for _ in 0..a.refine {
        mesh = refine_uniform(&mesh);
    }
    if a.jitter > 0.0 {
        mesh = generators::jitter(&mesh, a.jitter, a.seed);
    }
    run.manifest.stage("generate");
    io::save_mesh(&mesh, &a.output, None)?;
    run.manifest.output(&a.output);
    run.manifest.parameters = json!({
        "shape": format!("{:?}", a.shape).to_lowercase(),
        "n": a.n, "h": a.h, "refine": a.refine, "jitter": a.jitter, "seed": a.seed,
        "vertices": mesh.num_vertices(), "elements": mesh.num_elements(),
    });
    println!("{} vertices, {} elements -> {}", mesh.num_vertices(), mesh.num_elements(), a.output.display());
    Ok(0)
}

fn load_mesh(run: &mut Run, path: &Path) -> Result<SimplicialMesh> {
    let mesh = io::load_mesh(path, None)?;
    run.manifest.input(path);
    Ok(mesh)
}

fn octahedral(dim: usize) -> Result<OdecoFrame> {
    Ok(OdecoFrame::axis_aligned(dim, &vec![1.0; dim])?)
}

fn conformal_map(map: MapArg, c: f64) -> ConformalMap {
    match map {
        MapArg::Identity => ConformalMap::identity(),
        MapArg::Poly => ConformalMap::Polynomial { c },
        MapArg::Exp => ConformalMap::Exponential,
    }
}

fn field_gen(run: &mut Run, a: &FieldGenArgs) -> Result<u8> {
    let mesh = load_mesh(run, &a.mesh)?;
    let dim = mesh.dim();
    let field = match a.kind {
        FieldKindArg::Constant => {
            let w = a.weights.clone().unwrap_or_else(|| vec![1.0; dim]);
            if w.len() != dim {
                return Err(input_error(format!("{dim} weights expected, got {}", w.len())));
            }
            let frame = if dim == 2 { OdecoFrame::from_angle(a.angle, [w[0], w[1]]) } else { OdecoFrame::axis_aligned(dim, &w)? };
            constant_field(&mesh, &frame)?
        }
        FieldKindArg::Harmonic2d => framefield::harmonic_cross_field_2d(&mesh)?,
        FieldKindArg::Helical => {
            let axis: [f64; 3] =
                a.axis.as_slice().try_into().map_err(|_| input_error("the helix axis needs three components"))?;
            framefield::helical_field_3d(&mesh, axis, a.pitch)?
        }
        FieldKindArg::Coframe => {
            let Some(warped_path) = &a.warped_mesh else {
                return Err(CliError::Usage("--warped-mesh is required for a coframe field".into()));
            };
            let map = conformal_map(a.map, a.c);
            let warped = map.warp_mesh(&mesh)?;
            let field = analytic::warped_coframe_field(&mesh, &warped, &map)?;
            io::save_mesh(&warped, warped_path, None)?;
            run.manifest.output(warped_path);
            field
        }
    };
    run.manifest.stage("field");
    field.save(&a.output)?;
    run.manifest.output(&a.output);
    run.manifest.parameters = json!({
        "kind": field.kind().name(), "angle": a.angle, "weights": a.weights, "axis": a.axis,
        "pitch": a.pitch, "c": a.c, "singular_vertices": field.singular_vertices().len(),
    });
    Ok(0)
}

fn load_field(run: &mut Run, mesh: &SimplicialMesh, path: Option<&Path>) -> Result<FrameField> {
    let field = match path {
        Some(p) => {
            let f = FrameField::load(p)?;
            run.manifest.input(p);
            f.check_mesh(mesh)?;
            f
        }
        None => constant_field(mesh, &octahedral(mesh.dim())?)?,
    };
    Ok(field)
}

fn build_operator(run: &mut Run, a: &OperatorArgs) -> Result<(SimplicialMesh, AssembledOperator)> {
    let mesh = load_mesh(run, &a.mesh)?;
    let field = load_field(run, &mesh, a.field.as_deref())?;
    run.manifest.stage("load");
    let op = assemble_operator_with(&mesh, &field, a.epsilon, a.bc.into(), Exec::default())?;
    run.manifest.stage("assemble");
    Ok((mesh, op))
}

fn operator_params(a: &OperatorArgs, op: &AssembledOperator) -> serde_json::Value {
    json!({
        "epsilon": a.epsilon,
        "bc": BoundaryCondition::from(a.bc).name(),
        "vertices": op.num_vertices(),
        "nnz": op.matrix().matrix().nnz(),
        "field_fingerprint": op.fingerprint(),
    })
}

fn assemble(run: &mut Run, a: &OperatorArgs) -> Result<u8> {
    let (_, op) = build_operator(run, a)?;
    run.write("operator.mtx", &export::matrix_market(op.matrix().matrix()))?;
    run.write("mass.mtx", &export::matrix_market(&CsrMatrix::from_diagonal(op.mass())))?;
    run.manifest.stage("write");
    run.manifest.parameters = operator_params(a, &op);
    println!("{} x {} operator, {} nonzeros", op.num_vertices(), op.num_vertices(), op.matrix().matrix().nnz());
    Ok(0)
}

/// Parses `vertex,value...` rows, skipping a non-numeric header.
fn read_rows(path: &Path, width: usize) -> Result<HashMap<usize, Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let Ok(v) = parts[0].parse::<usize>() else {
            if i == 0 {
                continue;
            }
            return Err(parse_error(i + 1, "vertex index expected"));
        };
        if parts.len() != width + 1 {
            return Err(parse_error(i + 1, &format!("{} columns expected", width + 1)));
        }
        let vals = parts[1..]
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| parse_error(i + 1, &format!("bad number '{s}'"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.insert(v, vals);
    }
    Ok(rows)
}

fn parse_error(line: usize, msg: &str) -> CliError {
    CliError::Core(frameop::Error::Parse { line, msg: msg.into() })
}

/// Values for every boundary vertex, in `boundary_vertices` order.
fn boundary_data(mesh: &SimplicialMesh, path: &Path, width: usize) -> Result<Vec<Vec<f64>>> {
    let rows = read_rows(path, width)?;
    mesh.boundary_vertices()
        .into_iter()
        .map(|v| rows.get(&v).cloned().ok_or_else(|| input_error(format!("no value for boundary vertex {v}"))))
        .collect()
}

fn boundary_angle(mesh: &SimplicialMesh, v: usize) -> f64 {
    let p = mesh.vertex(v);
    p[1].atan2(p[0])
}

fn dirichlet(run: &mut Run, a: &DirichletArgs) -> Result<u8> {
    if !matches!(a.op.bc, BcArg::Neumann) {
        return Err(CliError::Usage("the Dirichlet problem uses --bc neumann".into()));
    }
    let (mesh, op) = build_operator(run, &a.op)?;
    let bnd = mesh.boundary_vertices();
    let values: Vec<f64> = match (&a.boundary_values, a.square_wave) {
        (Some(p), _) => {
            run.manifest.input(p);
            boundary_data(&mesh, p, 1)?.into_iter().map(|r| r[0]).collect()
        }
        (None, Some(k)) => bnd
            .iter()
            .map(|&v| if (k as f64 * boundary_angle(&mesh, v)).sin() >= 0.0 { 1.0 } else { -1.0 })
            .collect(),
        (None, None) => return Err(CliError::Usage("give --boundary-values or --square-wave".into())),
    };
    let u = fem::apply_dirichlet_partition(&op, &bnd, &values)?;
    run.manifest.stage("solve");
    run.write("solution.csv", &export::vertex_csv(&[("u", &u)]))?;
    run.write("solution.vtk", &export::vtk_unstructured(&mesh, "dirichlet solution", &[PointData::Scalars("u", &u)]))?;
    run.manifest.stage("write");
    let mut params = operator_params(&a.op, &op);
    params["square_wave"] = json!(a.square_wave);
    params["boundary_vertices"] = json!(bnd.len());
    run.manifest.parameters = params;
    Ok(0)
}

fn nearest(mesh: &SimplicialMesh, p: &[f64]) -> usize {
    let d = |v: usize| mesh.vertex(v).iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    (0..mesh.num_vertices()).min_by(|&a, &b| d(a).total_cmp(&d(b))).unwrap_or(0)
}

fn source_vertex(mesh: &SimplicialMesh, s: &SourceArgs) -> Result<usize> {
    let v = match (s.source, &s.at) {
        (Some(v), _) => v,
        (None, Some(p)) => {
            if p.len() != mesh.dim() {
                return Err(input_error(format!("--at needs {} coordinates", mesh.dim())));
            }
            nearest(mesh, p)
        }
        (None, None) => nearest(mesh, &[0.0; 3][..mesh.dim()]),
    };
    if v >= mesh.num_vertices() {
        return Err(input_error(format!("source vertex {v} out of range")));
    }
    Ok(v)
}

fn diffuse(run: &mut Run, a: &DiffuseArgs) -> Result<u8> {
    let mesh = load_mesh(run, &a.mesh)?;
    let field = load_field(run, &mesh, a.field.as_deref())?;
    let c = source_vertex(&mesh, &a.source)?;
    run.manifest.stage("load");
    let mut names = Vec::new();
    let mut columns = Vec::new();
    for &eps in &a.epsilon {
        let op = assemble_operator_with(&mesh, &field, eps, a.bc.into(), Exec::default())?;
        let mut u0 = vec![0.0; mesh.num_vertices()];
        u0[c] = 1.0 / op.mass()[c];
        columns.push(solve::diffuse(&op, &u0, a.tau)?);
        names.push(format!("eps_{eps}"));
        run.manifest.stage(&format!("eps={eps}"));
    }
    let cols: Vec<(&str, &[f64])> = names.iter().map(String::as_str).zip(columns.iter().map(Vec::as_slice)).collect();
    run.write("diffusion.csv", &export::vertex_csv(&cols))?;
    let data: Vec<PointData> = cols.iter().map(|&(n, v)| PointData::Scalars(n, v)).collect();
    run.write("diffusion.vtk", &export::vtk_unstructured(&mesh, "impulse response", &data))?;
    run.manifest.stage("write");
    run.manifest.parameters = json!({
        "epsilon": a.epsilon, "bc": BoundaryCondition::from(a.bc).name(), "tau": a.tau, "source": c,
    });
    Ok(0)
}

fn eigs(run: &mut Run, a: &EigsArgs) -> Result<u8> {
    let (mesh, op) = build_operator(run, &a.op)?;
    let n = op.num_vertices();
    if a.num == 0 || a.num >= n {
        return Err(input_error(format!("--num must lie in 1..{n}")));
    }
    let opts = EigenOptions { method: a.method.into(), seed: a.seed, ..Default::default() };
    let eig = solve::eigs_generalized(op.matrix(), op.mass(), a.num, &opts)?;
    run.manifest.stage("eigs");
    run.write("eigenvalues.csv", &export::eigen_csv(&eig))?;
    run.write("eigenvectors.csv", &export::eigenvectors_csv(&eig))?;
    let k = a.vtk_modes.min(eig.values.len());
    let vecs: Vec<Vec<f64>> = (0..k).map(|j| eig.vector(j)).collect();
    let names: Vec<String> = (0..k).map(|j| format!("mode_{j}")).collect();
    let data: Vec<PointData> = names.iter().zip(&vecs).map(|(n, v)| PointData::Scalars(n, v)).collect();
    run.write("modes.vtk", &export::vtk_unstructured(&mesh, "eigenvectors", &data))?;
    run.manifest.stage("write");
    let mut params = operator_params(&a.op, &op);
    params["num"] = json!(a.num);
    params["seed"] = json!(a.seed);
    params["dense"] = json!(eig.dense);
    params["iterations"] = json!(eig.iterations);
    params["zero_modes"] = json!(eig.num_zero_modes());
    params["zero_threshold"] = json!(eig.zero_threshold);
    run.manifest.parameters = params;
    println!("{} eigenpairs, {} zero modes", eig.values.len(), eig.num_zero_modes());
    Ok(0)
}

fn distance(run: &mut Run, a: &DistanceArgs) -> Result<u8> {
    if !matches!(a.op.bc, BcArg::Neumann) {
        return Err(CliError::Usage("spectral distances use --bc neumann".into()));
    }
    let (mesh, op) = build_operator(run, &a.op)?;
    let s = source_vertex(&mesh, &a.source)?;
    let opts = EigenOptions { seed: a.seed, ..Default::default() };
    let emb = apps::build_embedding(&op, a.num, &opts)?;
    let dist = apps::distance_field(&emb, s)?;
    run.manifest.stage("embedding");
    let bnd = mesh.boundary_vertices();
    let mut lines = Vec::new();
    if a.paths > 0 && !bnd.is_empty() {
        for i in 0..a.paths.min(bnd.len()) {
            let start = bnd[i * bnd.len() / a.paths.min(bnd.len())];
            let path = apps::trace_descent_path(&mesh, &dist, start)?;
            lines.push(apps::path_positions(&mesh, &path));
        }
    }
    run.manifest.stage("paths");
    run.write("distance.csv", &export::vertex_csv(&[("distance", &dist)]))?;
    run.write("distance.vtk", &export::vtk_unstructured(&mesh, "spectral distance", &[PointData::Scalars("distance", &dist)]))?;
    if !lines.is_empty() {
        run.write("paths.obj", &export::polylines_obj(&lines))?;
    }
    run.manifest.stage("write");
    let mut params = operator_params(&a.op, &op);
    params["source"] = json!(s);
    params["modes"] = json!(emb.num_modes());
    params["paths"] = json!(lines.len());
    params["seed"] = json!(a.seed);
    run.manifest.parameters = params;
    Ok(0)
}

/// Fully saturated hue of `t ∈ [0, 1)`.
fn hue(t: f64) -> [f64; 3] {
    let h = t.rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    match h as usize {
        0 => [1.0, x, 0.0],
        1 => [x, 1.0, 0.0],
        2 => [0.0, 1.0, x],
        3 => [0.0, x, 1.0],
        4 => [x, 0.0, 1.0],
        _ => [1.0, 0.0, x],
    }
}

fn color(run: &mut Run, a: &ColorArgs) -> Result<u8> {
    let mesh = load_mesh(run, &a.mesh)?;
    let field = load_field(run, &mesh, a.field.as_deref())?;
    let bnd = mesh.boundary_vertices();
    let colors: Vec<[f64; 3]> = match &a.boundary_colors {
        Some(p) => {
            run.manifest.input(p);
            boundary_data(&mesh, p, 3)?.into_iter().map(|r| [r[0], r[1], r[2]]).collect()
        }
        None => bnd.iter().map(|&v| hue(boundary_angle(&mesh, v) / std::f64::consts::TAU)).collect(),
    };
    run.manifest.stage("load");
    let op = assemble_operator_with(&mesh, &field, a.epsilon, a.bc.into(), Exec::default())?;
    run.manifest.stage("assemble");
    let out = apps::color_by_boundary(&mesh, &op, &colors, &QpOptions::default())?;
    run.manifest.stage("qp");
    let ch: Vec<Vec<f64>> = (0..3).map(|c| out.iter().map(|x| x[c]).collect()).collect();
    run.write("colors.csv", &export::vertex_csv(&[("r", &ch[0]), ("g", &ch[1]), ("b", &ch[2])]))?;
    run.write("colors.vtk", &export::vtk_unstructured(&mesh, "boundary coloring", &[PointData::Colors("color", &out)]))?;
    run.manifest.stage("write");
    run.manifest.parameters = json!({
        "epsilon": a.epsilon, "bc": BoundaryCondition::from(a.bc).name(), "boundary_vertices": bnd.len(),
    });
    Ok(0)
}

fn experiment_name(e: Experiment) -> &'static str {
    match e {
        Experiment::SquareSpectrum => "square-spectrum",
        Experiment::RefineSpectrum => "refine-spectrum",
        Experiment::BallSpectrum => "ball-spectrum",
        Experiment::Warp => "warp",
        Experiment::DirichletConvergence => "dirichlet-convergence",
        Experiment::Anisotropy => "anisotropy",
        Experiment::Bilaplacian => "bilaplacian",
        Experiment::Kkt => "kkt",
        Experiment::Invariants => "invariants",
        Experiment::Tensor => "tensor",
        Experiment::Qp => "qp",
        Experiment::Distance => "distance",
    }
}

fn run_experiment(a: &ValidateArgs) -> Result<Report> {
    let exec = Exec::default();
    let q = a.quick;
    let report = match a.experiment {
        Experiment::SquareSpectrum => {
            let mut cfg = validate::SquareConfig::default();
            if q {
                cfg.cells = vec![12, 24, 48];
            }
            if a.compare_bc {
                cfg.compare_bc = Some(BoundaryCondition::Natural);
            }
            validate::square_spectrum(&cfg, exec)?
        }
        Experiment::RefineSpectrum => {
            let mut cfg = validate::RefineConfig::default();
            if q {
                cfg = validate::RefineConfig { base_edge: 0.4, levels: 3, modes: vec![5, 10], ..cfg };
            }
            validate::refine_spectrum(&cfg, exec)?
        }
        Experiment::BallSpectrum => {
            let mut cfg = validate::BallConfig::default();
            if q {
                cfg = validate::BallConfig { base_cells: 2, levels: 3, modes: vec![5, 10], ..cfg };
            }
            validate::ball_spectrum(&cfg, exec)?
        }
        Experiment::Warp => {
            let mut cfg = validate::WarpConfig::default();
            match a.map {
                MapArg::Poly => {}
                MapArg::Identity => cfg.coefficients = vec![0.0],
                MapArg::Exp => return Err(input_error("the warp sweep uses polynomial maps; choose poly or identity")),
            }
            if q {
                cfg.cells = 12;
                cfg.modes = 10;
            }
            validate::warp_sweep(&cfg, exec)?
        }
        Experiment::DirichletConvergence => {
            let mut cfg = validate::DirichletConfig::default();
            if q {
                cfg = validate::DirichletConfig { base_edge: 0.4, levels: 3, ..cfg };
            }
            validate::dirichlet_convergence(&cfg, exec)?
        }
        Experiment::Anisotropy => {
            let mut cfg = validate::AnisotropyConfig::default();
            if q {
                cfg.disk_edge = 0.04;
            }
            validate::anisotropy(&cfg, exec)?
        }
        Experiment::Bilaplacian => validate::bilaplacian_reduction(&generators::disk(if q { 0.1 } else { 0.025 })?, exec)?,
        Experiment::Kkt => validate::kkt_equivalence(&[1.0, 0.3, 0.01], if q { 5 } else { 20 }, a.seed, exec)?,
        Experiment::Invariants => validate::operator_invariants(&[1.0, 0.3, 0.01], a.seed, exec)?,
        Experiment::Tensor => validate::tensor_properties(if q { 200 } else { 2000 }, a.seed)?,
        Experiment::Qp => validate::qp_oracle(if q { 10 } else { 60 }, if q { 8 } else { 12 }, a.seed, exec)?,
        Experiment::Distance => validate::distance_properties(if q { 200 } else { 1000 }, if q { 16 } else { 64 }, a.seed, exec)?,
    };
    Ok(report)
}

fn validate(run: &mut Run, a: &ValidateArgs) -> Result<u8> {
    let name = experiment_name(a.experiment);
    let report = run_experiment(a)?;
    run.manifest.stage(name);
    run.write(&format!("{name}.csv"), &report.table)?;
    let summary = report.summary();
    run.write(&format!("{name}.txt"), &summary)?;
    print!("{summary}");
    run.manifest.parameters = json!({
        "experiment": name, "quick": a.quick, "compare_bc": a.compare_bc, "seed": a.seed,
        "passed": report.passed(),
        "checks": report.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
    });
    Ok(if report.passed() { 0 } else { EXIT_VALIDATION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hues_are_saturated() {
        for k in 0..12 {
            let c = hue(k as f64 / 12.0);
            let hi = c.iter().copied().fold(0.0, f64::max);
            let lo = c.iter().copied().fold(1.0, f64::min);
            assert_eq!((hi, lo), (1.0, 0.0));
        }
        assert_eq!(hue(0.0), [1.0, 0.0, 0.0]);
        assert_eq!(hue(1.0), hue(0.0));
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::Core(frameop::Error::Numerical("x".into())).exit_code(), EXIT_NUMERICAL);
        assert_eq!(CliError::Core(frameop::Error::Geometry("x".into())).exit_code(), EXIT_INPUT);
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
    }
}
