//! `frameop` command-line front end.
//!
//! Every run writes its outputs plus `manifest.json` into `--out`.
//! Exit codes: 0 ok, 1 usage, 2 input, 3 numerical failure, 4 validation failed.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frameop::fem::BoundaryCondition;
use frameop::solve::EigenMethod;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "frameop", version, about = "Frame field operators on triangle and tetrahedral meshes")]
pub struct Cli {
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mesh generators.
    Mesh {
        #[command(subcommand)]
        action: MeshAction,
    },
    /// Frame field generators.
    Field {
        #[command(subcommand)]
        action: FieldAction,
    },
    /// Writes the operator and the lumped mass as MatrixMarket files.
    Assemble(OperatorArgs),
    /// Boundary-value problem with Dirichlet data on the boundary vertices.
    Dirichlet(DirichletArgs),
    /// One implicit Euler step from an impulse, for each epsilon.
    Diffuse(DiffuseArgs),
    /// Smallest generalized eigenpairs.
    Eigs(EigsArgs),
    /// Spectral distance from a source vertex, with optional descent paths.
    Distance(DistanceArgs),
    /// Bounded boundary-value coloring.
    Color(ColorArgs),
    /// Runs a validation experiment; exit code 4 on failure.
    Validate(ValidateArgs),
}

#[derive(Subcommand, Debug)]
pub enum MeshAction {
    Gen(MeshGenArgs),
}

#[derive(Subcommand, Debug)]
pub enum FieldAction {
    Gen(FieldGenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Shape {
    Square,
    Disk,
    Annulus,
    Ball,
    Box,
    Cylinder,
}

#[derive(Args, Debug)]
pub struct MeshGenArgs {
    #[arg(long, value_enum)]
    pub shape: Shape,
    /// Cells per side (square, ball, box).
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Target edge length (disk, annulus, cylinder).
    #[arg(long, default_value_t = 0.1)]
    pub h: f64,
    /// Midpoint refinements applied after generation.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    /// Random vertex displacement as a fraction of the local edge length.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; the extension picks the format (.off, .obj, .mesh).
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FieldKindArg {
    Constant,
    Harmonic2d,
    Helical,
    Coframe,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MapArg {
    Identity,
    Poly,
    Exp,
}

#[derive(Args, Debug)]
pub struct FieldGenArgs {
    #[arg(long, value_enum)]
    pub kind: FieldKindArg,
    #[arg(long)]
    pub mesh: PathBuf,
    /// Frame angle of a 2D constant field.
    #[arg(long, default_value_t = 0.0)]
    pub angle: f64,
    /// Comma-separated weights of a constant field.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Helix axis.
    #[arg(long, value_delimiter = ',', default_value = "0,0,1")]
    pub axis: Vec<f64>,
    /// Rotation per unit length along the helix axis.
    #[arg(long, default_value_t = 1.0)]
    pub pitch: f64,
    #[arg(long, value_enum, default_value = "poly")]
    pub map: MapArg,
    /// Coefficient of the polynomial map `z + c z²`.
    #[arg(long, default_value_t = 0.05)]
    pub c: f64,
    /// Where the warped mesh of a coframe field is written.
    #[arg(long)]
    pub warped_mesh: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BcArg {
    Natural,
    Neumann,
}

impl From<BcArg> for BoundaryCondition {
    fn from(b: BcArg) -> Self {
        match b {
            BcArg::Natural => BoundaryCondition::Natural,
            BcArg::Neumann => BoundaryCondition::Neumann,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EigMethodArg {
    Auto,
    Dense,
    Subspace,
}

impl From<EigMethodArg> for EigenMethod {
    fn from(m: EigMethodArg) -> Self {
        match m {
            EigMethodArg::Auto => EigenMethod::Auto,
            EigMethodArg::Dense => EigenMethod::Dense,
            EigMethodArg::Subspace => EigenMethod::Subspace,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct OperatorArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    /// Field CSV; a constant octahedral field when omitted.
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "neumann")]
    pub bc: BcArg,
}

#[derive(Args, Debug)]
pub struct DirichletArgs {
    #[command(flatten)]
    pub op: OperatorArgs,
    /// CSV rows `vertex,value` for every boundary vertex.
    #[arg(long, conflicts_with = "square_wave")]
    pub boundary_values: Option<PathBuf>,
    /// Square wave `sign(sin(k·angle))` around the origin.
    #[arg(long)]
    pub square_wave: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SourceArgs {
    /// Source vertex index.
    #[arg(long, conflicts_with = "at")]
    pub source: Option<usize>,
    /// Source point; the nearest vertex is used.
    #[arg(long, value_delimiter = ',')]
    pub at: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct DiffuseArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,0.2,0.04,0.008")]
    pub epsilon: Vec<f64>,
    #[arg(long, value_enum, default_value = "natural")]
    pub bc: BcArg,
    #[arg(long, default_value_t = 1e-5)]
    pub tau: f64,
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Args, Debug)]
pub struct EigsArgs {
    #[command(flatten)]
    pub op: OperatorArgs,
    #[arg(long, default_value_t = 64)]
    pub num: usize,
    #[arg(long, value_enum, default_value = "auto")]
    pub method: EigMethodArg,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Eigenvectors written to VTK.
    #[arg(long, default_value_t = 8)]
    pub vtk_modes: usize,
}

#[derive(Args, Debug)]
pub struct DistanceArgs {
    #[command(flatten)]
    pub op: OperatorArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Nonzero modes in the embedding.
    #[arg(long, default_value_t = 64)]
    pub num: usize,
    /// Descent paths traced from evenly spaced boundary vertices.
    #[arg(long, default_value_t = 0)]
    pub paths: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ColorArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub field: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value = "natural")]
    pub bc: BcArg,
    /// CSV rows `vertex,r,g,b` for every boundary vertex; hue by angle when omitted.
    #[arg(long)]
    pub boundary_colors: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    SquareSpectrum,
    RefineSpectrum,
    BallSpectrum,
    Warp,
    DirichletConvergence,
    Anisotropy,
    Bilaplacian,
    Kkt,
    Invariants,
    Tensor,
    Qp,
    Distance,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(value_enum)]
    pub experiment: Experiment,
    /// Smaller meshes for a fast smoke run; the full-size defaults otherwise.
    #[arg(long)]
    pub quick: bool,
    /// Square spectrum: also tabulate the other boundary condition.
    #[arg(long)]
    pub compare_bc: bool,
    /// Warp: map applied to the square (identity passes trivially).
    #[arg(long, value_enum, default_value = "poly")]
    pub map: MapArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("FFOP_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| format!("FFOP_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("FFOP_THREADS must be a positive integer, got 0".into());
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_USAGE);
    }
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
