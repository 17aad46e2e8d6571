//! Discrete anisotropic fourth-order "frame field operators" on triangle and
//! tetrahedral meshes.
//!
//! A symmetric frame field `T` (a field of odeco fourth-order tensors) and an
//! ellipticity parameter `epsilon` define the energy
//! `½∫ (∇²u) : Tε : (∇²u)` with `Tε = ‖T‖𝕀 − (1−ε)T`. Its Euler–Lagrange
//! operator is discretized with piecewise-linear mixed finite elements, with
//! either natural boundary conditions or a weak Neumann condition imposed on the
//! Lagrange multiplier.
//!
//! Module map:
//!
//! * [`geometry`] – meshes, measures, gradients, refinement, mesh I/O.
//! * [`symtensor`] – Mandel-vectorized second/fourth-order tensor algebra.
//! * [`framefield`] – per-vertex frame fields and their generators.
//! * [`fem`] – mixed-FEM matrices and the assembled operator.
//! * [`solve`] – linear solves, generalized eigenpairs, diffusion, box QP.
//! * [`analytic`] – closed-form spectra and conformal warps.
//! * [`apps`] – spectral distances, descent paths, boundary coloring.
//! * [`validate`] – the end-to-end convergence/anisotropy experiments.

pub mod analytic;
pub mod apps;
mod error;
pub mod exec;
pub mod export;
pub mod fem;
pub mod framefield;
pub mod geometry;
pub mod solve;
pub mod sparse;
pub mod symtensor;
pub mod validate;

pub use error::{Error, Result};
pub use exec::Exec;
pub use fem::{assemble_operator, AssembledOperator, BoundaryCondition, MixedSystem};
pub use framefield::{FieldKind, FrameField};
pub use geometry::{compute_measures, MeshMeasures, SimplicialMesh};
pub use sparse::{CsrMatrix, SparseSym};
pub use symtensor::{OdecoFrame, Sym2, Sym4Form};
