//! Asymptotic-preserving staggered scheme for the Euler–Poisson–Boltzmann system.

pub mod analytic;
pub mod apscheme;
pub mod bench;
pub mod boundary;
pub mod diagnostics;
pub mod discops;
pub mod error;
pub mod field;
pub mod linsolve;
pub mod mesh;
pub mod output;
pub mod pbsolver;
pub mod refschemes;
pub mod runner;
pub mod validation;

pub use boundary::{Bc, BoundarySpec, Side};
pub use error::{Error, Result};
pub use field::{FaceField, FieldRole, PrimalField};
pub use mesh::{build_mesh, Grading, MacMesh, State};
