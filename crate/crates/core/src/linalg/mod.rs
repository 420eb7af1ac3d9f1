//! Krylov and multigrid solvers for the structured grids used by the crate.

mod cg;
mod multigrid;
mod stencil;

pub use cg::{pcg, CgOptions, CgStats, IdentityPreconditioner, LinearOperator, Preconditioner};
pub use multigrid::Multigrid;
pub use stencil::SymStencil9;
