//! Dirichlet problems for `-div(A(x/eps) grad u) = 0` and its homogenized
//! counterpart on the square, or on an embedded disc.

mod boundary;
mod harmonic;
mod operator;

pub use boundary::BoundaryData;
pub use harmonic::{harmonic_polynomial, HarmonicPolynomial};
pub(crate) use operator::oscillating_flux;
pub use operator::{
    assemble, assemble_homogenized, solve_dirichlet, solve_dirichlet_with_stats, BoundaryMask,
    DiscreteOperator, DEFAULT_SOLVE_TOL,
};
