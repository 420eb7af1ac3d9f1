//! Shared fixtures for the benchmarks.

use homlab_core::elliptic::{assemble, BoundaryMask, DiscreteOperator};
use homlab_core::fields::{builtin_coefficient, DomainGrid, ScalarField};

/// Laminate operator at `eps` on the smallest resolving grid of `[-3, 3]^2`.
pub fn laminate_operator(eps: f64) -> DiscreteOperator {
    let a = builtin_coefficient("laminate").expect("builtin family");
    let grid = DomainGrid::resolving(3.0, eps, 8, 64).expect("grid");
    assemble(&a, eps, grid, BoundaryMask::Square).expect("resolved grid")
}

/// Smooth non-negative test integrand on an `n x n` grid of `[-3, 3]^2`.
pub fn smooth_field(n: usize) -> ScalarField {
    let grid = DomainGrid::new(3.0, n).expect("grid");
    ScalarField::from_fn(grid, |x| 1.0 + (x[0] * x[1]).sin().powi(2)).expect("finite")
}
