//! Grids, nodal fields, coefficient families and ball quadrature.

mod coefficient;
mod field;
mod grid;
mod quadrature;

pub use coefficient::{
    builtin_coefficient, laminate_profile, verify_assumptions, BuiltinCoefficient,
    CoefficientField, Mat2,
};
pub use field::{CellField, Field, ScalarField};
pub use grid::{DomainGrid, Grid, PeriodicGrid};
pub use quadrature::{
    annulus_integral, annulus_weighted_integral, ball_integral, ball_mean, integrate_weighted,
    region_area, Annulus, WeightPower, DEFAULT_SUBSAMPLES,
};
