//! Numerics for periodic homogenization of `-div(A(x/eps) grad u) = 0` in the
//! plane: cell correctors, homogenized tensors, two-scale expansions, and
//! empirical checks of weighted (Carleman-type) and three-ball inequalities.

// Negated float comparisons are deliberate: they reject NaN along with
// out-of-range values. Index loops mirror the tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod carleman;
pub mod cell;
pub mod continuation;
pub mod elliptic;
pub mod error;
pub mod fields;
mod flux;
pub mod linalg;
pub mod twoscale;

pub use carleman::{CarlemanConstants, CarlemanWeight, Cutoff, Provenance};
pub use cell::{Corrector, CorrectorSampler, FluxCorrector, HomogenizedTensor};
pub use continuation::{GrowthParams, ThreeBallExponent};
pub use elliptic::{BoundaryData, BoundaryMask, DiscreteOperator};
pub use error::{Error, Result};
pub use fields::{CellField, CoefficientField, DomainGrid, Field, Mat2, PeriodicGrid, ScalarField};
pub use twoscale::{ConvergenceRow, RecoveredU0};
