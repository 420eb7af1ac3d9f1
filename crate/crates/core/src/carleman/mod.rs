//! Carleman weight and cutoff, both sides of the weighted inequality for
//! `u_eps` assembled from the two-scale expansion, the constant-coefficient
//! estimate used for calibration, and the weighted Caccioppoli constant.

mod classical;
mod cutoff;
mod inequality;
mod jet;
mod weight;

pub use classical::{caccioppoli_constant, calibrate_c0, classical_carleman_ratio, probe_field, Calibration, ProbeRow};
pub use cutoff::{make_cutoff, Cutoff, CutoffJet, CutoffProfile};
pub use inequality::{
    carleman_check, carleman_lhs, carleman_rhs, expansion_remainder, lemma31_residual, remainder_bound_constant,
    CarlemanIntegrands, CarlemanLhs, CarlemanReport, CarlemanRow, TAU_POINTS,
};
pub use weight::{log_spaced, CarlemanConstants, CarlemanWeight, Provenance};
