//! Multimode squeezed-light toolkit: SPDC supermodes, spectral mode bases,
//! homodyne covariance tomography, PPT entanglement scans and a pulsed
//! homodyne simulator.
//!
//! Covariance conventions: vacuum variance is 1, quadratures are ordered
//! `(q1..qn, p1..pn)`.

// `!(x > 0.0)` style checks reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entanglement;
pub mod error;
pub mod gauss;
pub mod grid;
pub mod modes;
pub mod pipeline;
pub mod pulse;
mod scalar;
pub mod spdc;
pub mod tomography;

pub use error::{Error, Result};
pub use gauss::{
    apply_loss, check_physicality, db_to_variance, make_squeezed_vacuum, variance_to_db,
    GaussianState, Physicality, SqueezingReportEntry, StateJson, SymplecticForm,
};
pub use grid::FrequencyGrid;
pub use modes::{
    frexel_basis, hermite_gauss_basis, overlap_matrix, project_state, BasisWarning, FrexelBasis,
    FrexelSpec, LoSpectrum, ModeBasis,
};
pub use scalar::Real;

pub type GaussianState64 = GaussianState<f64>;
pub type GaussianState32 = GaussianState<f32>;
pub type ModeBasis64 = ModeBasis<f64>;
pub type ModeBasis32 = ModeBasis<f32>;
