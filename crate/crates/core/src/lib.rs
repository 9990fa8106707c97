//! Simulation of two-tone TLS spectroscopy on fixed-frequency transmons.
//!
//! The pipeline: a [`model::SystemSpec`] describes the transmon and its
//! defects; [`lindblad`] turns each rectangular pulse into a time-independent
//! Liouvillian; [`protocol`] runs the excite-then-probe sequence and builds
//! (ω, t)-maps; [`analytics`] holds closed-form predictions and the classical
//! estimator; [`io`] covers configuration, map files and dataset generation.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod io;
pub mod lindblad;
pub mod model;
pub mod protocol;
