//! Experiment driver for the stochastic parabolic solver: configuration,
//! parallel ensembles, artifact emission and the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod workers;

pub use error::LabError;
