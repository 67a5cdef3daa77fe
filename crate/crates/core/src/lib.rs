//! Numerical core for strict solutions of linear non-autonomous stochastic
//! parabolic equations `dX + A(t)X dt = F(t)dt + G(t)dw`.
//!
//! The crate is `no_std` and only needs `alloc`. IO, configuration and
//! parallel ensemble drivers live in the companion `parabolic-lab` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coefficients;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod holder;
pub mod linalg;
pub mod operator;
pub mod presets;
pub mod regularity;
pub mod stats;
pub mod stochastic;
pub mod strict;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
