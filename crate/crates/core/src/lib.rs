//! Degenerate Langevin dynamics with multiplicative noise.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fporacle;
pub mod linalg;
pub mod measures;
pub mod model;
pub mod rates;
pub mod sde;

pub use error::{Error, Result};
