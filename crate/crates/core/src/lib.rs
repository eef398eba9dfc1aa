// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dpp;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod quad;
pub mod schrodinger;
pub mod specfun;

pub use error::{Error, Result};
