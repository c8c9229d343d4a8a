#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domain;
pub mod error;
pub mod fitter;
pub mod hadamard;
pub mod levelset;
pub mod oracle;
pub mod specfun;

pub use error::{Error, Result};
