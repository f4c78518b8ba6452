//! File formats, the experiment harness and the command-line front end for
//! `wdro-core`.

// `!(a < b)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod fmt;
pub mod harness;
pub mod model_io;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
