//! Optimal filtering for hidden Markov models with non-ergodic or mis-specified dynamics,
//! Local Doeblin set functions and their envelopes, explicit forgetting bounds, and an
//! experiment harness for measuring how fast filters forget their initial distribution.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod bound;
pub mod doeblin;
pub mod error;
pub mod filter;
pub mod lab;
pub mod model;
pub mod numeric;

pub use error::{Error, Result};
