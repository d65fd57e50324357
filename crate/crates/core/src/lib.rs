#![no_std]
// `!(x > 0.0)` is the NaN-rejecting form of a positivity check.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod ensemble;
pub mod error;
pub mod model;
pub mod multiscaling;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
