//! Conformal outlier detection that learns from labeled outliers.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every algorithm:
//! conformity-score models, split-conformal and integrative p-values with
//! permutation-invariant model selection, transductive cross-validation+
//! (TCV+), FDR procedures including conditional calibration, and the
//! synthetic data generators used to check the finite-sample guarantees.
//! File formats, configuration and the experiment harness live in the
//! `conforma` crate.
//!
//! Conformity scores follow a single orientation everywhere: a larger score
//! means "more inlier-like".
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod conformal;
pub mod dataset;
pub mod error;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod tcv;
pub mod testing;

pub use error::{Error, Result};
