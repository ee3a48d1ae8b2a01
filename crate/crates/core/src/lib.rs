//! Simulation of N-state memristive crossbar arrays used as analog
//! matrix-vector multiplication coprocessors.
//!
//! Weights are snapped to `N` equidistant levels ([`quantizer`]), written to a
//! crossbar as resistances ([`crossbar`]), multiplied by current-encoded
//! inputs, and recovered exactly from the summed voltages by a closed-form
//! linear correction. Device non-idealities ([`device`]) perturb the
//! programmed resistances; [`experiments`] measures the resulting error.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel trial execution live in the `crossbar-sim` companion crate.

#![cfg_attr(not(test), no_std)]
// `!(x > y)` is how NaN gets rejected alongside out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod crossbar;
pub mod dataset;
pub mod device;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod nn;
pub mod pca;
pub mod powell;
pub mod quantizer;
pub mod rng;

mod math;

pub use error::{Error, Result};
pub use matrix::Matrix;
