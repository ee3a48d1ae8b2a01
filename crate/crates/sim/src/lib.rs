//! Host-side companion to `crossbar-core`: MNIST IDX loading, device
//! profiles, model files, CSV and SVG output, a rayon trial runner and the
//! `crossbar` command-line driver.

pub mod checks;
pub mod commands;
pub mod csv_out;
pub mod error;
pub mod idx;
pub mod model_file;
pub mod pipelines;
pub mod profile;
pub mod runner;
pub mod svg;
pub mod trace;

pub use error::{Result, SimError};
