//! Std companion of `deform-dcf-core`: precomputed-feature and lookup-table
//! files, sequence and annotation IO, run configuration, rendering and the
//! `deform-dcf` command line.

pub mod assets;
pub mod cli;
pub mod config;
pub mod dff;
pub mod error;
pub mod render;
pub mod results;
pub mod sequence;

pub use deform_dcf_core as core;
pub use error::{Error, Result};
