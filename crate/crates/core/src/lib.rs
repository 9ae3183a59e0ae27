//! Deformable discriminative correlation filter tracking.
//!
//! The filter is a sum of sub-filters, each a truncated Fourier series that
//! can be translated independently. Coefficients are fitted by conjugate
//! gradient on the Fourier-domain normal equations ([`training`]); sub-filter
//! positions follow Barzilai-Borwein descent under a linear deformation prior
//! ([`deformation`]). [`tracker`] runs the online detect/update loop and
//! [`eval`] scores trajectories with overlap precision and success AUC.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the CLI live
//! in the companion `deform-dcf` crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod deformation;
pub mod error;
pub mod eval;
pub mod features;
pub mod spectral;
pub mod synthetic;
pub mod tracker;
pub mod training;

pub use error::{Error, Result};
