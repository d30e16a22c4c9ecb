//! Biologically inspired acoustic front ends for speech recognition.
//!
//! Building blocks live in [`dsp`], [`scales`], [`filterbank`], [`masking`]
//! and [`pnc`]; [`features`] assembles them into the nine registered feature
//! pipelines. [`metrics`] and [`probe`] measure robustness, and [`io`] reads
//! and writes the file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod error;
pub mod features;
pub mod filterbank;
pub mod io;
pub mod masking;
pub mod metrics;
pub mod pnc;
pub mod probe;
pub mod scales;

pub use error::{Error, Result};
