//! Detection, construction and measurement of continuous attractors in
//! recurrent-style dynamical systems, via spectral analysis of local Jacobians.
// `!(x < y)` style guards are used on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod construct;
pub mod dynsys;
pub mod equilibria;
pub mod probe;
pub mod error;
pub mod sampling;
pub mod simulate;
pub mod spectral;

pub use dynsys::{Activation, DynamicalSystem, Form};
pub use error::{Error, Result};
pub use spectral::SpectrumReport;
