//! Rate-equation model of NV-centre ODMR magnetometry: photophysics, CW and pulsed
//! spectra, shot-noise sensitivities, hyperfine lineshapes and wide-field ensembles.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*F64` aliases below are
//! the concrete types most callers want.
//!
//! Units: rates in MHz (µs⁻¹), times in µs, Rabi frequencies and detunings in rad/µs,
//! linewidths in MHz, count rates in counts/s and sensitivities in T/√Hz.

// `!(x > 0)` is the NaN-rejecting form used throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cw;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod lineshape;
pub mod optimize;
pub mod photophysics;
pub mod pulsed;
pub mod quadrature;
pub mod scalar;
pub mod sensitivity;

pub use error::{OdmrError, Result};
pub use scalar::Real;

pub type RateConstantsF64 = photophysics::RateConstants<f64>;
pub type PopulationVectorF64 = photophysics::PopulationVector<f64>;
pub type CwDriveF64 = cw::CwDrive<f64>;
pub type LineSummaryF64 = cw::LineSummary<f64>;
pub type OdmrSpectrumF64 = cw::OdmrSpectrum<f64>;
