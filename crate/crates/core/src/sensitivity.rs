//! Shot-noise-limited DC sensitivities at the maximum-slope point of a dip.
//!
//! Inputs are linewidths in MHz and count rates in counts/s; results are in T/√Hz.

use crate::error::{OdmrError, Result};
use crate::scalar::Real;

/// NV gyromagnetic ratio, 2.8 MHz/G, in Hz/T.
pub const GAMMA_NV_HZ_PER_T: f64 = 2.8e10;

/// Hz in one MHz.
pub(crate) const HZ_PER_MHZ: f64 = 1.0e6;

fn check<T: Real>(contrast: T, rate: T) -> Result<()> {
    if !(contrast > T::zero()) {
        return Err(OdmrError::NonFiniteSensitivity("contrast must be positive"));
    }
    if !(rate > T::zero()) {
        return Err(OdmrError::NonFiniteSensitivity("count rate must be positive"));
    }
    Ok(())
}

/// Lorentzian dip: `2Δν/(3cγ) · √((4/3 − c)/F₀)`.
pub fn lorentzian_sensitivity<T: Real>(fwhm_mhz: T, contrast: T, f0: T) -> Result<T> {
    check(contrast, f0)?;
    let dnu = fwhm_mhz * T::lit(HZ_PER_MHZ);
    let gamma = T::lit(GAMMA_NV_HZ_PER_T);
    let eta = T::lit(2.0) * dnu / (T::lit(3.0) * contrast * gamma) * ((T::lit(4.0 / 3.0) - contrast) / f0).sqrt();
    finite(eta)
}

/// Gaussian dip: `Δν/(2cγ) · √(√e(√e − c)/(F ln 4))`.
pub fn gaussian_sensitivity<T: Real>(fwhm_mhz: T, contrast: T, f_avg: T) -> Result<T> {
    check(contrast, f_avg)?;
    let dnu = fwhm_mhz * T::lit(HZ_PER_MHZ);
    let gamma = T::lit(GAMMA_NV_HZ_PER_T);
    let sqrt_e = T::lit(0.5).exp();
    let eta = dnu / (T::lit(2.0) * contrast * gamma)
        * (sqrt_e * (sqrt_e - contrast) / (f_avg * T::lit(4.0).ln())).sqrt();
    finite(eta)
}

fn finite<T: Real>(eta: T) -> Result<T> {
    if eta.is_finite() && eta > T::zero() {
        Ok(eta)
    } else {
        Err(OdmrError::NonFiniteSensitivity("closed form evaluated outside its domain"))
    }
}
