//! Continuous-wave ODMR: optical Bloch steady state of the driven `m₀ ↔ m₊₁`
//! transition on top of the four-level rate model.
//!
//! Detunings and Rabi frequencies are angular (rad/µs); linewidths are reported as
//! linear frequencies in MHz.

use crate::error::{invalid, OdmrError, Result};
use crate::linalg::Matrix;
use crate::optimize::{minimize, SearchDim, SearchSpace, DEFAULT_REL_TOL};
use crate::photophysics::{
    build_generator, effective_pump_rate, excitation_rate, fluorescence_rate, saturation_parameter, steady_state,
    PopulationVector, RateConstants, Spin,
};
use crate::quadrature::bisect;
use crate::scalar::Real;
use crate::sensitivity::lorentzian_sensitivity;

/// Number of detuning samples in a model spectrum.
pub const GRID_POINTS: usize = 401;

/// Half-span of a model spectrum in units of the half-depth half-width. The dip's
/// residual at the grid edge is then below `c/600`, which keeps the grid-edge `F₀`
/// within 0.1% of the MW-off rate.
pub const GRID_SPAN_HWHM: f64 = 25.0;

/// Saturation parameter above which the weak-excitation assumption of the CW model
/// becomes questionable.
pub const CW_VALIDITY_SATURATION: f64 = 0.5;

/// MW drive of the CW protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwDrive<T> {
    /// Angular Rabi frequency, rad/µs.
    pub omega: T,
    /// Inhomogeneous dephasing time, µs. `+∞` disables intrinsic dephasing.
    pub t2star: T,
}

impl<T: Real> CwDrive<T> {
    pub fn new(omega: T, t2star: T) -> Result<Self> {
        if !(omega.is_finite() && omega >= T::zero()) {
            return Err(invalid("omega", format!("Rabi frequency must be ≥ 0, got {omega}")));
        }
        if !(t2star > T::zero()) {
            return Err(invalid("t2star", format!("T2* must be > 0, got {t2star}")));
        }
        Ok(CwDrive { omega, t2star })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CwSteadyState<T> {
    pub populations: PopulationVector<T>,
    pub coherence_re: T,
    pub coherence_im: T,
}

impl<T: Real> CwSteadyState<T> {
    pub fn coherence_abs(&self) -> T {
        self.coherence_re.hypot(self.coherence_im)
    }
}

/// Fluorescence versus detuning on a symmetric, strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdmrSpectrum<T> {
    /// Angular detunings, rad/µs.
    pub detunings: Vec<T>,
    /// Count rates, counts/s.
    pub rates: Vec<T>,
}

impl<T: Real> OdmrSpectrum<T> {
    pub fn new(detunings: Vec<T>, rates: Vec<T>) -> Result<Self> {
        if detunings.len() != rates.len() || detunings.len() < 3 {
            return Err(invalid("spectrum", "need at least three samples with matching lengths"));
        }
        if detunings.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("spectrum", "detunings must be strictly increasing"));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= T::zero())) {
            return Err(invalid("spectrum", "count rates must be finite and ≥ 0"));
        }
        let n = detunings.len();
        let scale = detunings[n - 1].abs().max(detunings[0].abs());
        let tol = T::lit(1e-9) * scale;
        if (0..n).any(|i| (detunings[i] + detunings[n - 1 - i]).abs() > tol) {
            return Err(invalid("spectrum", "detuning grid must be symmetric about zero"));
        }
        Ok(OdmrSpectrum { detunings, rates })
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    /// Piecewise-linear interpolant of the samples, for refining crossings of
    /// measured or tabulated spectra.
    pub fn linear_interpolant(&self) -> impl Fn(T) -> Result<T> + '_ {
        move |x: T| {
            let d = &self.detunings;
            if x < d[0] || x > d[d.len() - 1] {
                return Err(OdmrError::Unbracketed);
            }
            let i = d.partition_point(|&v| v <= x).clamp(1, d.len() - 1);
            let (x0, x1) = (d[i - 1], d[i]);
            let (y0, y1) = (self.rates[i - 1], self.rates[i]);
            Ok(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
        }
    }
}

/// Off-resonant rate, contrast and FWHM of a fluorescence dip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSummary<T> {
    /// Off-resonant count rate, counts/s.
    pub f0: T,
    pub contrast: T,
    /// MHz.
    pub fwhm: T,
}

/// `Γ₂ = R + 2√(ln 2)/T₂*`.
pub fn cw_dephasing_rate<T: Real>(r: T, t2star: T) -> T {
    r + T::lit(2.0) * T::LN_2().sqrt() / t2star
}

/// Solves the driven steady state for unknowns `(m₋₁, m₀, m₊₁, S, Re ρ₀₁, Im ρ₀₁)`.
pub fn cw_steady_state<T: Real>(rates: &RateConstants<T>, r: T, drive: &CwDrive<T>, delta: T) -> Result<CwSteadyState<T>> {
    if !(r > T::zero() && r.is_finite()) {
        return Err(invalid("r", format!("CW steady state needs r > 0, got {r}")));
    }
    let k_minus = effective_pump_rate(rates, r, Spin::Minus);
    let k_zero = effective_pump_rate(rates, r, Spin::Zero);
    let k_plus = effective_pump_rate(rates, r, Spin::Plus);
    let g2 = cw_dephasing_rate(r, drive.t2star);
    let om = drive.omega;
    let half_om = om * T::lit(0.5);
    let z = T::zero();
    let one = T::one();

    let a = Matrix::<T, 6>::from_rows([
        [-k_minus, z, z, rates.d1, z, z],
        [z, -k_zero, z, rates.d0, z, om],
        [z, z, -k_plus, rates.d1, z, -om],
        [one, one, one, one, z, z],
        [z, z, z, z, -g2, delta],
        [z, -half_om, half_om, z, -delta, -g2],
    ]);
    let x = a.solve(&[z, z, z, one, z, z])?;
    Ok(CwSteadyState {
        populations: PopulationVector::cleaned([x[0], x[1], x[2], x[3]]),
        coherence_re: x[4],
        coherence_im: x[5],
    })
}

/// Detected count rate at one detuning.
pub fn cw_fluorescence<T: Real>(
    rates: &RateConstants<T>,
    r: T,
    drive: &CwDrive<T>,
    delta: T,
    epsilon: T,
    b: T,
) -> Result<T> {
    let ss = cw_steady_state(rates, r, drive, delta)?;
    Ok(fluorescence_rate(&ss.populations, r, rates, epsilon, b))
}

/// MW-off count rate.
pub fn cw_off_resonant_rate<T: Real>(rates: &RateConstants<T>, r: T, epsilon: T, b: T) -> Result<T> {
    let p = steady_state(&build_generator(rates, r)?)?;
    Ok(fluorescence_rate(&p, r, rates, epsilon, b))
}

/// Odd-length grid from `-span` to `span` with an exact zero and exact mirror symmetry.
pub fn symmetric_grid<T: Real>(span: T, points: usize) -> Vec<T> {
    let points = if points % 2 == 0 { points + 1 } else { points.max(3) };
    let half = points / 2;
    let positive: Vec<T> = (1..=half).map(|i| span * T::lit(i as f64) / T::lit(half as f64)).collect();
    positive
        .iter()
        .rev()
        .map(|&x| -x)
        .chain(std::iter::once(T::zero()))
        .chain(positive.iter().copied())
        .collect()
}

/// Half-depth half-width of a symmetric dip `f(δ)` with centre value `f_min` and
/// asymptote `f_off`, located by expanding a bracket from `guess`.
pub(crate) fn dip_half_width<T: Real, F: Fn(T) -> Result<T>>(f: F, f_off: T, f_min: T, guess: T) -> Result<Option<T>> {
    if !(f_off - f_min > T::lit(1e-12) * f_off.abs()) {
        return Ok(None);
    }
    let half = (f_off + f_min) * T::lit(0.5);
    let mut hi = guess;
    let mut expansions = 0;
    while f(hi)? < half {
        hi = hi * T::lit(2.0);
        expansions += 1;
        if expansions > 80 {
            return Err(OdmrError::Unbracketed);
        }
    }
    let width = bisect(|d| Ok(f(d)? - half), T::zero(), hi, hi * T::lit(1e-4))?;
    Ok(Some(width))
}

/// Model-adapted detuning grid spanning `±GRID_SPAN_HWHM` half-widths of the dip.
pub fn cw_detuning_grid<T: Real>(rates: &RateConstants<T>, r: T, drive: &CwDrive<T>, points: usize) -> Result<Vec<T>> {
    let g2 = cw_dephasing_rate(r, drive.t2star);
    let guess = g2.max(drive.omega);
    let f = |d: T| cw_fluorescence(rates, r, drive, d, T::one(), T::zero());
    let f_off = cw_off_resonant_rate(rates, r, T::one(), T::zero())?;
    let f_min = f(T::zero())?;
    let span = match dip_half_width(f, f_off, f_min, guess)? {
        Some(hw) => T::lit(GRID_SPAN_HWHM) * hw,
        None => T::lit(8.0) * guess,
    };
    Ok(symmetric_grid(span, points))
}

pub fn cw_spectrum<T: Real>(
    rates: &RateConstants<T>,
    r: T,
    drive: &CwDrive<T>,
    epsilon: T,
    b: T,
    grid: &[T],
) -> Result<OdmrSpectrum<T>> {
    let values = grid
        .iter()
        .map(|&d| cw_fluorescence(rates, r, drive, d, epsilon, b))
        .collect::<Result<Vec<T>>>()?;
    OdmrSpectrum::new(grid.to_vec(), values)
}

/// Extracts `F₀` (mean of the two grid edges), contrast `1 − F_min/F₀`, and FWHM.
/// Each half-depth crossing is bracketed by grid samples and refined by bisection
/// on `eval`, which should evaluate the same spectrum at arbitrary detuning.
pub fn summarize_line<T: Real, F: Fn(T) -> Result<T>>(spectrum: &OdmrSpectrum<T>, eval: F) -> Result<LineSummary<T>> {
    let d = &spectrum.detunings;
    let y = &spectrum.rates;
    let n = d.len();
    let f0 = (y[0] + y[n - 1]) * T::lit(0.5);
    let (imin, fmin) = y
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
    if !(f0 > fmin) || !(f0 > T::zero()) {
        return Err(OdmrError::FlatSpectrum);
    }
    let half = (f0 + fmin) * T::lit(0.5);
    let crossing = |lo: T, hi: T| bisect(|x| Ok(eval(x)? - half), lo, hi, (hi - lo).abs() * T::lit(1e-7));

    let right = (imin + 1..n).find(|&i| y[i] >= half).ok_or(OdmrError::Unbracketed)?;
    let left = (0..imin).rev().find(|&i| y[i] >= half).ok_or(OdmrError::Unbracketed)?;
    let x_right = crossing(d[right - 1], d[right])?;
    let x_left = crossing(d[left], d[left + 1])?;

    Ok(LineSummary {
        f0,
        contrast: T::one() - fmin / f0,
        fwhm: (x_right - x_left) / T::TAU(),
    })
}

/// Shot-noise-limited sensitivity of a CW line, T/√Hz.
pub fn sensitivity_cw<T: Real>(line: &LineSummary<T>) -> Result<T> {
    if !(line.contrast < T::one()) {
        return Err(OdmrError::NonFiniteSensitivity("contrast must be below one"));
    }
    lorentzian_sensitivity(line.fwhm, line.contrast, line.f0)
}

/// Model spectrum on the default adaptive grid together with its summary.
pub fn cw_line<T: Real>(
    rates: &RateConstants<T>,
    r: T,
    drive: &CwDrive<T>,
    epsilon: T,
    b: T,
) -> Result<(OdmrSpectrum<T>, LineSummary<T>)> {
    let grid = cw_detuning_grid(rates, r, drive, GRID_POINTS)?;
    let spectrum = cw_spectrum(rates, r, drive, epsilon, b, &grid)?;
    let line = summarize_line(&spectrum, |d| cw_fluorescence(rates, r, drive, d, epsilon, b))?;
    Ok((spectrum, line))
}

/// Warning text when the CW model is used outside its weak-excitation regime.
pub fn cw_validity_warning<T: Real>(s: T) -> Option<String> {
    (s > T::lit(CW_VALIDITY_SATURATION))
        .then(|| format!("saturation parameter {s} exceeds {CW_VALIDITY_SATURATION}; CW model assumes R ≪ γ"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwOptimizeSettings<T> {
    pub s_range: (T, T),
    /// Angular Rabi frequency range, rad/µs.
    pub omega_range: (T, T),
    pub coarse_points: usize,
    pub rel_tol: T,
}

impl<T: Real> Default for CwOptimizeSettings<T> {
    fn default() -> Self {
        CwOptimizeSettings {
            s_range: (T::lit(1e-3), T::one()),
            omega_range: (T::TAU() * T::lit(0.01), T::TAU() * T::lit(3.0)),
            coarse_points: 25,
            rel_tol: T::lit(DEFAULT_REL_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CwOptimum<T> {
    pub s: T,
    pub omega: T,
    pub eta: T,
    pub line: LineSummary<T>,
    pub evaluations: usize,
}

/// CW sensitivity at saturation `s` and Rabi frequency `omega`.
pub fn cw_sensitivity_at<T: Real>(rates: &RateConstants<T>, s: T, omega: T, t2star: T, epsilon: T, b: T) -> Result<T> {
    let drive = CwDrive::new(omega, t2star)?;
    let (_, line) = cw_line(rates, excitation_rate(s, rates), &drive, epsilon, b)?;
    sensitivity_cw(&line)
}

/// Minimizes CW sensitivity over saturation parameter and Rabi frequency. An optimum
/// on the search boundary is reported as an error.
pub fn optimize_cw<T: Real>(
    rates: &RateConstants<T>,
    t2star: T,
    epsilon: T,
    b: T,
    settings: &CwOptimizeSettings<T>,
) -> Result<CwOptimum<T>> {
    let space = SearchSpace::new(
        vec![
            SearchDim::log("s", settings.s_range.0, settings.s_range.1),
            SearchDim::log("omega", settings.omega_range.0, settings.omega_range.1),
        ],
        settings.coarse_points,
    )?;
    let objective = |v: &[T]| cw_sensitivity_at(rates, v[0], v[1], t2star, epsilon, b).unwrap_or(T::infinity());
    let res = minimize(objective, &space, settings.rel_tol)?;
    if res.boundary_flag {
        return Err(res.boundary_error());
    }
    let (s, omega) = (res.argmin[0].1, res.argmin[1].1);
    if let Some(w) = cw_validity_warning(s) {
        log::warn!("{w}");
    }
    let drive = CwDrive::new(omega, t2star)?;
    let (_, line) = cw_line(rates, excitation_rate(s, rates), &drive, epsilon, b)?;
    Ok(CwOptimum {
        s,
        omega,
        eta: res.objective,
        line,
        evaluations: res.evaluations,
    })
}

/// Saturation parameter of an excitation rate (re-exported for symmetry with
/// [`excitation_rate`]).
pub fn saturation_of<T: Real>(r: T, rates: &RateConstants<T>) -> T {
    saturation_parameter(r, rates)
}
