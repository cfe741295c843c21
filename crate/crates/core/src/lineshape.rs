//! Analytic dip shapes, a numeric shot-noise sensitivity for arbitrary spectra, and
//! the ¹⁴N hyperfine triplet.
//!
//! Frequencies here are linear, in MHz.

use crate::error::{invalid, OdmrError, Result};
use crate::quadrature::golden_section;
use crate::scalar::Real;
use crate::sensitivity::{gaussian_sensitivity, lorentzian_sensitivity, GAMMA_NV_HZ_PER_T, HZ_PER_MHZ};

/// ¹⁴N hyperfine splitting of the ground-state transitions, MHz.
pub const HYPERFINE_SPLITTING_MHZ: f64 = 2.16;

/// Central-difference step as a fraction of the linewidth.
pub const DERIVATIVE_STEP_FRACTION: f64 = 1.0 / 200.0;

/// Relative tolerance of the probe-point search.
pub const PROBE_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Lorentzian,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticLine<T> {
    pub kind: LineKind,
    pub fwhm: T,
    pub contrast: T,
    pub center: T,
}

impl<T: Real> AnalyticLine<T> {
    pub fn new(kind: LineKind, fwhm: T, contrast: T, center: T) -> Result<Self> {
        if !(fwhm > T::zero() && fwhm.is_finite()) {
            return Err(invalid("fwhm", format!("linewidth must be > 0, got {fwhm}")));
        }
        if !(contrast > T::zero() && contrast < T::one()) {
            return Err(invalid("contrast", format!("contrast must lie in (0, 1), got {contrast}")));
        }
        Ok(AnalyticLine { kind, fwhm, contrast, center })
    }

    /// Unit-peak profile at `nu`.
    pub fn profile(&self, nu: T) -> T {
        let x = (nu - self.center) / self.fwhm;
        match self.kind {
            LineKind::Lorentzian => T::one() / (T::one() + T::lit(4.0) * x * x),
            LineKind::Gaussian => (-T::lit(4.0) * T::LN_2() * x * x).exp(),
        }
    }

    /// Closed-form max-slope sensitivity of this line at off-resonant rate `f0`, T/√Hz.
    pub fn closed_form_sensitivity(&self, f0: T) -> Result<T> {
        match self.kind {
            LineKind::Lorentzian => lorentzian_sensitivity(self.fwhm, self.contrast, f0),
            LineKind::Gaussian => gaussian_sensitivity(self.fwhm, self.contrast, f0),
        }
    }
}

/// Relative fluorescence `1 − c·L(ν)`.
pub fn evaluate_line<T: Real>(line: &AnalyticLine<T>, nu: T) -> T {
    T::one() - line.contrast * line.profile(nu)
}

/// Where on the spectrum the magnetometer is operated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbePoint {
    /// Point of steepest slope, as assumed by the closed-form sensitivities.
    MaxSlope,
    /// Point minimizing `√F/|F'|`, slightly closer to the line centre.
    Optimal,
}

/// Frequency interval to search and the linewidth scale of its features, MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow<T> {
    pub lo: T,
    pub hi: T,
    pub fwhm: T,
}

impl<T: Real> SearchWindow<T> {
    pub fn new(lo: T, hi: T, fwhm: T) -> Result<Self> {
        if !(hi > lo) {
            return Err(invalid("window", format!("empty search window [{lo}, {hi}]")));
        }
        if !(fwhm > T::zero() && fwhm.is_finite()) {
            return Err(invalid("fwhm", format!("feature width must be > 0, got {fwhm}")));
        }
        Ok(SearchWindow { lo, hi, fwhm })
    }

    /// `centre ± half_span`.
    pub fn around(centre: T, half_span: T, fwhm: T) -> Result<Self> {
        Self::new(centre - half_span, centre + half_span, fwhm)
    }
}

/// Shot-noise-limited sensitivity `√F/(γ|dF/dν|)` of a spectrum `F(ν)` (counts/s
/// versus MHz), evaluated at the chosen probe point within `window`, T/√Hz.
pub fn numeric_sensitivity<T: Real, F: Fn(T) -> T>(spectrum: F, window: &SearchWindow<T>, probe: ProbePoint) -> Result<T> {
    let h = window.fwhm * T::lit(DERIVATIVE_STEP_FRACTION);
    // Five-point stencil: O(h⁴) keeps the slope error near 1e-10 relative.
    let slope = |nu: T| {
        let two = h + h;
        (spectrum(nu - two) - spectrum(nu + two) + T::lit(8.0) * (spectrum(nu + h) - spectrum(nu - h))) / (T::lit(6.0) * two)
    };
    let gamma = T::lit(GAMMA_NV_HZ_PER_T);
    let eta = |nu: T| {
        let f = spectrum(nu);
        let d = slope(nu).abs() / T::lit(HZ_PER_MHZ);
        if f > T::zero() && d > T::zero() {
            f.sqrt() / (gamma * d)
        } else {
            T::infinity()
        }
    };
    let cost = |nu: T| match probe {
        ProbePoint::MaxSlope => -slope(nu).abs(),
        ProbePoint::Optimal => eta(nu),
    };

    // Dense scan resolving every flank, then golden-section on each local minimum.
    let cell = window.fwhm / T::lit(20.0);
    let n = ((window.hi - window.lo) / cell).ceil().to_usize().unwrap_or(0).clamp(200, 200_000);
    let step = (window.hi - window.lo) / T::lit(n as f64);
    let xs: Vec<T> = (0..=n).map(|i| window.lo + step * T::lit(i as f64)).collect();
    let cs: Vec<T> = xs.iter().map(|&x| cost(x)).collect();

    let peak_slope = xs.iter().fold(T::zero(), |m, &x| m.max(slope(x).abs()));
    let level = xs.iter().fold(T::zero(), |m, &x| m.max(spectrum(x).abs()));
    if !(peak_slope > T::lit(1e-12) * level / window.fwhm) {
        return Err(OdmrError::FlatSpectrum);
    }

    let tol = step * T::lit(PROBE_REL_TOL);
    let mut best = T::infinity();
    for i in 1..n {
        if cs[i] <= cs[i - 1] && cs[i] <= cs[i + 1] && cs[i].is_finite() {
            let (x, _) = golden_section(cost, xs[i - 1], xs[i + 1], tol);
            best = best.min(eta(x));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(OdmrError::FlatSpectrum)
    }
}

/// Three equal hyperfine components spaced by `splitting`, each with a third of the
/// total contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperfineTriplet<T> {
    /// Per-component line, contrast already divided by three, centred on the middle
    /// component.
    pub line: AnalyticLine<T>,
    pub splitting: T,
}

impl<T: Real> HyperfineTriplet<T> {
    pub fn new(kind: LineKind, fwhm: T, contrast: T, splitting: T) -> Result<Self> {
        if !(splitting > T::zero()) {
            return Err(invalid("splitting", format!("hyperfine splitting must be > 0, got {splitting}")));
        }
        let line = AnalyticLine::new(kind, fwhm, contrast / T::lit(3.0), T::zero())?;
        Ok(HyperfineTriplet { line, splitting })
    }

    pub fn with_default_splitting(kind: LineKind, fwhm: T, contrast: T) -> Result<Self> {
        Self::new(kind, fwhm, contrast, T::lit(HYPERFINE_SPLITTING_MHZ))
    }

    /// Relative fluorescence of the superposition.
    pub fn evaluate(&self, nu: T) -> T {
        let a = self.splitting;
        let sum = self.line.profile(nu - a) + self.line.profile(nu) + self.line.profile(nu + a);
        T::one() - self.line.contrast * sum
    }

    /// Window covering the whole triplet with five linewidths of margin.
    pub fn window(&self) -> SearchWindow<T> {
        let half = self.splitting + T::lit(5.0) * self.line.fwhm;
        SearchWindow {
            lo: -half,
            hi: half,
            fwhm: self.line.fwhm,
        }
    }
}

/// Sensitivity of the triplet at its optimal operating point divided by the
/// closed-form sensitivity of a single line with contrast `c/3`, both at the same
/// off-resonant rate.
pub fn hyperfine_ratio<T: Real>(kind: LineKind, fwhm: T, contrast: T, splitting: T) -> Result<T> {
    let triplet = HyperfineTriplet::new(kind, fwhm, contrast, splitting)?;
    let numerator = numeric_sensitivity(|nu| triplet.evaluate(nu), &triplet.window(), ProbePoint::Optimal)?;
    let denominator = triplet.line.closed_form_sensitivity(T::one())?;
    Ok(numerator / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_line_examples() {
        let l = AnalyticLine::new(LineKind::Lorentzian, 2.0f64, 0.3, 1.0).unwrap();
        assert!((evaluate_line(&l, 1.0) - 0.7).abs() < 1e-15);
        assert!((evaluate_line(&l, 1e9) - 1.0).abs() < 1e-12);
        assert!((evaluate_line(&l, 2.0) - 0.85).abs() < 1e-15);
        assert!((evaluate_line(&l, 0.0) - 0.85).abs() < 1e-15);
        let g = AnalyticLine::new(LineKind::Gaussian, 2.0f64, 0.3, 0.0).unwrap();
        assert!((evaluate_line(&g, 1.0) - 0.85).abs() < 1e-15);
        assert!((evaluate_line(&g, -1e3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn line_validation() {
        assert!(AnalyticLine::new(LineKind::Gaussian, 0.0, 0.3, 0.0).is_err());
        assert!(AnalyticLine::new(LineKind::Gaussian, 1.0, 1.0, 0.0).is_err());
        assert!(AnalyticLine::new(LineKind::Gaussian, 1.0, 0.0, 0.0).is_err());
        assert!(HyperfineTriplet::new(LineKind::Gaussian, 1.0, 0.3, 0.0).is_err());
    }

    #[test]
    fn max_slope_matches_closed_forms() {
        for kind in [LineKind::Lorentzian, LineKind::Gaussian] {
            for &(fwhm, c) in &[(0.1f64, 0.01), (1.0, 0.2), (5.0, 0.5)] {
                let f0: f64 = 3e5;
                let line = AnalyticLine::new(kind, fwhm, c, 0.0).unwrap();
                let w = SearchWindow::around(0.0, 5.0 * fwhm, fwhm).unwrap();
                let eta = numeric_sensitivity(|nu| f0 * evaluate_line(&line, nu), &w, ProbePoint::MaxSlope).unwrap();
                let closed = line.closed_form_sensitivity(f0).unwrap();
                assert!((eta / closed - 1.0).abs() < 1e-3, "{kind:?} {fwhm} {c}: {eta} {closed}");
            }
        }
    }

    #[test]
    fn optimal_probe_never_worse_than_max_slope() {
        let line = AnalyticLine::new(LineKind::Lorentzian, 1.0, 0.4, 0.0).unwrap();
        let w = SearchWindow::around(0.0, 5.0, 1.0).unwrap();
        let f = |nu| 1e5 * evaluate_line(&line, nu);
        let opt = numeric_sensitivity(f, &w, ProbePoint::Optimal).unwrap();
        let ms = numeric_sensitivity(f, &w, ProbePoint::MaxSlope).unwrap();
        assert!(opt <= ms * (1.0 + 1e-9));
    }

    #[test]
    fn flat_spectrum_rejected() {
        let w = SearchWindow::new(-1.0, 1.0, 0.5).unwrap();
        assert_eq!(numeric_sensitivity(|_| 1e5, &w, ProbePoint::Optimal), Err(OdmrError::FlatSpectrum));
    }

    #[test]
    fn triplet_is_even() {
        let t = HyperfineTriplet::with_default_splitting(LineKind::Lorentzian, 1.3, 0.2).unwrap();
        for nu in [0.1f64, 0.9, 2.16, 3.7] {
            assert!((t.evaluate(nu) - t.evaluate(-nu)).abs() < 1e-15);
        }
    }

    #[test]
    fn well_separated_lines_are_independent() {
        for kind in [LineKind::Lorentzian, LineKind::Gaussian] {
            let r = hyperfine_ratio(kind, 0.02, 0.03, HYPERFINE_SPLITTING_MHZ).unwrap();
            assert!((r - 1.0).abs() < 2e-3, "{kind:?}: {r}");
        }
    }
}
