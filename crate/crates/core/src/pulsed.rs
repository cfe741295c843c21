//! Pulsed ODMR: a resonant MW pulse, a dark wait and an optical pulse whose first
//! `τ` is read out, repeated to a periodic steady state.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::error::{invalid, OdmrError, Result};
use crate::linalg::{expm_with_integral, Matrix4};
use crate::optimize::{minimize, SearchDim, SearchSpace, DEFAULT_REL_TOL};
use crate::photophysics::{
    build_generator, emission_weights, excitation_rate, propagator, wait_relaxation, GeneratorMatrix,
    PopulationVector, RateConstants, PER_MICROSECOND,
};
use crate::quadrature::{bisect, composite_legendre, gaussian_expectation, golden_section};
use crate::scalar::Real;
use crate::sensitivity::gaussian_sensitivity;

/// Absolute tolerance of the π-pulse duration search, µs.
pub const PI_DURATION_TOL: f64 = 1e-4;

/// Largest `σ_δ·t` for which the 64-node Gauss–Hermite rule resolves the Rabi
/// oscillations in detuning; longer pulses use composite Gauss–Legendre.
pub const HERMITE_MAX_PHASE: f64 = 8.0;

/// Residual `‖Mp − p‖∞` above which a cycle fixed point is rejected.
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// Number of samples in the default flip-profile grid.
pub const PROFILE_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTiming<T> {
    pub t_pi: T,
    pub t_w: T,
    pub t_l: T,
    pub tau: T,
}

impl<T: Real> PulseTiming<T> {
    pub fn new(t_pi: T, t_w: T, t_l: T, tau: T) -> Result<Self> {
        let t = PulseTiming { t_pi, t_w, t_l, tau };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_pi", self.t_pi), ("t_w", self.t_w), ("t_l", self.t_l), ("tau", self.tau)] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(invalid(name, format!("duration must be finite and ≥ 0, got {v}")));
            }
        }
        if !(self.t_l > T::zero()) {
            return Err(invalid("t_l", "laser pulse must have positive duration"));
        }
        if self.tau > self.t_l {
            return Err(invalid("tau", format!("readout {} exceeds laser pulse {}", self.tau, self.t_l)));
        }
        Ok(())
    }

    /// `t_π + t_w + t_L`.
    pub fn cycle_duration(&self) -> T {
        self.t_pi + self.t_w + self.t_l
    }
}

/// Dephased response of a single MW pulse versus detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipProfile<T> {
    pub c_pi: T,
    /// MHz.
    pub fwhm: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsedSummary<T> {
    pub contrast: T,
    /// Off-resonant count rate averaged over the cycle, counts/s.
    pub f_avg0: T,
    /// MHz; NaN without drive.
    pub fwhm: T,
    pub c_pi: T,
}

/// Two-level Rabi formula `Ω²/(Ω²+δ²) · sin²(√(Ω²+δ²)·t/2)`.
pub fn bare_flip_probability<T: Real>(omega: T, delta: T, t: T) -> T {
    let w2 = omega * omega + delta * delta;
    if w2 == T::zero() {
        return T::zero();
    }
    let s = (w2.sqrt() * t * T::lit(0.5)).sin();
    omega * omega / w2 * s * s
}

/// Standard deviation of the angular detuning distribution, `√2/T₂*`.
pub fn detuning_spread<T: Real>(t2star: T) -> T {
    T::SQRT_2() / t2star
}

/// Rabi flip probability averaged over Gaussian detunings centred at `delta0` with
/// variance `2/T₂*²`.
pub fn dephased_flip_probability<T: Real>(omega: T, delta0: T, t: T, t2star: T) -> T {
    let sd = detuning_spread(t2star);
    if sd == T::zero() {
        return bare_flip_probability(omega, delta0, t);
    }
    let f = |d: T| bare_flip_probability(omega, d, t);
    let p = if sd * t <= T::lit(HERMITE_MAX_PHASE) {
        gaussian_expectation(f, delta0, sd)
    } else {
        // Panels of half an oscillation period in detuning over ±8σ.
        let span = T::lit(8.0) * sd;
        let panels = (T::lit(2.0) * span * t / T::PI()).ceil().to_usize().unwrap_or(16).max(16);
        let norm = T::one() / (sd * T::TAU().sqrt());
        composite_legendre(delta0 - span, delta0 + span, panels, 10)
            .into_iter()
            .fold(T::zero(), |acc, (d, w)| {
                let z = (d - delta0) / sd;
                acc + w * norm * (-(z * z) * T::lit(0.5)).exp() * f(d)
            })
    };
    p.max(T::zero()).min(T::one())
}

/// Pulse length maximizing the on-resonance dephased flip probability, searched on
/// `[π/(4Ω), 2π/Ω]`. If the maximum lands on the upper edge the bracket is doubled
/// once and a warning is logged.
pub fn optimal_pi_duration<T: Real>(omega: T, t2star: T) -> Result<T> {
    if !(omega > T::zero() && omega.is_finite()) {
        return Err(invalid("omega", format!("Rabi frequency must be > 0, got {omega}")));
    }
    let lo = T::lit(0.25) * T::PI() / omega;
    let hi = T::TAU() / omega;
    let tol = T::lit(PI_DURATION_TOL).min(lo * T::lit(1e-3));
    let search = |hi: T| golden_section(|t| -dephased_flip_probability(omega, T::zero(), t, t2star), lo, hi, tol).0;
    let t = search(hi);
    if hi - t > T::lit(10.0) * tol {
        return Ok(t);
    }
    let wide = search(hi + hi);
    if (hi + hi) - wide <= T::lit(10.0) * tol {
        log::warn!("π-pulse duration for Ω={omega} rad/µs sits on the widened bracket edge {wide} µs");
    } else {
        log::warn!("π-pulse bracket widened for Ω={omega} rad/µs");
    }
    Ok(wide)
}

/// `Δν ≈ √(0.0646326 Ω² + 4 ln2/(π² T₂*²))`, MHz.
pub fn approx_linewidth<T: Real>(omega: T, t2star: T) -> T {
    let term_drive = T::lit(0.0646326) * omega * omega;
    let term_deph = T::lit(4.0) * T::LN_2() / (T::PI() * T::PI() * t2star * t2star);
    (term_drive + term_deph).sqrt()
}

/// Symmetric angular-detuning grid spanning three approximate linewidths each side.
pub fn pulsed_detuning_grid<T: Real>(omega: T, t2star: T, points: usize) -> Vec<T> {
    crate::cw::symmetric_grid(T::lit(3.0) * T::TAU() * approx_linewidth(omega, t2star), points)
}

/// Flip profile over `grid`: `c_π` at zero detuning and the FWHM between the
/// innermost half-maximum crossings, refined by bisection.
pub fn pulsed_lineshape<T: Real>(omega: T, t_pi: T, t2star: T, grid: &[T]) -> Result<FlipProfile<T>> {
    if grid.len() < 3 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("grid", "need at least three strictly increasing detunings"));
    }
    let f = |d: T| dephased_flip_probability(omega, d, t_pi, t2star);
    let c_pi = f(T::zero());
    if !(c_pi > T::zero()) {
        return Err(OdmrError::FlatSpectrum);
    }
    let half = c_pi * T::lit(0.5);
    let values: Vec<T> = grid.iter().map(|&d| f(d)).collect();
    let centre = grid.partition_point(|&d| d < T::zero());
    let refine = |a: T, b: T| bisect(|d| Ok(f(d) - half), a, b, (b - a).abs() * T::lit(1e-8));

    let right = (centre..grid.len()).find(|&i| grid[i] > T::zero() && values[i] <= half).ok_or(OdmrError::Unbracketed)?;
    let left = (0..centre).rev().find(|&i| values[i] <= half).ok_or(OdmrError::Unbracketed)?;
    let x_right = refine(grid[right - 1].max(T::zero()), grid[right])?;
    let x_left = refine(grid[left], grid[left + 1].min(T::zero()))?;
    Ok(FlipProfile {
        c_pi,
        fwhm: (x_right - x_left) / T::TAU(),
    })
}

/// Population map of the MW pulse: `m₀` and `m₊₁` exchange a fraction `c_π`.
pub fn pi_pulse_matrix<T: Real>(c_pi: T) -> Result<Matrix4<T>> {
    if !(c_pi >= T::zero() && c_pi <= T::one()) {
        return Err(invalid("c_pi", format!("flip probability must lie in [0, 1], got {c_pi}")));
    }
    let mut m = Matrix4::identity();
    m[(1, 1)] = T::one() - c_pi;
    m[(2, 2)] = T::one() - c_pi;
    m[(1, 2)] = c_pi;
    m[(2, 1)] = c_pi;
    Ok(m)
}

/// One full cycle `Π·W·e^{Λ t_L}`, mapping the state at the start of the laser pulse
/// to the same point of the next cycle.
pub fn cycle_map<T: Real>(
    generator: &GeneratorMatrix<T>,
    wait: &Matrix4<T>,
    pi: &Matrix4<T>,
    t_l: T,
) -> Result<Matrix4<T>> {
    Ok(*pi * *wait * propagator(generator, t_l)?)
}

/// Periodic steady state at the start of the laser pulse.
pub fn pulsed_steady_state<T: Real>(
    generator: &GeneratorMatrix<T>,
    wait: &Matrix4<T>,
    pi: &Matrix4<T>,
    t_l: T,
) -> Result<PopulationVector<T>> {
    if !(t_l > T::zero()) {
        return Err(invalid("t_l", format!("laser pulse must be > 0, got {t_l}")));
    }
    let m = cycle_map(generator, wait, pi, t_l)?;
    let mut a = m - Matrix4::identity();
    for j in 0..4 {
        a[(3, j)] = T::one();
    }
    let p = a
        .solve(&[T::zero(), T::zero(), T::zero(), T::one()])
        .map_err(|_| OdmrError::DegenerateSteadyState)?;
    let mp = m.mul_vec(&p);
    let residual = (0..4).fold(T::zero(), |acc, i| acc.max((mp[i] - p[i]).abs()));
    let tol = T::lit(FIXED_POINT_TOL).max(T::epsilon() * T::lit(64.0));
    if !(residual <= tol) {
        return Err(OdmrError::NoUnitEigenvalue {
            residual: residual.as_f64(),
            tol: tol.as_f64(),
        });
    }
    Ok(PopulationVector::cleaned(p))
}

/// Expected detected counts in the readout window `[0, τ]` of the laser pulse,
/// starting from `p_start`, including background `bRτ`.
pub fn integrated_counts<T: Real>(
    p_start: &PopulationVector<T>,
    generator: &GeneratorMatrix<T>,
    rates: &RateConstants<T>,
    r: T,
    tau: T,
    epsilon: T,
    b: T,
) -> Result<T> {
    if !(tau.is_finite() && tau >= T::zero()) {
        return Err(invalid("tau", format!("readout window must be ≥ 0, got {tau}")));
    }
    if tau == T::zero() {
        return Ok(T::zero());
    }
    let (_, integral) = expm_with_integral(generator.matrix(), tau).map_err(|_| OdmrError::QuadratureNonConvergence)?;
    let occupancy = integral.mul_vec(&p_start.to_array());
    let w = emission_weights(rates, r);
    let emitted = (0..4).fold(T::zero(), |acc, i| acc + w[i] * occupancy[i]);
    Ok(epsilon * rates.gamma * emitted + b * r * tau)
}

/// Readout counts of the periodic steady state as an exact function of the flip
/// probability. The π pulse is a rank-one change of the cycle map, so the counts are
/// a Möbius function `C(c) = C_off + c·a/(1 − c·d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsedResponse<T> {
    pub off_counts: T,
    pub a: T,
    pub d: T,
}

impl<T: Real> PulsedResponse<T> {
    pub fn counts(&self, c_pi: T) -> T {
        self.off_counts + c_pi * self.a / (T::one() - c_pi * self.d)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn pulsed_response<T: Real>(
    generator: &GeneratorMatrix<T>,
    wait: &Matrix4<T>,
    rates: &RateConstants<T>,
    r: T,
    t_l: T,
    tau: T,
    epsilon: T,
    b: T,
) -> Result<PulsedResponse<T>> {
    if !(t_l > T::zero()) {
        return Err(invalid("t_l", format!("laser pulse must be > 0, got {t_l}")));
    }
    // Π(c) = I − c·u uᵀ with u = e(m₀) − e(m₊₁).
    let we = *wait * propagator(generator, t_l)?;
    let mut a0 = we - Matrix4::identity();
    for j in 0..4 {
        a0[(3, j)] = T::one();
    }
    let z = T::zero();
    let u = [z, T::one(), -T::one(), z];
    let p0 = a0.solve(&[z, z, z, T::one()]).map_err(|_| OdmrError::DegenerateSteadyState)?;
    let q = a0.solve(&u).map_err(|_| OdmrError::DegenerateSteadyState)?;
    let zt: Vec<T> = (0..4).map(|j| we[(1, j)] - we[(2, j)]).collect();
    let dot = |x: &[T; 4]| (0..4).fold(T::zero(), |acc, j| acc + zt[j] * x[j]);

    let (_, integral) = expm_with_integral(generator.matrix(), tau).map_err(|_| OdmrError::QuadratureNonConvergence)?;
    let w = emission_weights(rates, r);
    let readout = |p: &[T; 4]| {
        let occ = integral.mul_vec(p);
        epsilon * rates.gamma * (0..4).fold(T::zero(), |acc, i| acc + w[i] * occ[i])
    };
    Ok(PulsedResponse {
        off_counts: readout(&p0) + b * r * tau,
        a: readout(&q) * dot(&p0),
        d: dot(&q),
    })
}

/// Contrast, off-resonant average count rate and linewidth of a pulsed measurement.
#[allow(clippy::too_many_arguments)]
pub fn pulsed_summary<T: Real>(
    rates: &RateConstants<T>,
    r: T,
    timing: &PulseTiming<T>,
    omega: T,
    t2star: T,
    epsilon: T,
    b: T,
) -> Result<PulsedSummary<T>> {
    timing.validate()?;
    if !(omega.is_finite() && omega >= T::zero()) {
        return Err(invalid("omega", format!("Rabi frequency must be ≥ 0, got {omega}")));
    }
    let profile = if omega == T::zero() || timing.t_pi == T::zero() {
        FlipProfile { c_pi: T::zero(), fwhm: T::nan() }
    } else {
        let grid = pulsed_detuning_grid(omega, t2star, PROFILE_POINTS);
        pulsed_lineshape(omega, timing.t_pi, t2star, &grid)?
    };
    pulsed_summary_with_profile(rates, r, timing, &profile, epsilon, b)
}

/// [`pulsed_summary`] with the MW pulse response supplied by the caller.
pub fn pulsed_summary_with_profile<T: Real>(
    rates: &RateConstants<T>,
    r: T,
    timing: &PulseTiming<T>,
    profile: &FlipProfile<T>,
    epsilon: T,
    b: T,
) -> Result<PulsedSummary<T>> {
    timing.validate()?;
    let generator = build_generator(rates, r)?;
    let wait = wait_relaxation(rates);
    let on = pulsed_steady_state(&generator, &wait, &pi_pulse_matrix(profile.c_pi)?, timing.t_l)?;
    let off = pulsed_steady_state(&generator, &wait, &Matrix4::identity(), timing.t_l)?;
    let c1 = integrated_counts(&on, &generator, rates, r, timing.tau, epsilon, b)?;
    let c0 = integrated_counts(&off, &generator, rates, r, timing.tau, epsilon, b)?;
    if !(c0 > T::zero()) {
        return Err(invalid("tau", "no counts collected in the readout window"));
    }
    Ok(PulsedSummary {
        contrast: (T::one() - c1 / c0).max(T::zero()),
        f_avg0: c0 / timing.cycle_duration() * T::lit(PER_MICROSECOND),
        fwhm: profile.fwhm,
        c_pi: profile.c_pi,
    })
}

/// Optimal π-pulse duration for `omega` and the flip profile it produces.
pub fn optimal_flip_profile<T: Real>(omega: T, t2star: T) -> Result<(T, FlipProfile<T>)> {
    let t_pi = optimal_pi_duration(omega, t2star)?;
    let grid = pulsed_detuning_grid(omega, t2star, PROFILE_POINTS);
    Ok((t_pi, pulsed_lineshape(omega, t_pi, t2star, &grid)?))
}

/// Shot-noise-limited sensitivity of a pulsed measurement, T/√Hz.
pub fn sensitivity_pulsed<T: Real>(summary: &PulsedSummary<T>) -> Result<T> {
    if !summary.fwhm.is_finite() {
        return Err(OdmrError::NonFiniteSensitivity("linewidth undefined without drive"));
    }
    gaussian_sensitivity(summary.fwhm, summary.contrast, summary.f_avg0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulsedOptimizeSettings<T> {
    /// Angular Rabi frequency range, rad/µs.
    pub omega_range: (T, T),
    /// Laser pulse range, µs.
    pub t_l_range: (T, T),
    /// Range of `τ/t_L`; the upper end 1 is a legitimate optimum.
    pub readout_fraction_range: (T, T),
    pub coarse_points: usize,
    pub rel_tol: T,
}

impl<T: Real> Default for PulsedOptimizeSettings<T> {
    fn default() -> Self {
        PulsedOptimizeSettings {
            omega_range: (T::TAU() * T::lit(0.005), T::TAU() * T::lit(5.0)),
            t_l_range: (T::lit(0.03), T::lit(300.0)),
            readout_fraction_range: (T::lit(0.02), T::one()),
            coarse_points: 12,
            rel_tol: T::lit(DEFAULT_REL_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulsedOptimum<T> {
    pub omega: T,
    pub tau: T,
    pub t_l: T,
    pub t_pi: T,
    pub eta: T,
    pub summary: PulsedSummary<T>,
    pub evaluations: usize,
}

/// Pulsed sensitivity with `t_π` chosen by [`optimal_pi_duration`].
#[allow(clippy::too_many_arguments)]
pub fn pulsed_sensitivity_at<T: Real>(
    rates: &RateConstants<T>,
    r: T,
    omega: T,
    tau: T,
    t_l: T,
    t2star: T,
    t_w: T,
    epsilon: T,
    b: T,
) -> Result<(T, T, PulsedSummary<T>)> {
    let (t_pi, profile) = optimal_flip_profile(omega, t2star)?;
    let timing = PulseTiming::new(t_pi, t_w, t_l, tau.min(t_l))?;
    let summary = pulsed_summary_with_profile(rates, r, &timing, &profile, epsilon, b)?;
    Ok((sensitivity_pulsed(&summary)?, t_pi, summary))
}

/// Minimizes pulsed sensitivity at fixed saturation `s` over `Ω`, `t_L` and `τ ≤ t_L`.
pub fn optimize_pulsed<T: Real>(
    rates: &RateConstants<T>,
    t2star: T,
    t_w: T,
    epsilon: T,
    b: T,
    s: T,
    settings: &PulsedOptimizeSettings<T>,
) -> Result<PulsedOptimum<T>> {
    if !(s > T::zero()) {
        return Err(invalid("s", format!("saturation parameter must be > 0, got {s}")));
    }
    let r = excitation_rate(s, rates);
    let space = SearchSpace::new(
        vec![
            SearchDim::log("omega", settings.omega_range.0, settings.omega_range.1),
            SearchDim::log("t_l", settings.t_l_range.0, settings.t_l_range.1),
            SearchDim::linear("tau_fraction", settings.readout_fraction_range.0, settings.readout_fraction_range.1)
                .allow_boundary(),
        ],
        settings.coarse_points,
    )?;
    // The MW pulse response depends on Ω alone; the coarse grid revisits each Ω many times.
    let profiles: Mutex<HashMap<u64, Result<(T, FlipProfile<T>)>>> = Mutex::new(HashMap::new());
    let profile_of = |omega: T| {
        let key = omega.as_f64().to_bits();
        if let Some(hit) = profiles.lock().ok().and_then(|m| m.get(&key).cloned()) {
            return hit;
        }
        let value = optimal_flip_profile(omega, t2star);
        if let Ok(mut m) = profiles.lock() {
            m.insert(key, value.clone());
        }
        value
    };
    let objective = |v: &[T]| {
        let eval = || -> Result<T> {
            let (t_pi, profile) = profile_of(v[0])?;
            let timing = PulseTiming::new(t_pi, t_w, v[1], (v[2] * v[1]).min(v[1]))?;
            sensitivity_pulsed(&pulsed_summary_with_profile(rates, r, &timing, &profile, epsilon, b)?)
        };
        eval().unwrap_or(T::infinity())
    };
    let res = minimize(objective, &space, settings.rel_tol)?;
    if res.boundary_flag {
        return Err(res.boundary_error());
    }
    let (omega, t_l, frac) = (res.argmin[0].1, res.argmin[1].1, res.argmin[2].1);
    let tau = frac * t_l;
    let (eta, t_pi, summary) = pulsed_sensitivity_at(rates, r, omega, tau, t_l, t2star, t_w, epsilon, b)?;
    Ok(PulsedOptimum {
        omega,
        tau,
        t_l,
        t_pi,
        eta,
        summary,
        evaluations: res.evaluations,
    })
}
