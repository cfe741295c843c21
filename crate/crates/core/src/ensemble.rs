//! Wide-field NV ensembles: single-NV models integrated over a cylindrical Gaussian
//! excitation and collection profile through a uniformly doped slab.
//!
//! Lengths are in µm, powers in mW and intensities in mW/µm².

use rayon::prelude::*;

use crate::cw::{
    cw_dephasing_rate, cw_steady_state, dip_half_width, symmetric_grid, CwDrive, LineSummary, OdmrSpectrum,
};
use crate::error::{invalid, OdmrError, Result};
use crate::optimize::{minimize, OptimResult, SearchDim, SearchSpace, DEFAULT_REL_TOL};
use crate::photophysics::{
    build_generator, excitation_rate, fluorescence_rate, steady_state, wait_relaxation,
    RateConstants, PER_MICROSECOND,
};
use crate::pulsed::{
    dephased_flip_probability, optimal_pi_duration, pulsed_detuning_grid, pulsed_lineshape, pulsed_response,
    sensitivity_pulsed, PulseTiming, PulsedResponse, PulsedSummary, PROFILE_POINTS,
};
use crate::quadrature::gauss_legendre;
use crate::scalar::{pairwise_sum, Real};
use crate::sensitivity::lorentzian_sensitivity;

/// Fraction of NVs whose axis is resonant with the MW drive.
pub const RESONANT_FRACTION: f64 = 0.25;
/// Orientation-averaged projection of the excitation polarization.
pub const POLARIZATION_FACTOR: f64 = 2.0 / 3.0;
/// Carbon atoms per cm³ in diamond.
pub const DIAMOND_CARBON_DENSITY_CM3: f64 = 1.76e23;
/// NV saturation intensity, mW/µm².
pub const SATURATION_INTENSITY: f64 = 1.1;
/// Radial truncation in units of the waist.
pub const TRUNCATION_WAISTS: f64 = 10.0;
pub const DEFAULT_SHELLS: usize = 200;
/// Gauss–Legendre order within each radial panel.
pub const SHELL_ORDER: usize = 10;
/// Shells whose relative intensity falls below this contribute less than 1e-14 of
/// the signal (fluorescence scales as intensity × collection) and are skipped.
pub const INTENSITY_CUTOFF: f64 = 1e-7;

const UM3_PER_CM3: f64 = 1e12;
const PPB: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamProfile<T> {
    /// mW.
    pub total_power: T,
    /// 1/e² intensity radius, µm.
    pub waist: T,
    /// mW/µm².
    pub saturation_intensity: T,
}

impl<T: Real> BeamProfile<T> {
    pub fn new(total_power: T, waist: T) -> Result<Self> {
        let b = BeamProfile {
            total_power,
            waist,
            saturation_intensity: T::lit(SATURATION_INTENSITY),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        positive("total_power", self.total_power)?;
        positive("waist", self.waist)?;
        positive("saturation_intensity", self.saturation_intensity)
    }

    /// `I₀ = 2P/(πσ²)`, mW/µm².
    pub fn peak_intensity(&self) -> T {
        T::lit(2.0) * self.total_power / (T::PI() * self.waist * self.waist)
    }

    /// `exp(−2r²/σ²)`.
    pub fn relative_intensity(&self, radius: T) -> T {
        let x = radius / self.waist;
        (-T::lit(2.0) * x * x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiamondSample<T> {
    pub nv_density_ppb: T,
    /// µs.
    pub t2star: T,
    /// µm.
    pub thickness: T,
    /// Carbon atoms per cm³.
    pub carbon_density: T,
}

impl<T: Real> Default for DiamondSample<T> {
    fn default() -> Self {
        DiamondSample {
            nv_density_ppb: T::lit(300.0),
            t2star: T::one(),
            thickness: T::lit(500.0),
            carbon_density: T::lit(DIAMOND_CARBON_DENSITY_CM3),
        }
    }
}

impl<T: Real> DiamondSample<T> {
    pub fn validate(&self) -> Result<()> {
        positive("nv_density_ppb", self.nv_density_ppb)?;
        positive("t2star", self.t2star)?;
        positive("thickness", self.thickness)?;
        positive("carbon_density", self.carbon_density)
    }

    /// NVs per µm³.
    pub fn nv_per_um3(&self) -> T {
        self.nv_density_ppb * T::lit(PPB) * self.carbon_density / T::lit(UM3_PER_CM3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectionProfile<T> {
    pub epsilon_max: T,
    /// µm; equal to the beam waist in the standard geometry.
    pub waist: T,
}

impl<T: Real> CollectionProfile<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_max > T::zero() && self.epsilon_max <= T::one()) {
            return Err(invalid("epsilon_max", format!("must lie in (0, 1], got {}", self.epsilon_max)));
        }
        positive("collection waist", self.waist)
    }

    pub fn efficiency(&self, radius: T) -> T {
        let x = radius / self.waist;
        self.epsilon_max * (-T::lit(2.0) * x * x).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig<T> {
    pub beam: BeamProfile<T>,
    pub sample: DiamondSample<T>,
    pub collection: CollectionProfile<T>,
    /// Background count rate per NV is `α·ε(r)·R(r)`.
    pub background_alpha: T,
    pub rates: RateConstants<T>,
    /// Dark wait between laser and MW pulses, µs.
    pub wait_time: T,
    pub n_shells: usize,
}

impl<T: Real> EnsembleConfig<T> {
    /// Standard geometry: 1% peak collection with the beam's waist, default sample.
    pub fn new(total_power: T, waist: T) -> Result<Self> {
        let cfg = EnsembleConfig {
            beam: BeamProfile::new(total_power, waist)?,
            sample: DiamondSample::default(),
            collection: CollectionProfile {
                epsilon_max: T::lit(0.01),
                waist,
            },
            background_alpha: T::zero(),
            rates: RateConstants::default(),
            wait_time: T::one(),
            n_shells: DEFAULT_SHELLS,
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.beam.validate()?;
        self.sample.validate()?;
        self.collection.validate()?;
        self.rates.validate()?;
        if !(self.background_alpha >= T::zero() && self.background_alpha.is_finite()) {
            return Err(invalid("background_alpha", format!("must be ≥ 0, got {}", self.background_alpha)));
        }
        if !(self.wait_time >= T::zero()) {
            return Err(invalid("wait_time", format!("must be ≥ 0, got {}", self.wait_time)));
        }
        if self.n_shells < 50 {
            return Err(invalid("n_shells", format!("need at least 50 shells, got {}", self.n_shells)));
        }
        Ok(())
    }

    pub fn resonant_fraction(&self) -> T {
        T::lit(RESONANT_FRACTION)
    }

    pub fn polarization_factor(&self) -> T {
        T::lit(POLARIZATION_FACTOR)
    }

    /// Quadrature shells carrying local excitation, collection and NV count.
    pub fn shells(&self) -> Result<Vec<Shell<T>>> {
        self.validate()?;
        let per_area = self.sample.nv_per_um3() * self.sample.thickness;
        let shells = radial_shells(&self.beam, self.n_shells)?
            .into_iter()
            .filter(|&(r, _)| self.beam.relative_intensity(r) >= T::lit(INTENSITY_CUTOFF))
            .map(|(r, area)| {
                let s = local_saturation(&self.beam, r);
                Shell {
                    radius: r,
                    nv_count: area * per_area,
                    r: excitation_rate(s, &self.rates),
                    epsilon: self.collection.efficiency(r),
                }
            })
            .collect();
        Ok(shells)
    }
}

/// One radial quadrature node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shell<T> {
    pub radius: T,
    /// NVs represented by the node (all orientations).
    pub nv_count: T,
    /// Local optical excitation rate, MHz.
    pub r: T,
    pub epsilon: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Cw,
    Pulsed,
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}

/// `s(r) = (2/3)·I₀·exp(−2r²/σ²)/I_sat`.
pub fn local_saturation<T: Real>(beam: &BeamProfile<T>, radius: T) -> T {
    T::lit(POLARIZATION_FACTOR) * beam.peak_intensity() * beam.relative_intensity(radius) / beam.saturation_intensity
}

/// Nodes and area weights for `∫₀^{10σ} f(r)·2πr dr`: composite Gauss–Legendre on
/// panels whose edges grow quadratically, so nodes cluster inside the beam.
pub fn radial_shells<T: Real>(beam: &BeamProfile<T>, n_shells: usize) -> Result<Vec<(T, T)>> {
    if n_shells < 50 {
        return Err(invalid("n_shells", format!("need at least 50 shells, got {n_shells}")));
    }
    let panels = n_shells.div_ceil(SHELL_ORDER);
    let rule = gauss_legendre(SHELL_ORDER);
    let outer = T::lit(TRUNCATION_WAISTS) * beam.waist;
    let edge = |i: usize| {
        let x = T::lit(i as f64) / T::lit(panels as f64);
        outer * x * x
    };
    let mut out = Vec::with_capacity(panels * SHELL_ORDER);
    for p in 0..panels {
        let (a, b) = (edge(p), edge(p + 1));
        let (mid, half) = ((a + b) * T::lit(0.5), (b - a) * T::lit(0.5));
        for &(x, w) in &rule {
            let r = mid + half * T::lit(x);
            out.push((r, half * T::lit(w) * T::TAU() * r));
        }
    }
    Ok(out)
}

fn parallel_sum<T: Real, F: Fn(&Shell<T>) -> Result<T> + Sync + Send>(shells: &[Shell<T>], f: F) -> Result<T> {
    let terms = shells.par_iter().map(f).collect::<Result<Vec<T>>>()?;
    Ok(pairwise_sum(&terms))
}

fn off_resonant_per_nv<T: Real>(cfg: &EnsembleConfig<T>, shell: &Shell<T>) -> Result<T> {
    let p = steady_state(&build_generator(&cfg.rates, shell.r)?)?;
    Ok(fluorescence_rate(&p, shell.r, &cfg.rates, shell.epsilon, T::zero()))
}

fn background_per_nv<T: Real>(cfg: &EnsembleConfig<T>, shell: &Shell<T>) -> T {
    cfg.background_alpha * shell_unit_background(shell)
}

/// NV fluorescence and background of the whole ensemble without MW drive, counts/s.
pub fn ensemble_off_resonant_rate<T: Real>(cfg: &EnsembleConfig<T>) -> Result<T> {
    let shells = cfg.shells()?;
    parallel_sum(&shells, |sh| Ok(sh.nv_count * (off_resonant_per_nv(cfg, sh)? + background_per_nv(cfg, sh))))
}

/// `α` at which the integrated background equals the integrated MW-off NV
/// fluorescence.
pub fn background_alpha_for_equal_fluorescence<T: Real>(cfg: &EnsembleConfig<T>) -> Result<T> {
    let shells = cfg.shells()?;
    let nv = parallel_sum(&shells, |sh| Ok(sh.nv_count * off_resonant_per_nv(cfg, sh)?))?;
    let unit = parallel_sum(&shells, |sh| Ok(sh.nv_count * shell_unit_background(sh)))?;
    Ok(nv / unit)
}

fn shell_unit_background<T: Real>(shell: &Shell<T>) -> T {
    shell.epsilon * shell.r * T::lit(PER_MICROSECOND)
}

/// Ensemble CW count rate at one detuning, counts/s.
pub fn ensemble_cw_rate<T: Real>(cfg: &EnsembleConfig<T>, shells: &[Shell<T>], omega: T, delta: T) -> Result<T> {
    let drive = CwDrive::new(omega, cfg.sample.t2star)?;
    let q = cfg.resonant_fraction();
    parallel_sum(shells, |sh| {
        let on = cw_steady_state(&cfg.rates, sh.r, &drive, delta)?;
        let f_on = fluorescence_rate(&on.populations, sh.r, &cfg.rates, sh.epsilon, T::zero());
        let f_off = off_resonant_per_nv(cfg, sh)?;
        Ok(sh.nv_count * (q * f_on + (T::one() - q) * f_off + background_per_nv(cfg, sh)))
    })
}

/// Ensemble CW spectrum on a caller-supplied symmetric grid.
pub fn ensemble_cw_spectrum<T: Real>(cfg: &EnsembleConfig<T>, omega: T, grid: &[T]) -> Result<OdmrSpectrum<T>> {
    let shells = cfg.shells()?;
    let rates = grid
        .iter()
        .map(|&d| ensemble_cw_rate(cfg, &shells, omega, d))
        .collect::<Result<Vec<T>>>()?;
    OdmrSpectrum::new(grid.to_vec(), rates)
}

/// Ensemble CW line. `F₀` is the exact MW-off rate and the half-depth crossing is
/// bracketed outward from the dephasing width and refined by bisection.
pub fn ensemble_cw_line<T: Real>(cfg: &EnsembleConfig<T>, omega: T) -> Result<LineSummary<T>> {
    let shells = cfg.shells()?;
    let f0 = ensemble_off_resonant_rate(cfg)?;
    let f_min = ensemble_cw_rate(cfg, &shells, omega, T::zero())?;
    let peak_r = shells.iter().fold(T::zero(), |m, s| m.max(s.r));
    let guess = cw_dephasing_rate(peak_r, cfg.sample.t2star).max(omega);
    let hw = dip_half_width(|d| ensemble_cw_rate(cfg, &shells, omega, d), f0, f_min, guess)?
        .ok_or(OdmrError::FlatSpectrum)?;
    Ok(LineSummary {
        f0,
        contrast: T::one() - f_min / f0,
        fwhm: T::lit(2.0) * hw / T::TAU(),
    })
}

/// Detuning grid spanning `±GRID_SPAN_HWHM` half-widths of the ensemble CW dip.
pub fn ensemble_cw_detuning_grid<T: Real>(cfg: &EnsembleConfig<T>, omega: T, points: usize) -> Result<Vec<T>> {
    let line = ensemble_cw_line(cfg, omega)?;
    let hw = line.fwhm * T::PI();
    Ok(symmetric_grid(T::lit(crate::cw::GRID_SPAN_HWHM) * hw, points))
}

/// Per-shell pulsed responses for one timing, with the ensemble weights folded in.
struct EnsemblePulsed<T> {
    terms: Vec<(T, PulsedResponse<T>)>,
    background: T,
    resonant: T,
}

impl<T: Real> EnsemblePulsed<T> {
    fn build(cfg: &EnsembleConfig<T>, shells: &[Shell<T>], timing: &PulseTiming<T>) -> Result<Self> {
        timing.validate()?;
        let wait = wait_relaxation(&cfg.rates);
        let terms = shells
            .par_iter()
            .map(|sh| {
                let g = build_generator(&cfg.rates, sh.r)?;
                let resp = pulsed_response(&g, &wait, &cfg.rates, sh.r, timing.t_l, timing.tau, sh.epsilon, T::zero())?;
                Ok((sh.nv_count, resp))
            })
            .collect::<Result<Vec<_>>>()?;
        let bg: Vec<T> = shells
            .iter()
            .map(|sh| sh.nv_count * cfg.background_alpha * sh.epsilon * sh.r * timing.tau)
            .collect();
        Ok(EnsemblePulsed {
            terms,
            background: pairwise_sum(&bg),
            resonant: cfg.resonant_fraction(),
        })
    }

    /// Counts per cycle with the resonant quarter flipped with probability `c`.
    fn counts(&self, c: T) -> T {
        let q = self.resonant;
        let v: Vec<T> = self
            .terms
            .iter()
            .map(|(n, resp)| *n * (q * resp.counts(c) + (T::one() - q) * resp.off_counts))
            .collect();
        pairwise_sum(&v) + self.background
    }
}

/// Ensemble pulsed count rate (averaged over the cycle) versus detuning, counts/s.
pub fn ensemble_pulsed_spectrum<T: Real>(
    cfg: &EnsembleConfig<T>,
    omega: T,
    timing: &PulseTiming<T>,
    grid: &[T],
) -> Result<OdmrSpectrum<T>> {
    let shells = cfg.shells()?;
    let ens = EnsemblePulsed::build(cfg, &shells, timing)?;
    let per_second = T::lit(PER_MICROSECOND) / timing.cycle_duration();
    let rates = grid
        .iter()
        .map(|&d| ens.counts(dephased_flip_probability(omega, d, timing.t_pi, cfg.sample.t2star)) * per_second)
        .collect();
    OdmrSpectrum::new(grid.to_vec(), rates)
}

/// Ensemble pulsed contrast and off-resonant rate from the summed per-shell counts.
/// The linewidth is that of the dephased flip profile, which depends only on `Ω`, `t_π`
/// and `T₂*`.
pub fn ensemble_pulsed_summary<T: Real>(cfg: &EnsembleConfig<T>, omega: T, timing: &PulseTiming<T>) -> Result<PulsedSummary<T>> {
    let shells = cfg.shells()?;
    ensemble_pulsed_summary_with(cfg, &shells, omega, timing)
}

fn ensemble_pulsed_summary_with<T: Real>(
    cfg: &EnsembleConfig<T>,
    shells: &[Shell<T>],
    omega: T,
    timing: &PulseTiming<T>,
) -> Result<PulsedSummary<T>> {
    let t2 = cfg.sample.t2star;
    let ens = EnsemblePulsed::build(cfg, shells, timing)?;
    let c_pi = dephased_flip_probability(omega, T::zero(), timing.t_pi, t2);
    let c0 = ens.counts(T::zero());
    let c1 = ens.counts(c_pi);
    if !(c0 > T::zero()) {
        return Err(invalid("tau", "no counts collected in the readout window"));
    }
    let grid = pulsed_detuning_grid(omega, t2, PROFILE_POINTS);
    let fwhm = pulsed_lineshape(omega, timing.t_pi, t2, &grid)?.fwhm;
    Ok(PulsedSummary {
        contrast: (T::one() - c1 / c0).max(T::zero()),
        f_avg0: c0 / timing.cycle_duration() * T::lit(PER_MICROSECOND),
        fwhm,
        c_pi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptimizeSettings<T> {
    /// Angular Rabi frequency range for CW, rad/µs.
    pub cw_omega_range: (T, T),
    pub cw_coarse_points: usize,
    pub pulsed_omega_range: (T, T),
    pub t_l_range: (T, T),
    pub readout_fraction_range: (T, T),
    pub pulsed_coarse_points: usize,
    pub rel_tol: T,
}

impl<T: Real> Default for EnsembleOptimizeSettings<T> {
    fn default() -> Self {
        EnsembleOptimizeSettings {
            cw_omega_range: (T::TAU() * T::lit(1e-3), T::TAU() * T::lit(30.0)),
            cw_coarse_points: 25,
            pulsed_omega_range: (T::TAU() * T::lit(5e-3), T::TAU() * T::lit(10.0)),
            t_l_range: (T::lit(0.01), T::lit(3000.0)),
            readout_fraction_range: (T::lit(0.02), T::one()),
            pulsed_coarse_points: 8,
            rel_tol: T::lit(DEFAULT_REL_TOL),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOptimum<T> {
    pub protocol: Protocol,
    pub eta: T,
    pub omega: T,
    /// Pulsed only; NaN for CW.
    pub tau: T,
    pub t_l: T,
    pub t_pi: T,
    pub contrast: T,
    /// `F₀` (CW) or `F⁰_avg` (pulsed), counts/s.
    pub rate: T,
    pub fwhm: T,
    pub boundary_flag: bool,
    pub evaluations: usize,
}

fn warn_boundary<T: Real>(protocol: Protocol, res: &OptimResult<T>) {
    if res.boundary_flag {
        log::warn!("{protocol:?} ensemble optimum on search boundary: {:?}", res.boundary_dims);
    }
}

/// CW ensemble sensitivity at a given Rabi frequency.
pub fn ensemble_cw_sensitivity_at<T: Real>(cfg: &EnsembleConfig<T>, omega: T) -> Result<(T, LineSummary<T>)> {
    let line = ensemble_cw_line(cfg, omega)?;
    Ok((lorentzian_sensitivity(line.fwhm, line.contrast, line.f0)?, line))
}

/// Pulsed ensemble sensitivity with `t_π` from the single-NV dephased optimum.
pub fn ensemble_pulsed_sensitivity_at<T: Real>(
    cfg: &EnsembleConfig<T>,
    omega: T,
    tau: T,
    t_l: T,
) -> Result<(T, T, PulsedSummary<T>)> {
    let shells = cfg.shells()?;
    pulsed_at(cfg, &shells, omega, tau, t_l)
}

fn pulsed_at<T: Real>(cfg: &EnsembleConfig<T>, shells: &[Shell<T>], omega: T, tau: T, t_l: T) -> Result<(T, T, PulsedSummary<T>)> {
    let t_pi = optimal_pi_duration(omega, cfg.sample.t2star)?;
    let timing = PulseTiming::new(t_pi, cfg.wait_time, t_l, tau.min(t_l))?;
    let summary = ensemble_pulsed_summary_with(cfg, shells, omega, &timing)?;
    Ok((sensitivity_pulsed(&summary)?, t_pi, summary))
}

/// Optimizes the MW and timing controls of one protocol at the configured beam.
pub fn ensemble_sensitivity<T: Real>(
    cfg: &EnsembleConfig<T>,
    protocol: Protocol,
    settings: &EnsembleOptimizeSettings<T>,
) -> Result<EnsembleOptimum<T>> {
    let shells = cfg.shells()?;
    match protocol {
        Protocol::Cw => {
            let space = SearchSpace::new(
                vec![SearchDim::log("omega", settings.cw_omega_range.0, settings.cw_omega_range.1)],
                settings.cw_coarse_points,
            )?;
            let res = minimize(
                |v: &[T]| ensemble_cw_sensitivity_at(cfg, v[0]).map(|x| x.0).unwrap_or(T::infinity()),
                &space,
                settings.rel_tol,
            )?;
            warn_boundary(protocol, &res);
            let omega = res.argmin[0].1;
            let (eta, line) = ensemble_cw_sensitivity_at(cfg, omega)?;
            Ok(EnsembleOptimum {
                protocol,
                eta,
                omega,
                tau: T::nan(),
                t_l: T::nan(),
                t_pi: T::nan(),
                contrast: line.contrast,
                rate: line.f0,
                fwhm: line.fwhm,
                boundary_flag: res.boundary_flag,
                evaluations: res.evaluations,
            })
        }
        Protocol::Pulsed => {
            let space = SearchSpace::new(
                vec![
                    SearchDim::log("omega", settings.pulsed_omega_range.0, settings.pulsed_omega_range.1),
                    SearchDim::log("t_l", settings.t_l_range.0, settings.t_l_range.1),
                    SearchDim::linear("tau_fraction", settings.readout_fraction_range.0, settings.readout_fraction_range.1)
                        .allow_boundary(),
                ],
                settings.pulsed_coarse_points,
            )?;
            let res = minimize(
                |v: &[T]| {
                    pulsed_at(cfg, &shells, v[0], v[2] * v[1], v[1])
                        .map(|x| x.0)
                        .unwrap_or(T::infinity())
                },
                &space,
                settings.rel_tol,
            )?;
            warn_boundary(protocol, &res);
            let (omega, t_l, frac) = (res.argmin[0].1, res.argmin[1].1, res.argmin[2].1);
            let tau = frac * t_l;
            let (eta, t_pi, summary) = pulsed_at(cfg, &shells, omega, tau, t_l)?;
            Ok(EnsembleOptimum {
                protocol,
                eta,
                omega,
                tau,
                t_l,
                t_pi,
                contrast: summary.contrast,
                rate: summary.f_avg0,
                fwhm: summary.fwhm,
                boundary_flag: res.boundary_flag,
                evaluations: res.evaluations,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioPoint<T> {
    pub power: T,
    pub cw: EnsembleOptimum<T>,
    pub pulsed: EnsembleOptimum<T>,
    pub ratio: T,
}

/// Independently optimized CW and pulsed sensitivities and their ratio at one power.
pub fn cw_pulsed_ratio_at<T: Real>(cfg: &EnsembleConfig<T>, settings: &EnsembleOptimizeSettings<T>) -> Result<RatioPoint<T>> {
    let cw = ensemble_sensitivity(cfg, Protocol::Cw, settings)?;
    let pulsed = ensemble_sensitivity(cfg, Protocol::Pulsed, settings)?;
    Ok(RatioPoint {
        power: cfg.beam.total_power,
        ratio: cw.eta / pulsed.eta,
        cw,
        pulsed,
    })
}

/// `η_CW*/η_pulsed*` at each power, every other setting taken from `cfg`.
pub fn cw_pulsed_ratio<T: Real>(
    cfg: &EnsembleConfig<T>,
    powers: &[T],
    settings: &EnsembleOptimizeSettings<T>,
) -> Vec<Result<RatioPoint<T>>> {
    powers
        .par_iter()
        .map(|&p| {
            let mut c = *cfg;
            c.beam.total_power = p;
            cw_pulsed_ratio_at(&c, settings)
        })
        .collect()
}
