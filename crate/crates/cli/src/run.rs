//! Scenario runners: each turns a resolved [`RunConfig`] into a [`Table`].
//!
//! Rows are computed in parallel and collected in sweep order, so output does not
//! depend on the thread count.

use std::f64::consts::{PI, TAU};

use nv_odmr::cw::{cw_line, cw_validity_warning, optimize_cw, sensitivity_cw, CwDrive, CwOptimizeSettings};
use nv_odmr::ensemble::{
    background_alpha_for_equal_fluorescence, ensemble_sensitivity, EnsembleConfig, EnsembleOptimizeSettings,
    EnsembleOptimum, Protocol,
};
use nv_odmr::lineshape::{hyperfine_ratio, AnalyticLine, LineKind};
use nv_odmr::photophysics::{excitation_rate, RateConstants};
use nv_odmr::pulsed::{
    optimal_pi_duration, optimize_pulsed, pulsed_summary, sensitivity_pulsed, PulseTiming, PulsedOptimizeSettings,
};
use rayon::prelude::*;

use crate::config::{
    ConfigError, CwSweepConfig, EnsembleRunConfig, HyperfineConfig, LineKindName, OptimizeConfig, ProtocolName,
    PulsedMode, PulsedSweepConfig, RunConfig, Scenario,
};
use crate::table::{Cell, Column, Table};

type RowResult = Result<Vec<Cell>, String>;

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
    s.as_ref()
        .ok_or_else(|| ConfigError::at_key(name, format!("missing [{name}] section")))
}

fn fill(table: &mut Table, rows: Vec<(Vec<Cell>, RowResult)>) {
    for (inputs, result) in rows {
        table.push(inputs, result);
    }
}

fn push_warning(table: &mut Table, w: String) {
    if !table.warnings.contains(&w) {
        table.warnings.push(w);
    }
}

fn pulsed_columns(first: &[Column]) -> Vec<Column> {
    let mut cols = first.to_vec();
    cols.extend([
        Column::new("omega", "rad/us"),
        Column::new("t_pi", "us"),
        Column::new("t_l", "us"),
        Column::new("tau", "us"),
        Column::new("c_pi", ""),
        Column::new("contrast", ""),
        Column::new("f_avg0", "counts/s"),
        Column::new("fwhm", "MHz"),
        Column::new("sensitivity", "T/sqrt(Hz)"),
    ]);
    cols
}

/// CW line summary and sensitivity over the `s × Ω` grid.
pub fn run_cw_sweep(cfg: &RunConfig) -> Result<Table, ConfigError> {
    cfg.check_scenario(&[Scenario::CwSingle])?;
    let c: &CwSweepConfig = section(&cfg.cw, "cw")?;
    c.validate()?;
    let rates = cfg.model.rates()?;
    let mut table = Table::new(vec![
        Column::new("s", ""),
        Column::new("rabi_mhz", "MHz"),
        Column::new("omega", "rad/us"),
        Column::new("f0", "counts/s"),
        Column::new("contrast", ""),
        Column::new("fwhm", "MHz"),
        Column::new("sensitivity", "T/sqrt(Hz)"),
    ]);
    for &s in &c.s {
        if let Some(w) = cw_validity_warning(s) {
            push_warning(&mut table, w);
        }
    }
    let points: Vec<(f64, f64)> = c.s.iter().flat_map(|&s| c.rabi_mhz.iter().map(move |&f| (s, f))).collect();
    let rows = points
        .par_iter()
        .map(|&(s, f)| {
            let omega = TAU * f;
            let result = (|| {
                let drive = CwDrive::new(omega, c.t2star)?;
                let (_, line) = cw_line(&rates, excitation_rate(s, &rates), &drive, c.epsilon, c.b)?;
                let eta = sensitivity_cw(&line)?;
                Ok::<_, nv_odmr::OdmrError>(vec![
                    Cell::Num(omega),
                    line.f0.into(),
                    line.contrast.into(),
                    line.fwhm.into(),
                    eta.into(),
                ])
            })()
            .map_err(|e| e.to_string());
            (vec![Cell::Num(s), Cell::Num(f)], result)
        })
        .collect();
    fill(&mut table, rows);
    Ok(table)
}

fn pulsed_fixed_row(rates: &RateConstants<f64>, c: &PulsedSweepConfig, s: f64, omega: f64, t_pi: f64, t_l: f64, tau: f64) -> RowResult {
    let timing = PulseTiming::new(t_pi, c.t_w, t_l, tau).map_err(|e| e.to_string())?;
    let summary = pulsed_summary(rates, excitation_rate(s, rates), &timing, omega, c.t2star, c.epsilon, c.b)
        .map_err(|e| e.to_string())?;
    let eta = if summary.fwhm.is_nan() {
        f64::NAN
    } else {
        sensitivity_pulsed(&summary).map_err(|e| e.to_string())?
    };
    Ok(vec![
        Cell::Num(omega),
        t_pi.into(),
        t_l.into(),
        tau.into(),
        summary.c_pi.into(),
        summary.contrast.into(),
        summary.f_avg0.into(),
        summary.fwhm.into(),
        eta.into(),
    ])
}

fn pulsed_optimum_row(
    rates: &RateConstants<f64>,
    t2star: f64,
    t_w: f64,
    epsilon: f64,
    b: f64,
    s: f64,
    coarse: Option<usize>,
) -> RowResult {
    let mut settings = PulsedOptimizeSettings::<f64>::default();
    if let Some(n) = coarse {
        settings.coarse_points = n;
    }
    let opt = optimize_pulsed(rates, t2star, t_w, epsilon, b, s, &settings).map_err(|e| e.to_string())?;
    Ok(vec![
        Cell::Num(opt.omega),
        opt.t_pi.into(),
        opt.t_l.into(),
        opt.tau.into(),
        opt.summary.c_pi.into(),
        opt.summary.contrast.into(),
        opt.summary.f_avg0.into(),
        opt.summary.fwhm.into(),
        opt.eta.into(),
    ])
}

/// Pulsed summaries at fixed timings, or the optimum at each `s`.
pub fn run_pulsed_sweep(cfg: &RunConfig) -> Result<Table, ConfigError> {
    cfg.check_scenario(&[Scenario::PulsedSingle])?;
    let c: &PulsedSweepConfig = section(&cfg.pulsed, "pulsed")?;
    c.validate()?;
    let rates = cfg.model.rates()?;
    let mut table = Table::new(pulsed_columns(&[Column::new("s", "")]));
    let rows: Vec<(Vec<Cell>, RowResult)> = match c.mode {
        PulsedMode::Optimize => c
            .s
            .par_iter()
            .map(|&s| {
                (vec![Cell::Num(s)], pulsed_optimum_row(&rates, c.t2star, c.t_w, c.epsilon, c.b, s, c.coarse_points))
            })
            .collect(),
        PulsedMode::Fixed => {
            let mut pulses: Vec<(f64, Result<f64, String>)> = Vec::new();
            match (c.rabi_mhz.is_empty(), c.t_pi.is_empty()) {
                (true, _) => pulses.extend(c.t_pi.iter().map(|&t| (PI / t, Ok(t)))),
                (false, true) => pulses.extend(c.rabi_mhz.iter().map(|&f| {
                    let omega = TAU * f;
                    (omega, optimal_pi_duration(omega, c.t2star).map_err(|e| e.to_string()))
                })),
                (false, false) => {
                    for &f in &c.rabi_mhz {
                        pulses.extend(c.t_pi.iter().map(|&t| (TAU * f, Ok(t))));
                    }
                }
            }
            let mut points = Vec::new();
            for &s in &c.s {
                for (omega, t_pi) in &pulses {
                    for &t_l in &c.t_l {
                        if c.tau.is_empty() {
                            points.push((s, *omega, t_pi.clone(), t_l, t_l));
                        } else {
                            points.extend(c.tau.iter().map(|&tau| (s, *omega, t_pi.clone(), t_l, tau)));
                        }
                    }
                }
            }
            points
                .par_iter()
                .map(|(s, omega, t_pi, t_l, tau)| {
                    let result = t_pi
                        .clone()
                        .and_then(|t| pulsed_fixed_row(&rates, c, *s, *omega, t, *t_l, *tau));
                    (vec![Cell::Num(*s)], result)
                })
                .collect()
        }
    };
    fill(&mut table, rows);
    Ok(table)
}

fn ensemble_cells(opt: Option<&EnsembleOptimum<f64>>, pulsed: bool) -> Vec<Cell> {
    let nan = f64::NAN;
    let o = opt.map(|o| {
        let mut v = vec![o.eta, o.omega];
        if pulsed {
            v.extend([o.t_pi, o.t_l, o.tau]);
        }
        v.extend([o.contrast, o.rate, o.fwhm, if o.boundary_flag { 1.0 } else { 0.0 }]);
        v
    });
    let width = if pulsed { 9 } else { 6 };
    o.unwrap_or_else(|| vec![nan; width]).into_iter().map(Cell::Num).collect()
}

fn ensemble_row(cfg: &RunConfig, c: &EnsembleRunConfig, waist: f64, power: f64, bg: f64) -> RowResult {
    let err = |e: nv_odmr::OdmrError| e.to_string();
    let mut ec = EnsembleConfig::new(power, waist).map_err(err)?;
    ec.rates = cfg.model.rates().map_err(|e| e.to_string())?;
    ec.beam.saturation_intensity = c.saturation_intensity;
    ec.sample.nv_density_ppb = c.nv_density_ppb;
    ec.sample.t2star = c.t2star;
    ec.sample.thickness = c.thickness_um;
    ec.sample.carbon_density = c.carbon_density_cm3;
    ec.collection.epsilon_max = c.epsilon_max;
    ec.wait_time = c.wait_time;
    ec.n_shells = c.n_shells;
    let alpha = if bg > 0.0 {
        bg * background_alpha_for_equal_fluorescence(&ec).map_err(err)?
    } else {
        0.0
    };
    ec.background_alpha = alpha;
    let mut settings = EnsembleOptimizeSettings::<f64>::default();
    if let Some(n) = c.cw_coarse_points {
        settings.cw_coarse_points = n;
    }
    if let Some(n) = c.pulsed_coarse_points {
        settings.pulsed_coarse_points = n;
    }
    let cw = if c.protocols.contains(&ProtocolName::Cw) {
        Some(ensemble_sensitivity(&ec, Protocol::Cw, &settings).map_err(err)?)
    } else {
        None
    };
    let pulsed = if c.protocols.contains(&ProtocolName::Pulsed) {
        Some(ensemble_sensitivity(&ec, Protocol::Pulsed, &settings).map_err(err)?)
    } else {
        None
    };
    let ratio = match (&cw, &pulsed) {
        (Some(a), Some(b)) => a.eta / b.eta,
        _ => f64::NAN,
    };
    let mut cells = vec![Cell::Num(alpha)];
    cells.extend(ensemble_cells(cw.as_ref(), false));
    cells.extend(ensemble_cells(pulsed.as_ref(), true));
    cells.push(Cell::Num(ratio));
    Ok(cells)
}

/// Optimal ensemble sensitivities over waist × power × background level.
pub fn run_ensemble(cfg: &RunConfig) -> Result<Table, ConfigError> {
    cfg.check_scenario(&[Scenario::Ensemble, Scenario::Ratio])?;
    let c: &EnsembleRunConfig = section(&cfg.ensemble, "ensemble")?;
    c.validate()?;
    cfg.model.rates()?;
    if cfg.scenario == Some(Scenario::Ratio)
        && !(c.protocols.contains(&ProtocolName::Cw) && c.protocols.contains(&ProtocolName::Pulsed))
    {
        return Err(ConfigError::at_key("ensemble.protocols", "ratio scenario needs both cw and pulsed"));
    }
    let mut cols = vec![
        Column::new("waist_um", "um"),
        Column::new("power_mw", "mW"),
        Column::new("background_relative", ""),
        Column::new("background_alpha", ""),
    ];
    for (name, unit) in [
        ("cw_sensitivity", "T/sqrt(Hz)"),
        ("cw_omega", "rad/us"),
        ("cw_contrast", ""),
        ("cw_f0", "counts/s"),
        ("cw_fwhm", "MHz"),
        ("cw_boundary", ""),
        ("pulsed_sensitivity", "T/sqrt(Hz)"),
        ("pulsed_omega", "rad/us"),
        ("pulsed_t_pi", "us"),
        ("pulsed_t_l", "us"),
        ("pulsed_tau", "us"),
        ("pulsed_contrast", ""),
        ("pulsed_f_avg0", "counts/s"),
        ("pulsed_fwhm", "MHz"),
        ("pulsed_boundary", ""),
        ("ratio", ""),
    ] {
        cols.push(Column::new(name, unit));
    }
    let mut table = Table::new(cols);
    let mut points = Vec::new();
    for &w in &c.waist_um {
        for &p in &c.power_mw {
            for &bg in &c.background_relative {
                points.push((w, p, bg));
            }
        }
    }
    let rows: Vec<(Vec<Cell>, RowResult)> = points
        .par_iter()
        .map(|&(w, p, bg)| (vec![Cell::Num(w), Cell::Num(p), Cell::Num(bg)], ensemble_row(cfg, c, w, p, bg)))
        .collect();
    let boundary: Vec<usize> = ["cw_boundary", "pulsed_boundary"]
        .iter()
        .filter_map(|n| table.column_index(n))
        .collect();
    fill(&mut table, rows);
    let flagged = table
        .rows
        .iter()
        .filter(|r| boundary.iter().any(|&i| r[i] == Cell::Num(1.0)))
        .count();
    if flagged > 0 {
        push_warning(&mut table, format!("{flagged} row(s) have an optimum on the search boundary"));
    }
    Ok(table)
}

/// Triplet-to-single-line sensitivity ratio over line kinds and widths.
pub fn run_hyperfine(cfg: &RunConfig) -> Result<Table, ConfigError> {
    cfg.check_scenario(&[Scenario::Hyperfine])?;
    let c: &HyperfineConfig = section(&cfg.hyperfine, "hyperfine")?;
    c.validate()?;
    let mut table = Table::new(vec![
        Column::new("kind", ""),
        Column::new("fwhm", "MHz"),
        Column::new("splitting", "MHz"),
        Column::new("single_line_relative_sensitivity", "T/sqrt(Hz)"),
        Column::new("ratio", ""),
    ]);
    let mut points = Vec::new();
    for &k in &c.kinds {
        points.extend(c.fwhm_mhz.iter().map(move |&f| (k, f)));
    }
    let rows = points
        .par_iter()
        .map(|&(k, fwhm)| {
            let (kind, name) = match k {
                LineKindName::Lorentzian => (LineKind::Lorentzian, "lorentzian"),
                LineKindName::Gaussian => (LineKind::Gaussian, "gaussian"),
            };
            let result = (|| {
                let single = AnalyticLine::new(kind, fwhm, c.contrast / 3.0, 0.0)?.closed_form_sensitivity(1.0)?;
                let ratio = hyperfine_ratio(kind, fwhm, c.contrast, c.splitting_mhz)?;
                Ok::<_, nv_odmr::OdmrError>(vec![Cell::Num(single), Cell::Num(ratio)])
            })()
            .map_err(|e| e.to_string());
            (vec![Cell::from(name), Cell::Num(fwhm), Cell::Num(c.splitting_mhz)], result)
        })
        .collect();
    fill(&mut table, rows);
    Ok(table)
}

/// Single-NV optimum: CW over `(s, Ω)`, or pulsed over `(Ω, t_L, τ)` at each `s`.
pub fn run_optimize(cfg: &RunConfig) -> Result<Table, ConfigError> {
    cfg.check_scenario(&[Scenario::CwSingle, Scenario::PulsedSingle])?;
    let c: &OptimizeConfig = section(&cfg.optimize, "optimize")?;
    c.validate()?;
    let rates = cfg.model.rates()?;
    let mut table = Table::new(pulsed_columns(&[Column::new("protocol", ""), Column::new("s", "")]));
    match c.protocol {
        ProtocolName::Cw => {
            let mut settings = CwOptimizeSettings::<f64>::default();
            if let Some(n) = c.coarse_points {
                settings.coarse_points = n;
            }
            match optimize_cw(&rates, c.t2star, c.epsilon, c.b, &settings) {
                Ok(o) => {
                    if let Some(w) = cw_validity_warning(o.s) {
                        push_warning(&mut table, w);
                    }
                    let nan = f64::NAN;
                    table.push(
                        vec![Cell::from("cw"), Cell::Num(o.s)],
                        Ok([o.omega, nan, nan, nan, nan, o.line.contrast, o.line.f0, o.line.fwhm, o.eta]
                            .into_iter()
                            .map(Cell::Num)
                            .collect()),
                    );
                }
                Err(e) => table.push(vec![Cell::from("cw"), Cell::Num(f64::NAN)], Err(e.to_string())),
            }
        }
        ProtocolName::Pulsed => {
            let rows = c
                .s
                .par_iter()
                .map(|&s| {
                    (
                        vec![Cell::from("pulsed"), Cell::Num(s)],
                        pulsed_optimum_row(&rates, c.t2star, c.t_w, c.epsilon, c.b, s, c.coarse_points),
                    )
                })
                .collect();
            fill(&mut table, rows);
        }
    }
    Ok(table)
}
