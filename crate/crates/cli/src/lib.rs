//! Batch driver for the `nv-odmr` models: TOML scenario files in, deterministic
//! CSV or JSON tables out.

pub mod config;
pub mod run;
pub mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use config::{ConfigError, RunConfig};
pub use table::{Cell, Column, Metadata, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CwSweep,
    PulsedSweep,
    Ensemble,
    Hyperfine,
    Optimize,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CwSweep => "cw-sweep",
            Subcommand::PulsedSweep => "pulsed-sweep",
            Subcommand::Ensemble => "ensemble",
            Subcommand::Hyperfine => "hyperfine",
            Subcommand::Optimize => "optimize",
        }
    }

    pub fn run(self, cfg: &RunConfig) -> Result<Table, ConfigError> {
        match self {
            Subcommand::CwSweep => run::run_cw_sweep(cfg),
            Subcommand::PulsedSweep => run::run_pulsed_sweep(cfg),
            Subcommand::Ensemble => run::run_ensemble(cfg),
            Subcommand::Hyperfine => run::run_hyperfine(cfg),
            Subcommand::Optimize => run::run_optimize(cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for `*.json` paths, CSV otherwise.
    pub fn infer(path: Option<&Path>) -> Self {
        match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub fn metadata(sub: Subcommand, cfg: &RunConfig, table: &Table, threads: usize, seed: Option<u64>) -> Metadata {
    Metadata {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: sub.name().to_string(),
        config_sha256: cfg.hash(),
        resolved_config: cfg.resolved_toml(),
        generated_at: chrono::Utc::now().to_rfc3339(),
        threads,
        seed,
        columns: table.columns.clone(),
        warnings: table.warnings.clone(),
        errors: table.errors.clone(),
    }
}

/// `<output>.meta.json`, the CSV sidecar.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes the table to `output` (stdout when `None`). CSV files get a metadata
/// sidecar; CSV on stdout carries no metadata.
pub fn write_output(table: &Table, meta: &Metadata, format: Format, output: Option<&Path>) -> io::Result<()> {
    let mut sink: Box<dyn Write> = match output {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match format {
        Format::Csv => {
            table::write_csv(table, &mut sink)?;
            if let Some(p) = output {
                let side = BufWriter::new(File::create(sidecar_path(p))?);
                serde_json::to_writer_pretty(side, meta)?;
            }
        }
        Format::Json => table::write_json(table, meta, &mut sink)?,
    }
    sink.flush()
}
