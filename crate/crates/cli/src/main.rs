use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand, ValueEnum};
use nv_odmr_cli::{metadata, write_output, ConfigError, Format, RunConfig, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(name = "nv-odmr", version, about = "NV-centre ODMR sensitivity sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML scenario file.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a config value, e.g. `--set cw.t2star=2.0`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Defaults to json for `.json` outputs, csv otherwise.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    threads: Option<usize>,
    /// Recorded in metadata; the models are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(ClapSubcommand)]
enum Command {
    /// CW line summary and sensitivity over saturation × Rabi frequency.
    CwSweep(RunArgs),
    /// Pulsed summaries at fixed timings, or optimal timings per saturation.
    PulsedSweep(RunArgs),
    /// Optimal ensemble sensitivities over waist × power × background.
    Ensemble(RunArgs),
    /// Hyperfine-triplet sensitivity penalty versus linewidth.
    Hyperfine(RunArgs),
    /// Single-NV optimum for the CW or pulsed protocol.
    Optimize(RunArgs),
    /// Parse and validate a config, printing its resolved form and hash.
    ValidateConfig(ConfigArgs),
}

fn fail(kind: &str, detail: serde_json::Value, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "detail": detail } }));
    ExitCode::from(code)
}

fn config_failure(e: &ConfigError) -> ExitCode {
    fail("config", serde_json::to_value(e).unwrap_or_default(), 2)
}

fn load(args: &ConfigArgs) -> Result<RunConfig, ConfigError> {
    let cfg = RunConfig::from_path(&args.config, &args.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (sub, args) = match cli.command {
        Command::CwSweep(a) => (Subcommand::CwSweep, a),
        Command::PulsedSweep(a) => (Subcommand::PulsedSweep, a),
        Command::Ensemble(a) => (Subcommand::Ensemble, a),
        Command::Hyperfine(a) => (Subcommand::Hyperfine, a),
        Command::Optimize(a) => (Subcommand::Optimize, a),
        Command::ValidateConfig(a) => {
            return match load(&a) {
                Ok(cfg) => {
                    println!("{}", json!({ "valid": true, "config_sha256": cfg.hash(), "resolved_config": cfg.resolved_toml() }));
                    ExitCode::SUCCESS
                }
                Err(e) => config_failure(&e),
            };
        }
    };
    let cfg = match load(&args.config) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        return fail("runtime", json!(e.to_string()), 1);
    }
    let table = match sub.run(&cfg) {
        Ok(t) => t,
        Err(e) => return config_failure(&e),
    };
    if let Some(first) = table.errors.first() {
        log::warn!(
            "{} row(s) failed, recorded in metadata; first, row {}: {}",
            table.errors.len(),
            first.row,
            first.message
        );
    }
    let format = match args.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => Format::infer(args.output.as_deref()),
    };
    let meta = metadata(sub, &cfg, &table, threads, args.seed);
    match write_output(&table, &meta, format, args.output.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("io", json!(e.to_string()), 1),
    }
}
