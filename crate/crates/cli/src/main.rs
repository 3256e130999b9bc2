//! `volrelax`: relaxation analysis of large volatility events.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 fit failure.

mod analyze;
mod config;
mod error;
mod output;
mod plot;
mod synth;
mod validate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::config::AnalysisConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "volrelax", version, about = "Volatility relaxation around large fluctuations")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Curves, fits and summary tables from a price file.
    Analyze(AnalyzeArgs),
    /// Synthetic prices from a JSON generator spec.
    Synth(SynthArgs),
    /// Log-log SVG plots from curve files or output directories.
    Plot(PlotArgs),
    /// Check a price file (and calendar) without analysing it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Flat key = value settings; flags override them.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Price CSV (timestamp,price).
    #[arg(long)]
    input: Option<String>,
    /// Minutes per bar; 0 for daily data.
    #[arg(long)]
    bar_interval: Option<String>,
    /// Divide out the intraday pattern.
    #[arg(long)]
    detrend: bool,
    /// Drop overnight returns from averages and event selection.
    #[arg(long)]
    exclude_overnight: bool,
    /// Threshold multipliers, ascending (default 2,4,6,8).
    #[arg(long)]
    zeta: Option<String>,
    /// Largest lag in bars (default 1000 minute / 100 daily).
    #[arg(long)]
    tmax: Option<String>,
    /// Exogenous-event calendar CSV (date,origin,note).
    #[arg(long)]
    calendar: Option<String>,
    /// Event filters: all, crash, rally, endogenous, exogenous.
    #[arg(long)]
    filter: Option<String>,
    /// Full-model fit window lo:hi.
    #[arg(long)]
    fit_window: Option<String>,
    /// Tail-slope window lo:hi (default upper half-decade).
    #[arg(long)]
    tail_window: Option<String>,
    /// Bootstrap replicates (0 disables errors and KS).
    #[arg(long)]
    bootstrap: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<String>,
    /// Also emit exceedance counts N(t) at this multiplier.
    #[arg(long)]
    zeta1: Option<String>,
    /// Write the intraday pattern to pattern.tsv.
    #[arg(long)]
    emit_pattern: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// JSON generator spec.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Base name of the CSV and JSON sidecar.
    #[arg(long, default_value = "synthetic")]
    name: String,
    /// Overrides the spec's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Curve TSVs or directories holding them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    bar_interval: u32,
    #[arg(long)]
    calendar: Option<PathBuf>,
}

fn analysis_config(args: &AnalyzeArgs) -> CliResult<AnalysisConfig> {
    let mut cfg = AnalysisConfig::default();
    if let Some(path) = &args.config {
        cfg.load_file(path)?;
    }
    let flags = [
        ("input", &args.input),
        ("bar_interval", &args.bar_interval),
        ("zeta", &args.zeta),
        ("tmax", &args.tmax),
        ("calendar", &args.calendar),
        ("filter", &args.filter),
        ("fit_window", &args.fit_window),
        ("tail_window", &args.tail_window),
        ("bootstrap", &args.bootstrap),
        ("seed", &args.seed),
        ("out", &args.out),
        ("workers", &args.workers),
        ("zeta1", &args.zeta1),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v, None)?;
        }
    }
    cfg.detrend |= args.detrend;
    cfg.exclude_overnight |= args.exclude_overnight;
    cfg.emit_pattern |= args.emit_pattern;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze(args) => {
            let cfg = analysis_config(&args)?;
            let outcome = analyze::run(&cfg)?;
            print!("{}", outcome.table);
            let failures = outcome.failures();
            if failures > 0 {
                return Err(CliError::Fit(format!(
                    "{failures} of {} fits failed or hit a search bound; see {}",
                    outcome.reports.len(),
                    cfg.out.join("summary.tsv").display()
                )));
            }
            info!("wrote {} fit reports to {}", outcome.reports.len(), cfg.out.display());
        }
        Command::Synth(args) => {
            let (csv, sidecar) = synth::run(&args.spec, &args.out, &args.name, args.seed)?;
            println!("{}\n{}", csv.display(), sidecar.display());
        }
        Command::Plot(args) => {
            for path in plot::run(&args.inputs, &args.out)? {
                println!("{}", path.display());
            }
        }
        Command::Validate(args) => {
            print!("{}", validate::run(&args.input, args.bar_interval, args.calendar.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
