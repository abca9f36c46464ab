use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use two_ion_cli::output::OutputFormat;
use two_ion_cli::{config, demo, output, run};

/// Deterministic two-ion crystal experiment simulator.
#[derive(Parser)]
#[command(name = "sim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for result files.
    #[arg(long)]
    out: PathBuf,
    /// Override the config's random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output variant: csv, structured, or both.
    #[arg(long, default_value = "both")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Excitation spectrum over a detuning grid.
    SpectrumScan(RunArgs),
    /// Carrier or sideband flopping versus pulse duration.
    RabiScan(RunArgs),
    /// Sequential multi-mode sideband cooling.
    CoolingSchedule(RunArgs),
    /// Free-heating delay sweep with a linear rate fit.
    HeatingScan(RunArgs),
    /// Photon-count histogram sampling and classification.
    HistogramRun(RunArgs),
    /// Cross-trap heating-rate normalization and distance scaling.
    HeatingAnalysis(RunArgs),
    /// Parse and validate a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the bundled demonstration configs and dataset.
    Demo {
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(expected_kind: &str, args: &RunArgs) -> Result<()> {
    let mut resolved = config::load(&args.config)
        .with_context(|| format!("loading {}", args.config.display()))?;
    let kind = resolved.experiment.kind();
    if kind != expected_kind {
        bail!(
            "config {} declares experiment kind `{kind}`, but the `{expected_kind}` subcommand was invoked",
            args.config.display()
        );
    }
    if let Some(seed) = args.seed {
        resolved.seed = seed;
        resolved.echo.seed = Some(seed);
    }
    let result = run::run(&resolved).context("running experiment")?;
    let written = output::emit(&result, args.format, &args.out)
        .with_context(|| format!("writing results to {}", args.out.display()))?;
    for note in &result.notes {
        println!("note: {note}");
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::SpectrumScan(args) => execute("spectrum_scan", args),
        Command::RabiScan(args) => execute("rabi_scan", args),
        Command::CoolingSchedule(args) => execute("cooling_schedule", args),
        Command::HeatingScan(args) => execute("heating_scan", args),
        Command::HistogramRun(args) => execute("histogram_run", args),
        Command::HeatingAnalysis(args) => execute("heating_analysis", args),
        Command::Validate { config: path } => {
            let resolved =
                config::load(path).with_context(|| format!("loading {}", path.display()))?;
            println!("valid: experiment kind `{}`", resolved.experiment.kind());
            println!("{}", config::echo_to_toml(&resolved.echo));
            Ok(())
        }
        Command::Demo { out } => {
            let written = demo::write_demo_files(out)
                .with_context(|| format!("writing demo files to {}", out.display()))?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}
