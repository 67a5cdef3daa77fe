use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use parabolic_lab::config::{load_config, ExperimentKind, Overrides, RawConfig};
use parabolic_lab::experiments::run_experiment;
use parabolic_lab::output::emit_outputs;
use parabolic_lab::workers::Workers;
use parabolic_lab::LabError;

/// Runs one experiment and writes its artifacts with a hashed manifest.
///
/// Exit codes: 0 success, 1 invalid configuration, 2 runtime failure,
/// 3 acceptance criteria failed.
#[derive(Parser, Debug)]
#[command(name = "parabolic-lab", version)]
struct Cli {
    /// TOML experiment description. Optional when `--kind acceptance`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    kind: Option<ExperimentKind>,
}

fn run(cli: &Cli) -> Result<bool, LabError> {
    let overrides = Overrides {
        seed: cli.seed,
        paths: cli.paths,
        kind: cli.kind,
    };
    let config = match &cli.config {
        Some(path) => load_config(path, &overrides)?,
        None => {
            let mut raw = RawConfig::default();
            raw.apply(&overrides);
            raw.validate()?
        }
    };
    let workers = Workers::new(cli.threads)?;
    let outcome = run_experiment(&config, &workers)?;
    if let Some(suite) = &outcome.suite {
        for c in &suite.criteria {
            println!("{}", c.line());
        }
    }
    let echo = serde_json::to_value(&config.raw).map_err(|e| LabError::Output(e.to_string()))?;
    let manifest = emit_outputs(&outcome.artifacts, &cli.out, config.kind.label(), config.seed, echo)?;
    eprintln!("wrote {}", manifest.display());
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
