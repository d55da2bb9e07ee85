use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use blockev_cli::config::{Command, ExperimentConfig, FileConfig, CONFIG_HELP};
use blockev_cli::experiment::run;
use blockev_cli::CliError;
use clap::Parser;

#[derive(Parser, Debug)]
#[command(name = "blockev", version, about = "Seeded expectation-value estimation experiments", after_help = CONFIG_HELP)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Trial seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Output path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trials per eps value [default: 100]
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated eps values [default: per command, see below]
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
}

fn resolve(args: Args) -> Result<ExperimentConfig, CliError> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut cfg = ExperimentConfig::from_file(args.command, file)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(e) = args.eps {
        cfg.eps = e;
    }
    if let Some(o) = args.out {
        cfg.output = Some(o);
    }
    Ok(cfg)
}

fn execute(args: Args) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let text = run(&cfg)?.render()?;
    match &cfg.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
