use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use afclab_cli::{run_experiment, ExperimentConfig, Kind};

/// Feedback-code experiments: PER sweeps, pipeline latency, coverage,
/// training, gradient checks and complexity accounting.
#[derive(Debug, Parser)]
#[command(name = "afclab", version)]
struct Args {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set latency.rounds=9`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; takes precedence over `output_dir` and
    /// AFCLAB_OUTPUT_DIR.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = ExperimentConfig::load(args.kind, args.config.as_deref(), &args.overrides)
        .and_then(|cfg| run_experiment(&cfg, args.output_dir.as_deref()));
    match result {
        Ok(out) => {
            println!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("afclab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
