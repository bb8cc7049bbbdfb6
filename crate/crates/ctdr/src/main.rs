use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ctdr::commands::{cmd_ablate, cmd_eval, cmd_synth, cmd_train};
use ctdr::config::ExperimentConfig;
use ctdr::files::report_json;
use ctdr::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "ctdr", version, about = "Contradistinguisher training for unsupervised domain adaptation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training seed, same as `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override one key, e.g. `--set combo=ss+tu`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train and write metrics, checkpoint and report.
    Train(Common),
    /// Evaluate a checkpoint on the configured target-test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Standardization transform; defaults to the one saved beside the checkpoint.
        #[arg(long)]
        standardizer: Option<PathBuf>,
        /// Also write the report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the loss-combination ladder and write a summary table.
    Ablate(Common),
    /// Write a synthetic domain pair as sparse text files.
    Synth(Common),
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for o in &common.overrides {
        config.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        config.train.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut stdout = io::stdout().lock();
    let mut stderr = io::stderr().lock();
    match cli.command {
        Command::Train(common) => {
            let outcome = cmd_train(&load_config(&common)?, &mut stdout, &mut stderr)?;
            let _ = writeln!(stderr, "target-test accuracy {:.4}", outcome.report.accuracy);
        }
        Command::Eval {
            common,
            checkpoint,
            standardizer,
            report,
        } => {
            let r = cmd_eval(&load_config(&common)?, &checkpoint, standardizer.as_deref(), &mut stderr)?;
            let json = report_json(&r);
            if let Some(path) = report {
                ctdr::files::write_bytes(&path, json.as_bytes())?;
            }
            stdout.write_all(json.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
        }
        Command::Ablate(common) => {
            cmd_ablate(&load_config(&common)?, &mut stdout, &mut stderr)?;
        }
        Command::Synth(common) => {
            for p in cmd_synth(&load_config(&common)?, &mut stdout)? {
                let _ = writeln!(stderr, "wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
