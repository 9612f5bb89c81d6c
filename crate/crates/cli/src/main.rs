mod commands;
mod config;
mod failure;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, RunConfig};
use failure::{CliResult, ExitClass, Failure};
use manifest::Manifest;

/// Severity-of-risk classification of user post histories.
#[derive(Debug, Parser)]
#[command(name = "srisk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print corpus statistics.
    Stats {
        #[command(flatten)]
        common: CommonArgs,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Add `normalized_text` to JSONL records.
    Normalize {
        #[command(flatten)]
        common: CommonArgs,
        /// JSONL input, or `-` for stdin.
        #[arg(long, default_value = "-")]
        input: PathBuf,
        /// JSONL output, or `-` for stdout.
        #[arg(long, default_value = "-")]
        output: PathBuf,
    },
    /// Train a model on the whole dataset and write `model.json`.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Predict user labels with a trained model.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
    },
    /// Stratified k-fold cross-validation.
    Cv {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the sixteen ablation experiments.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Inter-annotator agreement from an annotation matrix.
    Agreement {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        annotations: PathBuf,
    },
    /// ROC tables and plots from saved cross-validation results.
    Roc {
        #[command(flatten)]
        common: CommonArgs,
        /// `cv.json` from a previous run; repeatable.
        #[arg(long = "cv", value_name = "FILE")]
        cv: Vec<PathBuf>,
    },
    /// Valence and happiness scores per severity class.
    Diagnostics {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_name = "FILE")]
        valence: PathBuf,
        #[arg(long, value_name = "FILE")]
        happiness: PathBuf,
    },
    /// Repeat the run recorded in a manifest and verify its output hashes.
    Rerun {
        #[arg(long, value_name = "FILE")]
        manifest: PathBuf,
        /// Where to write the repeated run; defaults to the recorded directory.
        #[arg(long, short = 'o', value_name = "DIR")]
        output_dir: Option<PathBuf>,
    },
}

/// Runs one command. Commands that write artifacts return their manifest.
fn dispatch(command: Command, argv: &[String]) -> CliResult<Option<Manifest>> {
    let cfg = |c: &CommonArgs| RunConfig::resolve(c);
    Ok(match command {
        Command::Stats { common, json } => {
            commands::stats(&cfg(&common)?, json)?;
            None
        }
        Command::Normalize { common, input, output } => {
            commands::normalize(&cfg(&common)?, &input, &output)?;
            None
        }
        Command::Train { common } => Some(commands::train(&cfg(&common)?, argv)?),
        Command::Predict { common, model } => Some(commands::predict(&cfg(&common)?, argv, &model)?),
        Command::Cv { common } => Some(commands::cv(&cfg(&common)?, argv)?),
        Command::Ablate { common } => Some(commands::ablate(&cfg(&common)?, argv)?),
        Command::Agreement { common, annotations } => Some(commands::agreement(&cfg(&common)?, argv, &annotations)?),
        Command::Roc { common, cv } => Some(commands::roc(&cfg(&common)?, argv, &cv)?),
        Command::Diagnostics {
            common,
            valence,
            happiness,
        } => Some(commands::diagnostics(&cfg(&common)?, argv, &valence, &happiness)?),
        Command::Rerun { manifest, output_dir } => {
            rerun(&manifest, output_dir)?;
            None
        }
    })
}

/// Drops any output-directory flag from a recorded argument vector.
fn strip_output_dir(argv: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "-o" || a == "--output-dir" {
            it.next();
        } else if !a.starts_with("--output-dir=") && !(a.starts_with("-o") && a.len() > 2 && !a.starts_with("--")) {
            out.push(a.clone());
        }
    }
    out
}

fn rerun(path: &std::path::Path, output_dir: Option<PathBuf>) -> CliResult<()> {
    commands::require_file(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    let recorded: Manifest =
        serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: not a manifest: {e}", path.display())))?;
    let mut argv = recorded.argv.clone();
    if let Some(dir) = output_dir {
        argv = strip_output_dir(&argv);
        argv.push("--output-dir".into());
        argv.push(dir.display().to_string());
    } else if let Some(dir) = &recorded.config.output_dir {
        argv = strip_output_dir(&argv);
        argv.push("--output-dir".into());
        argv.push(dir.display().to_string());
    }
    let cli = Cli::try_parse_from(std::iter::once("srisk".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| Failure::data(format!("recorded arguments no longer parse: {e}")))?;
    if matches!(cli.command, Command::Rerun { .. }) {
        return Err(Failure::data("a manifest cannot record a rerun"));
    }
    let fresh = dispatch(cli.command, &recorded.argv)?
        .ok_or_else(|| Failure::data(format!("command `{}` writes no manifest", recorded.command)))?;
    let mismatched: Vec<&String> = recorded
        .outputs
        .iter()
        .filter(|(name, hash)| fresh.outputs.get(*name) != Some(*hash))
        .map(|(name, _)| name)
        .chain(fresh.outputs.keys().filter(|n| !recorded.outputs.contains_key(*n)))
        .collect();
    if !mismatched.is_empty() {
        let names: Vec<&str> = mismatched.iter().map(|s| s.as_str()).collect();
        return Err(Failure::new(
            ExitClass::Internal,
            anyhow::anyhow!("rerun outputs differ: {}", names.join(", ")),
        ));
    }
    eprintln!("rerun reproduced {} outputs", fresh.outputs.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<OsString> = std::env::args_os().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitClass::Usage.into()
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &argv) {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            f.class.into()
        }
    }
}
