mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nash_core::NashError;

/// Semantic hashing: build corpora, train binary-code models, retrieve and
/// analyze.
#[derive(Debug, Parser)]
#[command(name = "nash", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration file (`key=value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for splits, initialization and sampling; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for the command's outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads. Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build vocabulary, TF-IDF features and a train/valid/test split.
    Build(commands::BuildArgs),
    /// Train a model (or a sweep over code lengths).
    Train(commands::TrainArgs),
    /// Write the binary code of every document.
    Encode(commands::EncodeArgs),
    /// Precision@K of query-split documents against the training split.
    Eval(commands::EvalArgs),
    /// Train and evaluate variants along architecture and noise axes.
    Ablate(commands::AblateArgs),
    /// Nearest words in the learned embedding space.
    Words(commands::WordsArgs),
    /// Write document codes with their labels.
    DumpCodes(commands::EncodeArgs),
    /// Rate/distortion table from a metrics log.
    RdCurve(commands::RdCurveArgs),
    /// Write a synthetic raw corpus.
    Synth(commands::SynthArgs),
}

fn exit_code(e: &NashError) -> u8 {
    match e {
        NashError::Diverged { .. } | NashError::NonFinite(_) => 3,
        NashError::Mismatch(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&NashError::Mismatch("x".into())), 4);
        assert_eq!(
            exit_code(&NashError::Diverged {
                epoch: 1,
                iter: 2,
                reason: "x".into()
            }),
            3
        );
        assert_eq!(exit_code(&NashError::Config("x".into())), 2);
    }
}
