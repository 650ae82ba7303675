//! `kineme`: learn head-motion codebooks from OpenFace CSVs and train,
//! evaluate and explain trait predictors on top of them.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kineme::pipeline::ModelKind;
use kineme::ErrorClass;

mod commands;
mod data;
mod plot;

#[derive(Parser, Debug)]
#[command(name = "kineme", version, about = "Kineme learning and trait prediction from head-pose tracks")]
pub struct Cli {
    /// Pipeline configuration (JSON); missing sections take defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed applied to every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving all outputs.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Learn a kineme codebook from every video in a manifest.
    Learn {
        #[arg(long)]
        manifest: PathBuf,
        /// Number of kinemes (overrides the config).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Encode every video into a kineme sequence.
    Encode {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
    },
    /// Per-window dominant action units of every video.
    Aus {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Characteristic kinemes and AUs of the highest and lowest scoring videos.
    Explain {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        codebook: PathBuf,
        /// Traits to explain; all manifest traits when omitted.
        #[arg(long = "trait")]
        traits: Vec<String>,
        /// Percentile p: top and bottom p% of videos.
        #[arg(long)]
        percentile: Option<f64>,
    },
    /// Train one model on the manifest's training split.
    Train(TrainArgs),
    /// Late fusion of kineme and AU predictions, weight chosen on validation rows.
    Fuse {
        /// Predictions of the kineme model (from `eval`).
        #[arg(long)]
        kin: PathBuf,
        /// Predictions of the AU model (from `eval`).
        #[arg(long)]
        au: PathBuf,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
    },
    /// Predict with a trained model, or score an existing predictions file.
    Eval {
        #[arg(long, conflicts_with = "predictions", requires_all = ["manifest", "codebook"])]
        model: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
    },
    /// Repeated k-fold cross-validation at video level.
    Crossval {
        #[arg(long)]
        manifest: PathBuf,
        /// Codebook to encode with; learned from the whole manifest when omitted.
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long = "trait")]
        traits: Vec<String>,
        /// Models to compare (hmm, lstm_kin, lstm_au, lstm_ff, lstm_df, pca_linreg, constant).
        #[arg(long = "model", value_parser = parse_model)]
        models: Vec<ModelKind>,
        #[arg(long, value_enum)]
        task: Option<TaskArg>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Thin-slice length in seconds; whole videos when omitted.
        #[arg(long)]
        chunk_s: Option<f64>,
    },
    /// Generate a synthetic corpus with a planted kineme vocabulary.
    Synth {
        #[arg(long)]
        videos: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Pose noise, radians.
        #[arg(long)]
        sigma: Option<f64>,
        /// Video length, seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Write kineme trajectories as CSV and SVG (degrees).
    Plot {
        #[arg(long)]
        codebook: PathBuf,
    },
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long = "trait")]
    pub trait_name: String,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Input streams of the LSTM.
    #[arg(long, value_enum, default_value = "kin")]
    pub inputs: InputsArg,
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,
    /// Thin-slice length in seconds; whole videos when omitted.
    #[arg(long)]
    pub chunk_s: Option<f64>,
    /// Output file name inside the output directory.
    #[arg(long, default_value = "model.json")]
    pub output: String,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelArg {
    Hmm,
    Lstm,
    Pca,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputsArg {
    Kin,
    Au,
    Ff,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskArg {
    Classification,
    Regression,
}

impl From<TaskArg> for kineme::analytics::Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Classification => kineme::analytics::Task::Classification,
            TaskArg::Regression => kineme::analytics::Task::Regression,
        }
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: kineme::Error| e.to_string())
}

/// A command line that parsed but cannot be carried out as given.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<kineme::Error>().map(kineme::Error::class) {
        Some(ErrorClass::Numerical) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let numerical = anyhow::Error::from(kineme::Error::Numerical("nan".into())).context("fitting");
        assert_eq!(exit_code(&numerical), EXIT_NUMERICAL);
        assert_eq!(exit_code(&kineme::Error::EmptyInput.into()), EXIT_DATA);
        assert_eq!(exit_code(&UsageError("x".into()).into()), EXIT_USAGE);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_DATA);
    }
}
