//! Command-line driver tying the toolkit stages together: feature
//! extraction, acoustic training, alignment export, neural training with
//! optional-silence lattices, decoding, evaluation and synthetic corpus
//! generation.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stream {
    Acoustic,
    Neural,
}

#[derive(Parser, Debug)]
#[command(
    name = "phonekit",
    about = "Dual-stream phone recognition toolkit",
    version,
    disable_help_subcommand = true
)]
pub struct Cli {
    /// Flat key-value config file; flags override file values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed (overrides the config value).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Extra config overrides, repeatable: --set key=value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Extract features: WAV → 39-dim MFCC+Δ+ΔΔ, or multichannel
    /// recordings → 144-dim neural features at 100 Hz.
    Features {
        #[arg(long, value_enum)]
        stream: Stream,
        /// Input audio (.wav) or neural (.nrc/.csv) files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Fit the neural front-end (PCA/Varimax/NMF) on these inputs and
        /// save it alongside the features.
        #[arg(long)]
        fit: bool,
        /// Apply an already-fitted neural front-end container.
        #[arg(long)]
        neural_model: Option<PathBuf>,
        /// Also dump the per-channel log high-gamma envelopes as FTR1
        /// files for inspection (neural stream only).
        #[arg(long)]
        dump_envelopes: bool,
    },
    /// Train the acoustic GMM/HMM (+ DNN hybrid) and the biphone LM.
    TrainAsr {
        /// Data directory: `<id>.acoustic.ftr`, `<id>.txt`, optional
        /// `<id>.acoustic.ali` for timed initialization.
        #[arg(long)]
        data: PathBuf,
        /// File listing training utterance ids (default: all in --data).
        #[arg(long)]
        list: Option<PathBuf>,
    },
    /// Export frame-state alignments of a trained system to transfer to
    /// the other stream.
    Align {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        list: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "acoustic")]
        stream: Stream,
    },
    /// Train the neural-stream GMM/HMM (+ DNN hybrid) from transferred
    /// alignments, with optional-silence training lattices.
    TrainNsr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        list: Option<PathBuf>,
        /// Directory of transferred alignments (from `phonekit align`).
        #[arg(long)]
        alignments: PathBuf,
    },
    /// Decode feature files with a trained system and the biphone LM.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        list: Option<PathBuf>,
        #[arg(long, value_enum)]
        stream: Stream,
    },
    /// Score hypotheses against references, or run the full synthetic
    /// cross-validation experiment with --cv.
    Evaluate {
        /// Run the 8-cut Monte Carlo cross-validation on a synthetic
        /// corpus and write the report files.
        #[arg(long)]
        cv: bool,
        /// Reference transcription directory (`<id>.txt`).
        #[arg(long)]
        refs: Option<PathBuf>,
        /// Hypothesis directory (`<id>.hyp`).
        #[arg(long)]
        hyps: Option<PathBuf>,
        #[arg(long)]
        list: Option<PathBuf>,
    },
    /// Generate a synthetic paired corpus (features, transcripts and
    /// ground-truth alignments).
    Synth {
        /// Number of utterances (default from config).
        #[arg(long)]
        n: Option<usize>,
    },
}

pub enum CliError {
    Usage(String),
    Tool(phonekit::Error),
}

impl From<phonekit::Error> for CliError {
    fn from(e: phonekit::Error) -> Self {
        CliError::Tool(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help/version requests are not usage errors.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match stages::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Tool(e)) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
