use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Prosody analysis, comparison and correction for paired human/TTS speech.
#[derive(Debug, Parser)]
#[command(name = "prosody", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct AnalysisArgs {
    /// Frame period in milliseconds.
    #[arg(long, default_value_t = 5.0)]
    frame_period: f64,
    /// Lowest F0 searched, Hz.
    #[arg(long, default_value_t = 71.0)]
    f0_floor: f64,
    /// Highest F0 searched, Hz.
    #[arg(long, default_value_t = 800.0)]
    f0_ceil: f64,
    /// Analysis FFT size.
    #[arg(long, default_value_t = 1024)]
    fft_size: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract F0, energy, envelope and aperiodicity to a JSON feature file.
    Analyze {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Measure pitch, duration and energy discrepancies of a human/TTS pair.
    Compare {
        human: PathBuf,
        tts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Fit the global correction on a corpus manifest.
    Train {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss table; defaults to <out>.loss.csv.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 40)]
        steps_per_epoch: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        /// Pitch, duration and energy loss weights.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0, 1.0, 1.0])]
        weights: Vec<f64>,
        /// Hz normalizer of the pitch term.
        #[arg(long, default_value_t = 100.0)]
        f0_scale: f64,
        /// Check the result against the grid-search optimum.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Manipulate and resynthesize one TTS file.
    Apply {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Trained model; flags below override its fields.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        pitch_shift: Option<f64>,
        #[arg(long, allow_hyphen_values = true, conflicts_with = "pitch_shift")]
        pitch_semitones: Option<f64>,
        #[arg(long)]
        duration_ratio: Option<f64>,
        /// Multiplier on envelope power.
        #[arg(long)]
        energy_scale: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Correct every TTS file of a corpus and write a before/after summary.
    Batch {
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        analysis: AnalysisArgs,
    },
    /// Export F0 and envelope comparison tables for plotting.
    Report {
        features_a: PathBuf,
        features_b: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate the synthetic paired corpus.
    Fixture {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        pairs: usize,
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        pitch_offset: f64,
        #[arg(long, default_value_t = 1.0 / 0.85)]
        duration_factor: f64,
        #[arg(long, default_value_t = 0.8)]
        energy_factor: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 3 } else { 2 })
        }
    }
}
