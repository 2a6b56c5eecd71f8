//! `apnea` command-line tool.
//!
//! Exit status: 0 on success, 1 on invalid input or configuration, 2 on
//! filesystem errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl From<apnea_core::Error> for CliError {
    fn from(e: apnea_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "apnea", version, about = "Radar-based sleep apnea detection by overlapping-interval EM labelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    /// `time_s,i,q` complex echo; unwrapped, bandpassed and enveloped.
    Iq,
    /// `time_s,value` respiratory displacement in mm.
    Displacement,
    /// `time_s,value` amplitude envelope in mm, used as is.
    Envelope,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic displacement scenario and its truth labels.
    #[command(after_help = config::SCENARIO_HELP)]
    Simulate {
        /// Scenario JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_displacement: PathBuf,
        #[arg(long)]
        out_truth: PathBuf,
        /// Noise seed; overrides the scenario's `seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Optional SVG plot of displacement and truth.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Detect apnea events in a recording.
    #[command(after_help = config::DETECT_CONFIG_HELP)]
    Detect {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputKind::Displacement)]
        input_kind: InputKind,
        /// Run configuration JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Final binary labels CSV.
        #[arg(long)]
        out_labels: PathBuf,
        /// Averaged labels CSV.
        #[arg(long)]
        out_lbar: PathBuf,
        /// JSON report with events, per-interval fits and the config used.
        #[arg(long)]
        report: Option<PathBuf>,
        /// EM restart seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Optional SVG plot of envelope and labels.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Score detections against a reference annotation.
    Evaluate {
        /// Final binary labels CSV from `detect`.
        #[arg(long)]
        labels: PathBuf,
        /// Averaged labels CSV from `detect`.
        #[arg(long)]
        lbar: PathBuf,
        /// Annotation CSV `start_s,end_s,type` (OSA, CSA, MSA, HYP).
        #[arg(long)]
        reference: PathBuf,
        /// Also search thresholds 0.00..=1.00 (step 0.01) for the best F1.
        #[arg(long)]
        optimize_threshold: bool,
        /// Count only apneas (not hypopneas) as reference events.
        #[arg(long)]
        apnea_only: bool,
        /// Minimum event duration used when re-thresholding, s.
        #[arg(long, default_value_t = 10.0)]
        min_duration: f64,
        #[arg(long)]
        report: PathBuf,
    },
    /// BCE of per-interval EM memberships over a grid of movement amplitudes and durations.
    #[command(after_help = config::SWEEP_CONFIG_HELP)]
    Sweep {
        /// Base scenario JSON containing at least one movement segment.
        #[arg(long)]
        spec: PathBuf,
        /// Movement amplitudes in mm, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        dm: Vec<f64>,
        /// Movement durations in s, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        tm: Vec<f64>,
        /// CSV `d_m,t_m,bce`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Noise and EM seed; overrides the scenario and config.
        #[arg(long)]
        seed: Option<u64>,
        /// Optional SVG heatmap.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            spec,
            out_displacement,
            out_truth,
            seed,
            svg,
        } => commands::simulate(&spec, &out_displacement, &out_truth, seed, svg.as_deref()),
        Command::Detect {
            input,
            input_kind,
            config,
            out_labels,
            out_lbar,
            report,
            seed,
            svg,
        } => commands::detect(&commands::DetectArgs {
            input,
            input_kind,
            config,
            out_labels,
            out_lbar,
            report,
            seed,
            svg,
        }),
        Command::Evaluate {
            labels,
            lbar,
            reference,
            optimize_threshold,
            apnea_only,
            min_duration,
            report,
        } => commands::evaluate(&commands::EvaluateArgs {
            labels,
            lbar,
            reference,
            optimize_threshold,
            apnea_only,
            min_duration,
            report,
        }),
        Command::Sweep {
            spec,
            dm,
            tm,
            out,
            config,
            seed,
            svg,
        } => commands::sweep(&spec, &dm, &tm, &out, config.as_deref(), seed, svg.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
