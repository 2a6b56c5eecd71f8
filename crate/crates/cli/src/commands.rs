use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use apnea_core::detector::{Event, IntervalFit};
use apnea_core::io::{fmt_f64, read_annotation, read_complex_series, read_scalar_series, write_atomic, write_scalar_series};
use apnea_core::metrics::{default_threshold_grid, EvaluationOptions, EvaluationReport};
use apnea_core::pipeline::{envelope_from_echo, bandpass_respiration};
use apnea_core::{amplitude_envelope, detect as run_detection, evaluate as run_evaluation, generate_scenario, svg, sweep_bce, ScalarSeries};
use serde::Serialize;

use crate::config::{load_json, load_scenario, RunConfig, SweepConfig};
use crate::{CliError, InputKind};

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn write_text(text: &str, path: &Path) -> Result<(), CliError> {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn simulate(
    spec_path: &Path,
    out_displacement: &Path,
    out_truth: &Path,
    seed: Option<u64>,
    svg_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut spec = load_scenario(spec_path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let (displacement, truth) = generate_scenario(&spec)?;
    write_scalar_series(&displacement, out_displacement)?;
    write_scalar_series(&truth, out_truth)?;
    if let Some(p) = svg_path {
        let chart = svg::line_chart(
            "synthetic displacement",
            &[("displacement (mm)", vec![&displacement]), ("truth", vec![&truth])],
        );
        write_text(&chart, p)?;
    }
    println!(
        "wrote {} samples ({} s at {} Hz)",
        displacement.len(),
        displacement.duration(),
        displacement.sample_rate()
    );
    Ok(())
}

pub struct DetectArgs {
    pub input: PathBuf,
    pub input_kind: InputKind,
    pub config: Option<PathBuf>,
    pub out_labels: PathBuf,
    pub out_lbar: PathBuf,
    pub report: Option<PathBuf>,
    pub seed: Option<u64>,
    pub svg: Option<PathBuf>,
}

#[derive(Serialize)]
struct DetectReport<'a> {
    input: &'a Path,
    input_kind: &'a str,
    config: &'a RunConfig,
    sample_rate: f64,
    start_time: f64,
    duration_s: f64,
    interval_count: usize,
    event_count: usize,
    events_per_hour: f64,
    events: &'a [Event],
    intervals: &'a [IntervalFit],
}

fn load_envelope(args: &DetectArgs, cfg: &RunConfig) -> Result<ScalarSeries, CliError> {
    let filter = &cfg.detection.filter;
    let env = match args.input_kind {
        InputKind::Iq => {
            let echo = read_complex_series(&args.input, cfg.wavelength_mm)?;
            envelope_from_echo(&echo, filter)?
        }
        InputKind::Displacement => {
            let d = read_scalar_series(&args.input)?;
            let d = if cfg.bandpass_displacement {
                bandpass_respiration(&d, filter)?
            } else {
                d
            };
            amplitude_envelope(&d, filter)?
        }
        InputKind::Envelope => read_scalar_series(&args.input)?,
    };
    Ok(env)
}

pub fn detect(args: &DetectArgs) -> Result<(), CliError> {
    let mut cfg: RunConfig = match &args.config {
        Some(p) => load_json(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(seed) = cfg.seed {
        cfg.detection.em.seed = seed;
    }
    cfg.validate()?;

    let envelope = load_envelope(args, &cfg)?;
    let det = run_detection(&envelope, &cfg.detection)?;
    write_scalar_series(&det.labels, &args.out_labels)?;
    write_scalar_series(&det.lbar, &args.out_lbar)?;

    let duration = envelope.duration();
    let events_per_hour = det.events.len() as f64 / (duration / 3600.0);
    if let Some(p) = &args.report {
        let kind = match args.input_kind {
            InputKind::Iq => "iq",
            InputKind::Displacement => "displacement",
            InputKind::Envelope => "envelope",
        };
        let report = DetectReport {
            input: &args.input,
            input_kind: kind,
            config: &cfg,
            sample_rate: envelope.sample_rate(),
            start_time: envelope.start_time(),
            duration_s: duration,
            interval_count: det.grid.len(),
            event_count: det.events.len(),
            events_per_hour,
            events: &det.events,
            intervals: &det.fits,
        };
        write_json(&report, p)?;
    }
    if let Some(p) = &args.svg {
        let chart = svg::line_chart(
            "apnea detection",
            &[
                ("envelope (mm)", vec![&envelope]),
                ("averaged labels / final labels", vec![&det.lbar, &det.labels]),
            ],
        );
        write_text(&chart, p)?;
    }
    println!("{} event(s), {:.1} per hour", det.events.len(), events_per_hour);
    for e in &det.events {
        println!("  {:.1} s .. {:.1} s", e.start, e.end);
    }
    Ok(())
}

pub struct EvaluateArgs {
    pub labels: PathBuf,
    pub lbar: PathBuf,
    pub reference: PathBuf,
    pub optimize_threshold: bool,
    pub apnea_only: bool,
    pub min_duration: f64,
    pub report: PathBuf,
}

#[derive(Serialize)]
struct EvaluateOutput<'a> {
    labels: &'a Path,
    lbar: &'a Path,
    reference: &'a Path,
    recording_duration_s: f64,
    reference_events: usize,
    min_duration: f64,
    #[serde(flatten)]
    result: &'a EvaluationReport,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    if !(args.min_duration >= 0.0 && args.min_duration.is_finite()) {
        return Err(CliError::Validation(format!(
            "--min-duration must be non-negative, got {}",
            args.min_duration
        )));
    }
    let labels = read_scalar_series(&args.labels)?;
    let lbar = read_scalar_series(&args.lbar)?;
    let duration = labels.duration();
    let reference = read_annotation(&args.reference, duration)?;
    let opts = EvaluationOptions {
        include_hypopnea: !args.apnea_only,
        threshold_grid: args.optimize_threshold.then(default_threshold_grid),
        min_duration: args.min_duration,
    };
    let result = run_evaluation(&labels, Some(&lbar), &reference, &opts)?;
    let out = EvaluateOutput {
        labels: &args.labels,
        lbar: &args.lbar,
        reference: &args.reference,
        recording_duration_s: duration,
        reference_events: reference.counted(opts.include_hypopnea).count(),
        min_duration: args.min_duration,
        result: &result,
    };
    write_json(&out, &args.report)?;
    println!(
        "AHI est {:.2} / ref {:.2} (error {:.2}), F1 {:.3}",
        result.ahi_est, result.ahi_ref, result.ahi_error, result.f1
    );
    if let (Some(th), Some(f1)) = (result.optimal_threshold, result.optimal_f1) {
        println!("optimal threshold {th:.2}, F1 {f1:.3}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    spec_path: &Path,
    dm: &[f64],
    tm: &[f64],
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    svg_path: Option<&Path>,
) -> Result<(), CliError> {
    let mut spec = load_scenario(spec_path)?;
    let mut cfg: SweepConfig = match config {
        Some(p) => load_json(p)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = seed {
        spec.seed = seed;
        cfg.policy.em.seed = seed;
    }
    if let Some(v) = dm.iter().chain(tm).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(CliError::Validation(format!("sweep values must be positive, got {v}")));
    }
    let grid = sweep_bce(&spec, dm, tm, &cfg.policy)?;
    let mut csv = String::from("d_m,t_m,bce\n");
    for (i, d) in grid.d_m.iter().enumerate() {
        for (j, t) in grid.t_m.iter().enumerate() {
            let _ = writeln!(csv, "{},{},{}", fmt_f64(*d), fmt_f64(*t), fmt_f64(grid.get(i, j)));
        }
    }
    write_text(&csv, out)?;
    if let Some(p) = svg_path {
        let chart = svg::heatmap("BCE loss", "d_m (mm)", "T_m (s)", &grid.d_m, &grid.t_m, &grid.bce);
        write_text(&chart, p)?;
    }
    println!("{}x{} sweep written to {}", grid.d_m.len(), grid.t_m.len(), out.display());
    Ok(())
}
