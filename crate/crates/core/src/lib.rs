//! Apnea detection from radar respiratory displacement.
//!
//! The chain runs echo → displacement → bandpassed displacement → RMS
//! envelope, then fits a two-component Gaussian mixture to the envelope in
//! every overlapping analysis interval. Per-interval apnea labels are
//! averaged into a probability track, thresholded and cleaned of short
//! runs. [`synth`] builds synthetic scenarios and [`metrics`] scores
//! detections against reference annotations.

pub mod detector;
pub mod error;
pub mod gmm;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod series;
pub mod svg;
pub mod synth;

pub use detector::{
    average_labels, binarize, build_intervals, detect, enforce_min_duration, Detection, DetectionConfig, Event,
    Interval, IntervalConfig, IntervalGrid, IntervalLabels,
};
pub use error::{Error, Result};
pub use gmm::{fit_gmm_em, temporary_labels, EmConfig, GmmFit, LabelRuleConfig, Responsibilities};
pub use metrics::{
    ahi, evaluate, f1_score, optimize_threshold, type_threshold_correlation, ApneaType, EvaluationOptions,
    EvaluationReport, F1Score, ReferenceAnnotation,
};
pub use num_complex::Complex64;
pub use pipeline::{amplitude_envelope, bandpass_respiration, extract_displacement, FilterConfig};
pub use series::{wavelength_mm, ComplexEchoSeries, ScalarSeries};
pub use synth::{bce_loss, generate_scenario, sweep_bce, ScenarioSpec, Segment, SegmentKind, SweepGrid, SweepPolicy};
