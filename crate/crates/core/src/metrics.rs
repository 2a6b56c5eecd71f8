//! Evaluation against reference annotations: AHI, sample-level F1,
//! per-recording threshold optimisation and apnea-type correlation.

use serde::{Deserialize, Serialize};

use crate::detector::{binarize, enforce_min_duration};
use crate::error::{Error, Result};
use crate::series::{check_binary, runs_of_ones, ScalarSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApneaType {
    #[serde(rename = "OSA")]
    Obstructive,
    #[serde(rename = "CSA")]
    Central,
    #[serde(rename = "MSA")]
    Mixed,
    #[serde(rename = "HYP")]
    Hypopnea,
}

impl ApneaType {
    pub const ALL: [ApneaType; 4] = [
        ApneaType::Obstructive,
        ApneaType::Central,
        ApneaType::Mixed,
        ApneaType::Hypopnea,
    ];

    pub fn code(self) -> &'static str {
        match self {
            ApneaType::Obstructive => "OSA",
            ApneaType::Central => "CSA",
            ApneaType::Mixed => "MSA",
            ApneaType::Hypopnea => "HYP",
        }
    }

    pub fn from_code(code: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.code() == code)
            .ok_or_else(|| Error::UnknownType(code.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedEvent {
    pub start: f64,
    pub end: f64,
    #[serde(rename = "type")]
    pub kind: ApneaType,
}

/// Scored events of one recording, sorted and non-overlapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceAnnotation {
    pub events: Vec<AnnotatedEvent>,
    /// Seconds.
    pub recording_duration: f64,
}

impl ReferenceAnnotation {
    pub fn new(mut events: Vec<AnnotatedEvent>, recording_duration: f64) -> Result<Self> {
        if !(recording_duration > 0.0 && recording_duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "recording duration must be positive, got {recording_duration}"
            )));
        }
        events.sort_by(|a, b| a.start.total_cmp(&b.start));
        for e in &events {
            if !(e.start.is_finite() && e.end.is_finite() && e.start < e.end) {
                return Err(Error::InvalidSeries(format!("event [{}, {}) is empty or reversed", e.start, e.end)));
            }
            if e.start < 0.0 || e.end > recording_duration + 1e-9 {
                return Err(Error::InvalidSeries(format!(
                    "event [{}, {}) lies outside the recording [0, {recording_duration}]",
                    e.start, e.end
                )));
            }
        }
        for w in events.windows(2) {
            if w[1].start < w[0].end {
                return Err(Error::Overlap(w[0].start, w[0].end, w[1].start, w[1].end));
            }
        }
        Ok(Self {
            events,
            recording_duration,
        })
    }

    /// Events counted toward the index; hypopneas optional.
    pub fn counted(&self, include_hypopnea: bool) -> impl Iterator<Item = &AnnotatedEvent> {
        self.events
            .iter()
            .filter(move |e| include_hypopnea || e.kind != ApneaType::Hypopnea)
    }

    /// Reference events per hour.
    pub fn ahi(&self, include_hypopnea: bool) -> f64 {
        self.counted(include_hypopnea).count() as f64 / (self.recording_duration / 3600.0)
    }

    /// Binary track with sample `i` set when `start ≤ t_i < end` for some event.
    pub fn rasterize(&self, sample_rate: f64, n_samples: usize, include_hypopnea: bool) -> Result<ScalarSeries> {
        let mut v = vec![0.0; n_samples];
        for e in self.counted(include_hypopnea) {
            let a = ((e.start * sample_rate - 1e-9).ceil().max(0.0) as usize).min(n_samples);
            let b = ((e.end * sample_rate - 1e-9).ceil().max(0.0) as usize).min(n_samples);
            v[a..b].fill(1.0);
        }
        ScalarSeries::new(v, sample_rate, 0.0)
    }

    /// Share of each type among all events; zero everywhere without events.
    pub fn type_proportions(&self) -> TypeProportions {
        let total = self.events.len() as f64;
        let share = |t| {
            if total == 0.0 {
                0.0
            } else {
                self.events.iter().filter(|e| e.kind == t).count() as f64 / total
            }
        };
        TypeProportions {
            osa: share(ApneaType::Obstructive),
            csa: share(ApneaType::Central),
            msa: share(ApneaType::Mixed),
            hypopnea: share(ApneaType::Hypopnea),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TypeProportions {
    pub osa: f64,
    pub csa: f64,
    pub msa: f64,
    pub hypopnea: f64,
}

impl TypeProportions {
    pub fn get(&self, t: ApneaType) -> f64 {
        match t {
            ApneaType::Obstructive => self.osa,
            ApneaType::Central => self.csa,
            ApneaType::Mixed => self.msa,
            ApneaType::Hypopnea => self.hypopnea,
        }
    }
}

/// Maximal runs of ones per hour of `duration` seconds.
pub fn ahi(labels: &ScalarSeries, duration: f64) -> Result<f64> {
    check_binary(labels.values())?;
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidConfig(format!("duration must be positive, got {duration}")));
    }
    Ok(runs_of_ones(labels.values()).len() as f64 / (duration / 3600.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Sample-level precision, recall and F1 of `est` against `reference`.
///
/// Precision (recall) is 0 when there are no estimated (reference) positives.
pub fn f1_score(est: &ScalarSeries, reference: &ScalarSeries) -> Result<F1Score> {
    if est.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: reference.len(),
        });
    }
    check_binary(est.values())?;
    check_binary(reference.values())?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&e, &r) in est.values().iter().zip(reference.values()) {
        match (e == 1.0, r == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(F1Score {
        f1,
        precision,
        recall,
    })
}

/// `0.00, 0.01, …, 1.00`.
pub fn default_threshold_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub score: F1Score,
}

/// Grid threshold maximising F1 after binarisation and the duration filter.
/// Ties go to the smaller threshold.
pub fn optimize_threshold(
    lbar: &ScalarSeries,
    reference: &ScalarSeries,
    grid: &[f64],
    min_duration: f64,
) -> Result<ThresholdChoice> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("threshold grid is empty".into()));
    }
    if let Some(t) = grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidConfig(format!("threshold {t} outside [0, 1]")));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<ThresholdChoice> = None;
    for th in sorted {
        let labels = enforce_min_duration(&binarize(lbar, th), min_duration)?;
        let score = f1_score(&labels, reference)?;
        if best.is_none_or(|b| score.f1 > b.score.f1) {
            best = Some(ThresholdChoice { threshold: th, score });
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Pearson correlation; `None` when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    // Constant up to rounding of the mean.
    let flat = |ss: f64, v: &[f64]| {
        let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        ss <= (1e-12 * scale).powi(2) * n
    };
    if flat(sxx, x) || flat(syy, y) {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// Correlation of each type's proportion with the optimal threshold, across
/// recordings. `None` entries mark a constant input vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeCorrelation {
    pub osa: Option<f64>,
    pub csa: Option<f64>,
    pub msa: Option<f64>,
    pub hypopnea: Option<f64>,
}

pub fn type_threshold_correlation(patients: &[(TypeProportions, f64)]) -> Result<TypeCorrelation> {
    if patients.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "correlation needs at least 3 recordings, got {}",
            patients.len()
        )));
    }
    for (i, (p, _)) in patients.iter().enumerate() {
        let sum = p.osa + p.csa + p.msa + p.hypopnea;
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!("proportions of recording {i} sum to {sum}")));
        }
    }
    let thresholds: Vec<f64> = patients.iter().map(|p| p.1).collect();
    let rho = |t: ApneaType| -> Result<Option<f64>> {
        let props: Vec<f64> = patients.iter().map(|p| p.0.get(t)).collect();
        pearson(&props, &thresholds)
    };
    Ok(TypeCorrelation {
        osa: rho(ApneaType::Obstructive)?,
        csa: rho(ApneaType::Central)?,
        msa: rho(ApneaType::Mixed)?,
        hypopnea: rho(ApneaType::Hypopnea)?,
    })
}

/// Everything needed for one row of a conventional-vs-proposed comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub ahi_est: f64,
    pub ahi_ref: f64,
    pub ahi_error: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub include_hypopnea: bool,
    pub proportions: TypeProportions,
    /// Present when the threshold was optimised.
    pub optimal_threshold: Option<f64>,
    pub optimal_f1: Option<f64>,
    pub optimal_ahi_est: Option<f64>,
    pub optimal_ahi_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationOptions {
    pub include_hypopnea: bool,
    /// Threshold grid for optimisation; `None` skips it.
    pub threshold_grid: Option<Vec<f64>>,
    pub min_duration: f64,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        Self {
            include_hypopnea: true,
            threshold_grid: None,
            min_duration: 10.0,
        }
    }
}

/// Scores final labels (and optionally re-thresholds `lbar`) against `reference`.
pub fn evaluate(
    labels: &ScalarSeries,
    lbar: Option<&ScalarSeries>,
    reference: &ReferenceAnnotation,
    opts: &EvaluationOptions,
) -> Result<EvaluationReport> {
    let fs = labels.sample_rate();
    let ref_track = reference.rasterize(fs, labels.len(), opts.include_hypopnea)?;
    let ref_track = labels.with_values(ref_track.into_values());
    let duration = reference.recording_duration;
    let ahi_est = ahi(labels, duration)?;
    let ahi_ref = reference.ahi(opts.include_hypopnea);
    let score = f1_score(labels, &ref_track)?;

    let mut report = EvaluationReport {
        ahi_est,
        ahi_ref,
        ahi_error: (ahi_est - ahi_ref).abs(),
        f1: score.f1,
        precision: score.precision,
        recall: score.recall,
        include_hypopnea: opts.include_hypopnea,
        proportions: reference.type_proportions(),
        optimal_threshold: None,
        optimal_f1: None,
        optimal_ahi_est: None,
        optimal_ahi_error: None,
    };
    if let (Some(grid), Some(lbar)) = (&opts.threshold_grid, lbar) {
        if !lbar.same_grid(labels) {
            return Err(Error::Misaligned("averaged labels and final labels differ in time base".into()));
        }
        let best = optimize_threshold(lbar, &ref_track, grid, opts.min_duration)?;
        let relabeled = enforce_min_duration(&binarize(lbar, best.threshold), opts.min_duration)?;
        let est = ahi(&relabeled, duration)?;
        report.optimal_threshold = Some(best.threshold);
        report.optimal_f1 = Some(best.score.f1);
        report.optimal_ahi_est = Some(est);
        report.optimal_ahi_error = Some((est - ahi_ref).abs());
    }
    Ok(report)
}
