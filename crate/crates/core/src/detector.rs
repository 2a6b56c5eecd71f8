//! Overlapping-interval apnea detection.
//!
//! Every interval `I_n = [t_n, t_n + T]` gets its own mixture fit and
//! temporary labels; the labels of all intervals covering a sample are
//! averaged into an apnea probability `L̄(t)`, which is thresholded and
//! stripped of runs shorter than the minimum event duration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmm::{fit_gmm_em, temporary_labels, EmConfig, GmmFit, LabelRuleConfig};
use crate::pipeline::FilterConfig;
use crate::series::{check_binary, runs_of_ones, ScalarSeries};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    /// Half-open sample range `[start, end)` at `sample_rate`, relative to the record start.
    pub fn sample_range(&self, sample_rate: f64) -> (usize, usize) {
        (
            (self.start * sample_rate).round() as usize,
            (self.end * sample_rate).round() as usize,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrid {
    pub total_duration: f64,
    pub interval_length: f64,
    pub step: f64,
    pub intervals: Vec<Interval>,
    /// Record shorter than the interval length; the grid is the single
    /// interval `[0, T0]`.
    pub shortened: bool,
}

impl IntervalGrid {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `N'(t)` for each of `n_samples` samples at `sample_rate`.
    pub fn coverage(&self, sample_rate: f64, n_samples: usize) -> Vec<usize> {
        let mut cov = vec![0; n_samples];
        for iv in &self.intervals {
            let (a, b) = iv.sample_range(sample_rate);
            for c in &mut cov[a.min(n_samples)..b.min(n_samples)] {
                *c += 1;
            }
        }
        cov
    }

    /// Upper bound on `N'(t)`.
    pub fn max_coverage_bound(&self) -> usize {
        (self.interval_length / self.step - TIME_EPS).ceil() as usize + 1
    }
}

/// Grid with `t_n = (n−1)·dt` for every interval that fits in `[0, T0]`,
/// plus a final `[T0 − T, T0]` when `T0 − T` is not a multiple of `dt`.
pub fn build_intervals(total: f64, length: f64, step: f64) -> Result<IntervalGrid> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidConfig(format!("interval length must be positive, got {length}")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("interval step must be positive, got {step}")));
    }
    if step > length + TIME_EPS {
        return Err(Error::InvalidConfig(format!(
            "interval step {step} s exceeds interval length {length} s, leaving samples uncovered"
        )));
    }
    if !total.is_finite() || total < length - TIME_EPS {
        return Err(Error::IntervalLongerThanRecord {
            interval: length,
            record: total,
        });
    }
    let span = (total - length).max(0.0);
    let count = (span / step + TIME_EPS).floor() as usize + 1;
    let mut intervals: Vec<Interval> = (0..count)
        .map(|n| {
            let start = n as f64 * step;
            Interval {
                start,
                end: start + length,
            }
        })
        .collect();
    let last_start = (count - 1) as f64 * step;
    if span - last_start > TIME_EPS {
        intervals.push(Interval {
            start: span,
            end: total,
        });
    }
    Ok(IntervalGrid {
        total_duration: total,
        interval_length: length,
        step,
        intervals,
        shortened: false,
    })
}

/// Like [`build_intervals`], but a record shorter than `length` yields the
/// single interval `[0, T0]` flagged as shortened.
pub fn build_intervals_or_single(total: f64, length: f64, step: f64) -> Result<IntervalGrid> {
    match build_intervals(total, length, step) {
        Err(Error::IntervalLongerThanRecord { .. }) if total > 0.0 => Ok(IntervalGrid {
            total_duration: total,
            interval_length: length,
            step,
            intervals: vec![Interval { start: 0.0, end: total }],
            shortened: true,
        }),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntervalConfig {
    /// `T` in seconds.
    pub length: f64,
    /// `Δt` in seconds.
    pub step: f64,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        Self {
            length: 60.0,
            step: 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    /// `L_th`.
    pub label_threshold: f64,
    /// Shortest kept event, seconds.
    pub min_event_duration: f64,
    pub interval: IntervalConfig,
    pub filter: FilterConfig,
    pub rule: LabelRuleConfig,
    pub em: EmConfig,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            label_threshold: 0.60,
            min_event_duration: 10.0,
            interval: IntervalConfig::default(),
            filter: FilterConfig::default(),
            rule: LabelRuleConfig::default(),
            em: EmConfig::default(),
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.label_threshold) {
            return Err(Error::InvalidConfig(format!(
                "label_threshold must lie in [0, 1], got {}",
                self.label_threshold
            )));
        }
        if !(self.min_event_duration >= 0.0 && self.min_event_duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "min_event_duration must be non-negative, got {}",
                self.min_event_duration
            )));
        }
        if !(self.interval.length > 0.0 && self.interval.step > 0.0 && self.interval.step <= self.interval.length) {
            return Err(Error::InvalidConfig("interval length and step must be positive, with step <= length".into()));
        }
        self.filter.validate()?;
        self.rule.validate()?;
        self.em.validate()
    }
}

/// Temporary labels of one interval, on that interval's samples only.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalLabels {
    pub interval: Interval,
    pub labels: ScalarSeries,
}

/// `L̄(t) = (1/N'(t)) Σ_{n: t ∈ I_n} L_n(t)` on the time base of `reference`.
pub fn average_labels(per_interval: &[IntervalLabels], reference: &ScalarSeries) -> Result<ScalarSeries> {
    let n = reference.len();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for item in per_interval {
        let offset = reference
            .sample_offset(&item.labels)
            .ok_or_else(|| Error::Misaligned(format!("interval starting at {} s", item.interval.start)))?;
        let end = offset + item.labels.len() as i64;
        if offset < 0 || end > n as i64 {
            return Err(Error::Misaligned(format!(
                "interval samples [{offset}, {end}) fall outside [0, {n})"
            )));
        }
        for (i, &l) in item.labels.values().iter().enumerate() {
            let j = offset as usize + i;
            sum[j] += l;
            count[j] += 1;
        }
    }
    if let Some(gap) = count.iter().position(|&c| c == 0) {
        return Err(Error::CoverageGap(gap));
    }
    let values = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    Ok(reference.with_values(values))
}

/// `L̂(t) = 1` iff `L̄(t) ≥ L_th`.
pub fn binarize(lbar: &ScalarSeries, threshold: f64) -> ScalarSeries {
    lbar.with_values(
        lbar.values()
            .iter()
            .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
            .collect(),
    )
}

/// Zeroes every maximal run of ones lasting less than `min_duration` seconds.
pub fn enforce_min_duration(lhat: &ScalarSeries, min_duration: f64) -> Result<ScalarSeries> {
    check_binary(lhat.values())?;
    let min_samples = min_duration * lhat.sample_rate() - TIME_EPS;
    let mut out = lhat.values().to_vec();
    for (a, b) in runs_of_ones(&out) {
        if ((b - a) as f64) < min_samples {
            out[a..b].fill(0.0);
        }
    }
    Ok(lhat.with_values(out))
}

/// A detected event in absolute time, `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub start: f64,
    pub end: f64,
}

impl Event {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Maximal runs of ones in a binary label track.
pub fn events(labels: &ScalarSeries) -> Vec<Event> {
    runs_of_ones(labels.values())
        .into_iter()
        .map(|(a, b)| Event {
            start: labels.time_at(a),
            end: labels.time_at(b),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalFit {
    pub interval: Interval,
    pub fit: GmmFit,
}

#[derive(Debug, Clone)]
pub struct Detection {
    /// Final labels `L̂` after the duration filter.
    pub labels: ScalarSeries,
    /// Averaged labels `L̄`.
    pub lbar: ScalarSeries,
    pub grid: IntervalGrid,
    pub fits: Vec<IntervalFit>,
    pub per_interval: Vec<IntervalLabels>,
    pub events: Vec<Event>,
}

/// Mixture fit and temporary labels for every interval of `grid`.
pub fn label_intervals(
    envelope: &ScalarSeries,
    grid: &IntervalGrid,
    em: &EmConfig,
    rule: &LabelRuleConfig,
) -> Result<(Vec<IntervalFit>, Vec<IntervalLabels>)> {
    let fs = envelope.sample_rate();
    let n = envelope.len();
    let results: Vec<Result<(IntervalFit, IntervalLabels)>> = grid
        .intervals
        .par_iter()
        .map(|iv| {
            let (a, b) = iv.sample_range(fs);
            let (a, b) = (a.min(n), b.min(n));
            let samples = &envelope.values()[a..b];
            let (fit, resp) = fit_gmm_em(samples, em)?;
            let labels = temporary_labels(&fit, &resp, rule);
            let labels = ScalarSeries::new(labels, fs, envelope.time_at(a))?;
            Ok((
                IntervalFit {
                    interval: *iv,
                    fit,
                },
                IntervalLabels {
                    interval: *iv,
                    labels,
                },
            ))
        })
        .collect();
    let mut fits = Vec::with_capacity(results.len());
    let mut labels = Vec::with_capacity(results.len());
    for r in results {
        let (f, l) = r?;
        fits.push(f);
        labels.push(l);
    }
    Ok((fits, labels))
}

/// Runs the whole detector on an amplitude envelope.
pub fn detect(envelope: &ScalarSeries, cfg: &DetectionConfig) -> Result<Detection> {
    cfg.validate()?;
    let grid = build_intervals(envelope.duration(), cfg.interval.length, cfg.interval.step)?;
    let (fits, per_interval) = label_intervals(envelope, &grid, &cfg.em, &cfg.rule)?;
    let lbar = average_labels(&per_interval, envelope)?;
    let lhat = binarize(&lbar, cfg.label_threshold);
    let labels = enforce_min_duration(&lhat, cfg.min_event_duration)?;
    let events = events(&labels);
    Ok(Detection {
        labels,
        lbar,
        grid,
        fits,
        per_interval,
        events,
    })
}
