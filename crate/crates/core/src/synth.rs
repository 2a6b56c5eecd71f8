//! Synthetic breathing scenarios and the irregular-movement BCE sweep.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{build_intervals, IntervalConfig};
use crate::error::{Error, Result};
use crate::gmm::{fit_gmm_em, EmConfig};
use crate::pipeline::{amplitude_envelope, bandpass_respiration, FilterConfig};
use crate::series::ScalarSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Normal,
    Apnea,
    Movement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Seconds.
    pub duration: f64,
    /// Peak displacement, mm.
    pub amplitude: f64,
    /// Oscillation period, seconds.
    pub period: f64,
}

impl Segment {
    pub fn new(kind: SegmentKind, duration: f64, amplitude: f64, period: f64) -> Self {
        Self {
            kind,
            duration,
            amplitude,
            period,
        }
    }
}

fn default_rate() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub segments: Vec<Segment>,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    /// Additive Gaussian noise, mm.
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    /// Normal 40 s, apnea 20 s, movement `t_m` s at `d_m` mm, normal 35 s;
    /// 4 s period, 1.0 / 0.1 mm breathing amplitudes, 10 Hz.
    pub fn four_segment(d_m: f64, t_m: f64) -> Self {
        Self {
            segments: vec![
                Segment::new(SegmentKind::Normal, 40.0, 1.0, 4.0),
                Segment::new(SegmentKind::Apnea, 20.0, 0.1, 4.0),
                Segment::new(SegmentKind::Movement, t_m, d_m, 4.0),
                Segment::new(SegmentKind::Normal, 35.0, 1.0, 4.0),
            ],
            sample_rate: 10.0,
            noise_std: 0.0,
            seed: 0,
        }
    }

    /// The reference scenario with a 5 s, 3.3 mm movement.
    pub fn reference() -> Self {
        Self::four_segment(3.3, 5.0)
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::InvalidSpec("no segments".into()));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidSpec(format!("sample_rate must be positive, got {}", self.sample_rate)));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidSpec(format!("noise_std must be non-negative, got {}", self.noise_std)));
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return Err(Error::InvalidSpec(format!("segment {i}: duration must be positive")));
            }
            if !(s.amplitude >= 0.0 && s.amplitude.is_finite()) {
                return Err(Error::InvalidSpec(format!("segment {i}: amplitude must be non-negative")));
            }
            if !(s.period > 0.0 && s.period.is_finite()) {
                return Err(Error::InvalidSpec(format!("segment {i}: period must be positive")));
            }
        }
        Ok(())
    }

    /// Segment index owning time `t`; segments are half-open `[start, end)`.
    fn segment_at(&self, t: f64, bounds: &[f64]) -> usize {
        bounds
            .iter()
            .position(|&end| t < end - 1e-9)
            .unwrap_or(self.segments.len() - 1)
    }
}

/// Displacement (mm) and truth labels (1 during apnea) for `spec`.
///
/// Phase advances continuously across segments; only the amplitude (and
/// the instantaneous frequency) switches at a boundary.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<(ScalarSeries, ScalarSeries)> {
    spec.validate()?;
    let fs = spec.sample_rate;
    let n = (spec.total_duration() * fs).round() as usize;
    let bounds: Vec<f64> = spec
        .segments
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.duration;
            Some(*acc)
        })
        .collect();

    let mut displacement = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let mut phase = 0.0f64;
    for i in 0..n {
        let seg = &spec.segments[spec.segment_at(i as f64 / fs, &bounds)];
        displacement.push(seg.amplitude * phase.sin());
        truth.push(if seg.kind == SegmentKind::Apnea { 1.0 } else { 0.0 });
        phase = (phase + 2.0 * PI / (seg.period * fs)) % (2.0 * PI);
    }
    if spec.noise_std > 0.0 {
        let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for v in &mut displacement {
            *v += noise.sample(&mut rng);
        }
    }
    Ok((
        ScalarSeries::new(displacement, fs, 0.0)?,
        ScalarSeries::new(truth, fs, 0.0)?,
    ))
}

pub const BCE_EPS: f64 = 1e-7;

/// Mean binary cross-entropy with `p` clamped to `[ε, 1 − ε]`.
pub fn bce_loss(prob: &[f64], truth: &[f64]) -> Result<f64> {
    if prob.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: prob.len(),
            right: truth.len(),
        });
    }
    if prob.is_empty() {
        return Err(Error::InvalidSeries("BCE of empty series".into()));
    }
    let total: f64 = prob
        .iter()
        .zip(truth)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / prob.len() as f64)
}

/// Pipeline and interval settings shared by every sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepPolicy {
    pub interval: IntervalConfig,
    pub filter: FilterConfig,
    pub em: EmConfig,
    /// Run the bandpass before the envelope. The synthetic displacement is
    /// already a pure respiratory sinusoid, so this defaults to off.
    pub bandpass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Movement amplitudes, mm.
    pub d_m: Vec<f64>,
    /// Movement durations, s.
    pub t_m: Vec<f64>,
    /// `bce[i][j]` for `d_m[i]`, `t_m[j]`.
    pub bce: Vec<Vec<f64>>,
}

impl SweepGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.bce[i][j]
    }
}

/// Mean BCE between `γ2` and truth over all intervals of one scenario.
pub fn scenario_interval_bce(spec: &ScenarioSpec, policy: &SweepPolicy) -> Result<f64> {
    let (disp, truth) = generate_scenario(spec)?;
    let d = if policy.bandpass {
        bandpass_respiration(&disp, &policy.filter)?
    } else {
        disp
    };
    let env = amplitude_envelope(&d, &policy.filter)?;
    let grid = build_intervals(env.duration(), policy.interval.length, policy.interval.step)?;
    let fs = env.sample_rate();
    let mut total = 0.0;
    for iv in &grid.intervals {
        let (a, b) = iv.sample_range(fs);
        let b = b.min(env.len());
        let (_, resp) = fit_gmm_em(&env.values()[a..b], &policy.em)?;
        let gamma2: Vec<f64> = resp.apnea().collect();
        total += bce_loss(&gamma2, &truth.values()[a..b])?;
    }
    Ok(total / grid.len() as f64)
}

/// BCE for every `(d_m, t_m)` pair, substituting the amplitude and duration
/// of every movement segment in `base`.
pub fn sweep_bce(base: &ScenarioSpec, d_m: &[f64], t_m: &[f64], policy: &SweepPolicy) -> Result<SweepGrid> {
    if d_m.is_empty() || t_m.is_empty() {
        return Err(Error::InvalidSpec("sweep needs at least one d_m and one t_m value".into()));
    }
    if !base.segments.iter().any(|s| s.kind == SegmentKind::Movement) {
        return Err(Error::InvalidSpec("sweep base scenario has no movement segment".into()));
    }
    let cells: Vec<(usize, usize)> = (0..d_m.len())
        .flat_map(|i| (0..t_m.len()).map(move |j| (i, j)))
        .collect();
    let losses: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let mut spec = base.clone();
            for s in spec.segments.iter_mut().filter(|s| s.kind == SegmentKind::Movement) {
                s.amplitude = d_m[i];
                s.duration = t_m[j];
            }
            scenario_interval_bce(&spec, policy)
        })
        .collect();
    let mut bce = vec![vec![0.0; t_m.len()]; d_m.len()];
    for (&(i, j), loss) in cells.iter().zip(losses) {
        bce[i][j] = loss?;
    }
    Ok(SweepGrid {
        d_m: d_m.to_vec(),
        t_m: t_m.to_vec(),
        bce,
    })
}
