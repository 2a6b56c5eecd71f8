//! Two-component univariate Gaussian mixture fitted by EM, and the
//! per-sample temporary apnea label derived from it.
//!
//! Components are always returned sorted by mean, high first: component 1
//! is normal breathing and component 2 the candidate apnea cluster.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 4;
pub const VARIANCE_FLOOR: f64 = 1e-12;
const EMPTY_WEIGHT: f64 = 1e-6;
/// Allowed log-likelihood decrease attributable to rounding.
const LL_ROUNDING: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Absolute log-likelihood change below which EM stops.
    pub tol: f64,
    /// Extra randomly initialised runs; the best likelihood wins.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-8,
            restarts: 0,
            seed: 0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig(format!("tol must be non-negative, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// All samples identical; the fit is a single cluster split in two.
    pub degenerate: bool,
    /// Log-likelihood evaluated at the start of every iteration.
    #[serde(skip)]
    pub log_likelihood_trace: Vec<f64>,
    /// Iterations at which the empty-component guard reset a component.
    #[serde(skip)]
    pub resets: Vec<usize>,
}

impl GmmFit {
    /// `μ2 / μ1`, or `None` when the high mean is zero.
    pub fn mean_ratio(&self) -> Option<f64> {
        (self.means[0] > 0.0).then(|| self.means[1] / self.means[0])
    }

    /// True if the trace never drops by more than rounding, ignoring steps
    /// that straddle a component reset.
    pub fn is_monotone(&self) -> bool {
        self.log_likelihood_trace.windows(2).enumerate().all(|(i, w)| {
            self.resets.contains(&(i + 1))
                || w[1] - w[0] >= -LL_ROUNDING * w[0].abs().max(1.0)
        })
    }

    pub fn density(&self, x: f64) -> f64 {
        (0..2)
            .map(|k| self.weights[k] * normal_pdf(x, self.means[k], self.variances[k]))
            .sum()
    }
}

/// Posterior component memberships `(γ1, γ2)` per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub gamma: Vec<[f64; 2]>,
}

impl Responsibilities {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// γ2, the apnea-cluster membership.
    pub fn apnea(&self) -> impl Iterator<Item = f64> + '_ {
        self.gamma.iter().map(|g| g[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelRuleConfig {
    /// Largest `μ2/μ1` for which the low cluster counts as apnea.
    pub beta: f64,
}

impl Default for LabelRuleConfig {
    fn default() -> Self {
        Self { beta: 0.7 }
    }
}

impl LabelRuleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidConfig(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        Ok(())
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    log_normal_pdf(x, mean, var).exp()
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

#[derive(Debug, Clone, Copy)]
struct Params {
    weights: [f64; 2],
    means: [f64; 2],
    variances: [f64; 2],
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// E-step: fills `resp` and returns the log-likelihood of `p`.
fn e_step(x: &[f64], p: &Params, resp: &mut [[f64; 2]]) -> f64 {
    let log_w = [p.weights[0].ln(), p.weights[1].ln()];
    let mut ll = 0.0;
    for (xi, r) in x.iter().zip(resp.iter_mut()) {
        let a = log_w[0] + log_normal_pdf(*xi, p.means[0], p.variances[0]);
        let b = log_w[1] + log_normal_pdf(*xi, p.means[1], p.variances[1]);
        let m = a.max(b);
        let lse = m + ((a - m).exp() + (b - m).exp()).ln();
        let g0 = (a - lse).exp();
        *r = [g0, 1.0 - g0];
        ll += lse;
    }
    ll
}

fn m_step(x: &[f64], resp: &[[f64; 2]]) -> Params {
    let n = x.len() as f64;
    let mut p = Params {
        weights: [0.0; 2],
        means: [0.0; 2],
        variances: [0.0; 2],
    };
    for k in 0..2 {
        let nk: f64 = resp.iter().map(|r| r[k]).sum();
        p.weights[k] = nk / n;
        if nk <= 0.0 {
            continue;
        }
        let mean = x.iter().zip(resp).map(|(v, r)| r[k] * v).sum::<f64>() / nk;
        let var = x.iter().zip(resp).map(|(v, r)| r[k] * (v - mean).powi(2)).sum::<f64>() / nk;
        p.means[k] = mean;
        p.variances[k] = var.max(VARIANCE_FLOOR);
    }
    p.weights[1] = 1.0 - p.weights[0];
    p
}

/// Moves an emptied component onto the sample farthest from the other one.
fn reset_empty(x: &[f64], p: &mut Params, overall_var: f64) -> bool {
    let Some(k) = (0..2).find(|&k| p.weights[k] < EMPTY_WEIGHT) else {
        return false;
    };
    let other = 1 - k;
    let far = x
        .iter()
        .copied()
        .max_by(|a, b| {
            (a - p.means[other])
                .abs()
                .total_cmp(&(b - p.means[other]).abs())
        })
        .unwrap_or(p.means[other]);
    p.means[k] = far;
    p.variances[k] = overall_var.max(VARIANCE_FLOOR);
    p.weights = [0.5, 0.5];
    true
}

/// Lloyd iterations in 1-D from two seed centres; weights and variances
/// come from the final hard partition.
fn kmeans_init(x: &[f64], seeds: [f64; 2], overall_var: f64) -> Params {
    let mut centres = seeds;
    let mut assign = vec![0usize; x.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (a, v) in assign.iter_mut().zip(x) {
            let k = usize::from((v - centres[1]).abs() < (v - centres[0]).abs());
            changed |= *a != k;
            *a = k;
        }
        let mut sum = [0.0; 2];
        let mut count = [0usize; 2];
        for (&k, v) in assign.iter().zip(x) {
            sum[k] += v;
            count[k] += 1;
        }
        for k in 0..2 {
            if count[k] > 0 {
                centres[k] = sum[k] / count[k] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    let mut p = Params {
        weights: [0.5, 0.5],
        means: centres,
        variances: [overall_var.max(VARIANCE_FLOOR); 2],
    };
    let n = x.len() as f64;
    for k in 0..2 {
        let members: Vec<f64> = assign.iter().zip(x).filter(|(&a, _)| a == k).map(|(_, &v)| v).collect();
        if members.is_empty() {
            // Both seeds collapsed onto one cluster; keep the broad start.
            return Params {
                weights: [0.5, 0.5],
                means: seeds,
                variances: [overall_var.max(VARIANCE_FLOOR); 2],
            };
        }
        let (_, var) = mean_var(&members);
        p.weights[k] = members.len() as f64 / n;
        p.variances[k] = var.max(VARIANCE_FLOOR);
    }
    p.weights[1] = 1.0 - p.weights[0];
    p
}

struct Run {
    params: Params,
    resp: Vec<[f64; 2]>,
    ll: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
    resets: Vec<usize>,
}

fn run_em(x: &[f64], init: Params, cfg: &EmConfig, overall_var: f64) -> Run {
    let mut params = init;
    let mut resp = vec![[0.0; 2]; x.len()];
    let mut trace = Vec::new();
    let mut resets = Vec::new();
    let mut converged = false;
    let mut ll = f64::NEG_INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        ll = e_step(x, &params, &mut resp);
        iterations += 1;
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            debug_assert!(
                resets.contains(&(trace.len() - 1)) || ll - prev >= -LL_ROUNDING * prev.abs().max(1.0),
                "EM log-likelihood decreased: {prev} -> {ll}"
            );
            if (ll - prev).abs() < cfg.tol {
                converged = true;
                break;
            }
        }
        if iterations == cfg.max_iter {
            break;
        }
        params = m_step(x, &resp);
        if reset_empty(x, &mut params, overall_var) {
            resets.push(trace.len());
        }
    }
    Run {
        params,
        resp,
        ll,
        iterations,
        converged,
        trace,
        resets,
    }
}

/// Fits a two-component mixture to `samples` (mm, all ≥ 0).
///
/// Initialisation is deterministic: 1-D k-means seeded at the 75th and 25th
/// percentiles, with weights, means and variances taken from the resulting
/// partition. With `restarts > 0` further runs seed k-means from samples
/// drawn with `seed`, and the highest final likelihood is kept.
pub fn fit_gmm_em(samples: &[f64], cfg: &EmConfig) -> Result<(GmmFit, Responsibilities)> {
    cfg.validate()?;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            len: samples.len(),
            needed: MIN_SAMPLES,
        });
    }
    if let Some(i) = samples.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidSeries(format!(
            "EM sample {i} must be finite and non-negative, got {}",
            samples[i]
        )));
    }

    let (_, overall_var) = mean_var(samples);
    if samples.iter().all(|&v| v == samples[0]) {
        let v = samples[0];
        let params = Params {
            weights: [0.5, 0.5],
            means: [v, v],
            variances: [VARIANCE_FLOOR; 2],
        };
        let mut resp = vec![[0.0; 2]; samples.len()];
        let ll = e_step(samples, &params, &mut resp);
        let fit = GmmFit {
            weights: params.weights,
            means: params.means,
            variances: params.variances,
            log_likelihood: ll,
            iterations: 0,
            converged: true,
            degenerate: true,
            log_likelihood_trace: vec![ll],
            resets: Vec::new(),
        };
        return Ok((fit, Responsibilities { gamma: resp }));
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let init = kmeans_init(samples, [percentile(&sorted, 0.75), percentile(&sorted, 0.25)], overall_var);
    let mut best = run_em(samples, init, cfg, overall_var);

    if cfg.restarts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.restarts {
            let picks: Vec<f64> = samples.choose_multiple(&mut rng, 2).copied().collect();
            let init = kmeans_init(samples, [picks[0], picks[1]], overall_var);
            let run = run_em(samples, init, cfg, overall_var);
            if run.ll > best.ll {
                best = run;
            }
        }
    }

    let Run {
        mut params,
        mut resp,
        ll,
        iterations,
        converged,
        trace,
        resets,
    } = best;
    if params.means[1] > params.means[0] {
        params.weights.swap(0, 1);
        params.means.swap(0, 1);
        params.variances.swap(0, 1);
        for r in &mut resp {
            r.swap(0, 1);
        }
    }
    let fit = GmmFit {
        weights: params.weights,
        means: params.means,
        variances: params.variances,
        log_likelihood: ll,
        iterations,
        converged,
        degenerate: false,
        log_likelihood_trace: trace,
        resets,
    };
    Ok((fit, Responsibilities { gamma: resp }))
}

/// Log-likelihood of `samples` under arbitrary mixture parameters.
pub fn log_likelihood(samples: &[f64], weights: [f64; 2], means: [f64; 2], variances: [f64; 2]) -> f64 {
    let p = Params {
        weights,
        means,
        variances,
    };
    let mut scratch = vec![[0.0; 2]; samples.len()];
    e_step(samples, &p, &mut scratch)
}

/// `L(t) = 1` iff `γ1(t) ≤ γ2(t)` and `μ2/μ1 ≤ β`.
///
/// A fit whose high mean is zero has no defined ratio and labels nothing.
pub fn temporary_labels(fit: &GmmFit, resp: &Responsibilities, rule: &LabelRuleConfig) -> Vec<f64> {
    let separated = fit.mean_ratio().is_some_and(|r| r <= rule.beta);
    resp.gamma
        .iter()
        .map(|g| if separated && g[0] <= g[1] { 1.0 } else { 0.0 })
        .collect()
}
