//! Echo to respiratory displacement to RMS amplitude envelope.
//!
//! ```text
//! s(t) ──phase/unwrap──► d'(t) ──[d' − d'*h1]*h2──► d(t) ──centred RMS──► d̄(t)
//! ```
//!
//! `h1` is a unit-sum rectangular kernel (drift remover), `h2` a unit-sum
//! Hann kernel (smoother). All convolutions pad with the edge value so every
//! output keeps the length and time base of its input.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{odd_window_len, ComplexEchoSeries, ScalarSeries};

/// Window lengths in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    /// Rectangular drift-removal window.
    pub h1_length: f64,
    /// Hann smoothing window.
    pub h2_length: f64,
    /// RMS envelope window.
    pub envelope_length: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            h1_length: 6.0,
            h2_length: 1.1,
            envelope_length: 5.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h1_length", self.h1_length),
            ("h2_length", self.h2_length),
            ("envelope_length", self.envelope_length),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Checks that each window spans at least one sample at `sample_rate`.
    pub fn validate_at(&self, sample_rate: f64) -> Result<()> {
        self.validate()?;
        for (name, v) in [
            ("h1_length", self.h1_length),
            ("h2_length", self.h2_length),
            ("envelope_length", self.envelope_length),
        ] {
            if v * sample_rate + 1e-9 < 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} = {v} s is shorter than one sample at {sample_rate} Hz"
                )));
            }
        }
        Ok(())
    }
}

/// Standard 1-D unwrap: steps larger than π in magnitude are folded by 2π.
pub fn unwrap_phase(phase: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(phase.len());
    let mut offset = 0.0;
    let mut prev = match phase.first() {
        Some(&p) => p,
        None => return out,
    };
    out.push(prev);
    for &p in &phase[1..] {
        let step = p - prev;
        if step > PI {
            offset -= 2.0 * PI * ((step + PI) / (2.0 * PI)).floor();
        } else if step < -PI {
            offset += 2.0 * PI * ((-step + PI) / (2.0 * PI)).floor();
        }
        out.push(p + offset);
        prev = p;
    }
    out
}

/// `d'(t) = λ/(4π) · unwrap(arg s(t))`, in mm.
pub fn extract_displacement(echo: &ComplexEchoSeries) -> Result<ScalarSeries> {
    if let Some(i) = echo.samples().iter().position(|s| s.norm_sqr() == 0.0) {
        return Err(Error::ZeroMagnitudeSample(i));
    }
    let phase: Vec<f64> = echo.samples().iter().map(|s| s.arg()).collect();
    let scale = echo.wavelength() / (4.0 * PI);
    let values = unwrap_phase(&phase).into_iter().map(|p| p * scale).collect();
    ScalarSeries::new(values, echo.sample_rate(), echo.start_time())
}

/// Unit-sum rectangular kernel of odd length.
pub fn rect_kernel(len: usize) -> Vec<f64> {
    vec![1.0 / len as f64; len]
}

/// Unit-sum Hann kernel of odd length with strictly positive taps.
///
/// Taps are the interior of an `len + 2` point Hann window, so the zero
/// endpoints are dropped and all `len` samples carry weight.
pub fn hann_kernel(len: usize) -> Vec<f64> {
    let taps: Vec<f64> = (0..len)
        .map(|k| 0.5 - 0.5 * (2.0 * PI * (k + 1) as f64 / (len + 1) as f64).cos())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|w| w / sum).collect()
}

/// Centred convolution of `x` with an odd-length symmetric kernel, padding
/// with the first/last value.
pub fn convolve_edge(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    debug_assert!(kernel.len() % 2 == 1);
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let half = (kernel.len() / 2) as isize;
    (0..n as isize)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let j = (i + k as isize - half).clamp(0, n as isize - 1);
                    w * x[j as usize]
                })
                .sum()
        })
        .collect()
}

/// `d(t) = [d'(t) − (d' * h1)(t)] * h2(t)`.
pub fn bandpass_respiration(dprime: &ScalarSeries, cfg: &FilterConfig) -> Result<ScalarSeries> {
    let fs = dprime.sample_rate();
    cfg.validate_at(fs)?;
    let h1 = rect_kernel(odd_window_len(cfg.h1_length, fs));
    if dprime.len() < h1.len() {
        return Err(Error::SeriesTooShort {
            len: dprime.len(),
            needed: h1.len(),
        });
    }
    let h2 = hann_kernel(odd_window_len(cfg.h2_length, fs));
    let x = dprime.values();
    let trend = convolve_edge(x, &h1);
    let detrended: Vec<f64> = x.iter().zip(&trend).map(|(a, b)| a - b).collect();
    Ok(dprime.with_values(convolve_edge(&detrended, &h2)))
}

/// Number of samples at each edge that the composite bandpass leaves
/// influenced by padding.
pub fn bandpass_edge_samples(cfg: &FilterConfig, sample_rate: f64) -> usize {
    odd_window_len(cfg.h1_length, sample_rate) / 2 + odd_window_len(cfg.h2_length, sample_rate) / 2
}

/// Centred RMS over an odd window of `envelope_length`; windows near the
/// ends shrink symmetrically and are normalised by their actual length.
pub fn amplitude_envelope(d: &ScalarSeries, cfg: &FilterConfig) -> Result<ScalarSeries> {
    let fs = d.sample_rate();
    cfg.validate_at(fs)?;
    let win = odd_window_len(cfg.envelope_length, fs);
    let n = d.len();
    if n < win {
        return Err(Error::SeriesTooShort { len: n, needed: win });
    }
    let half = win / 2;
    let x = d.values();
    let out = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let w = &x[i - h..=i + h];
            (w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64).sqrt()
        })
        .collect();
    Ok(d.with_values(out))
}

/// Full chain from echo to envelope.
pub fn envelope_from_echo(echo: &ComplexEchoSeries, cfg: &FilterConfig) -> Result<ScalarSeries> {
    let dprime = extract_displacement(echo)?;
    envelope_from_displacement(&dprime, cfg)
}

/// Bandpass then envelope, starting from raw displacement.
pub fn envelope_from_displacement(dprime: &ScalarSeries, cfg: &FilterConfig) -> Result<ScalarSeries> {
    let d = bandpass_respiration(dprime, cfg)?;
    amplitude_envelope(&d, cfg)
}
