//! Uniformly sampled time series.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Carrier wavelength in millimetres for a carrier frequency in hertz.
pub fn wavelength_mm(carrier_hz: f64) -> f64 {
    SPEED_OF_LIGHT / carrier_hz * 1e3
}

/// Real-valued series: displacement and envelope in mm, label tracks in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSeries {
    values: Vec<f64>,
    sample_rate: f64,
    start_time: f64,
}

impl ScalarSeries {
    pub fn new(values: Vec<f64>, sample_rate: f64, start_time: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::InvalidSeries("start time is not finite".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!("value at sample {i} is not finite")));
        }
        Ok(Self {
            values,
            sample_rate,
            start_time,
        })
    }

    /// Builds a series sharing `self`'s time base. Callers guarantee finiteness.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self {
            values,
            sample_rate: self.sample_rate,
            start_time: self.start_time,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Record length in seconds, counting one sample period per sample.
    pub fn duration(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.start_time + index as f64 / self.sample_rate
    }

    /// Offset of `other` relative to `self` in whole samples, if the two are alignable.
    pub fn sample_offset(&self, other: &ScalarSeries) -> Option<i64> {
        if self.sample_rate != other.sample_rate {
            return None;
        }
        let shift = (other.start_time - self.start_time) * self.sample_rate;
        let rounded = shift.round();
        ((shift - rounded).abs() < 1e-6).then_some(rounded as i64)
    }

    pub fn is_alignable(&self, other: &ScalarSeries) -> bool {
        self.sample_offset(other).is_some()
    }

    /// True when both series cover exactly the same samples.
    pub fn same_grid(&self, other: &ScalarSeries) -> bool {
        self.sample_offset(other) == Some(0) && self.len() == other.len()
    }
}

/// Complex radar echo of the isolated target range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEchoSeries {
    samples: Vec<Complex64>,
    sample_rate: f64,
    /// Carrier wavelength in mm.
    wavelength: f64,
    start_time: f64,
}

impl ComplexEchoSeries {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, wavelength: f64) -> Result<Self> {
        Self::with_start(samples, sample_rate, wavelength, 0.0)
    }

    pub fn with_start(
        samples: Vec<Complex64>,
        sample_rate: f64,
        wavelength: f64,
        start_time: f64,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidSeries("echo series is empty".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::InvalidSeries("start time is not finite".into()));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::InvalidSeries(format!("echo sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
            wavelength,
            start_time,
        })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Seconds to an odd, centred window length in samples (at least one).
pub(crate) fn odd_window_len(seconds: f64, sample_rate: f64) -> usize {
    let n = (seconds * sample_rate + 1e-9).floor() as usize;
    n.max(1) | 1
}

/// Maximal runs of ones as half-open sample ranges `[start, end)`.
pub fn runs_of_ones(values: &[f64]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in values.iter().enumerate() {
        match (v == 1.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, values.len()));
    }
    runs
}

pub(crate) fn check_binary(values: &[f64]) -> Result<()> {
    match values.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(index) => Err(Error::NonBinaryInput {
            index,
            value: values[index],
        }),
        None => Ok(()),
    }
}
