use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("echo sample {0} has zero magnitude; phase is undefined")]
    ZeroMagnitudeSample(usize),
    #[error("series has {len} samples but at least {needed} are required")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("EM needs at least {needed} samples, got {len}")]
    TooFewSamples { len: usize, needed: usize },
    #[error("interval length {interval} s exceeds record length {record} s")]
    IntervalLongerThanRecord { interval: f64, record: f64 },
    #[error("sample {0} is not covered by any interval")]
    CoverageGap(usize),
    #[error("label series must be aligned to a common time base: {0}")]
    Misaligned(String),
    #[error("value {value} at sample {index} is not binary")]
    NonBinaryInput { index: usize, value: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("non-uniform sampling at sample {0}")]
    NonUniformSampling(usize),
    #[error("annotation events overlap: [{0}, {1}) and [{2}, {3})")]
    Overlap(f64, f64, f64, f64),
    #[error("unknown event type {0:?} (expected OSA, CSA, MSA or HYP)")]
    UnknownType(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
