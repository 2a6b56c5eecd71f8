//! CSV formats for series and annotations.
//!
//! | file        | header              |
//! |-------------|---------------------|
//! | echo        | `time_s,i,q`        |
//! | scalar      | `time_s,value`      |
//! | annotation  | `start_s,end_s,type`|
//!
//! UTF-8, LF line endings, `.` as decimal point. Numbers are written with
//! 17 significant digits, so every finite `f64` survives a round trip.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::metrics::{AnnotatedEvent, ApneaType, ReferenceAnnotation};
use crate::series::{ComplexEchoSeries, ScalarSeries};

pub const ECHO_HEADER: &str = "time_s,i,q";
pub const SCALAR_HEADER: &str = "time_s,value";
pub const ANNOTATION_HEADER: &str = "start_s,end_s,type";

/// Largest deviation of a timestamp from the uniform grid, seconds.
pub const MAX_JITTER: f64 = 1e-6;

/// Formats `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Writes via a temporary file in the target directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(contents).map_err(|e| io_err(path, e))?;
    tmp.flush().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Header-checked data rows as `(line number, fields)`.
fn read_rows(path: &Path, header: &str, columns: usize) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((_, "")) | None => return Err(parse_err(path, 1, "empty file")),
        Some((_, h)) => return Err(parse_err(path, 1, format!("expected header {header:?}, found {h:?}"))),
    }
    let mut rows = Vec::new();
    let mut ended = false;
    for (no, line) in lines {
        if line.is_empty() {
            ended = true;
            continue;
        }
        if ended {
            return Err(parse_err(path, no - 1, "blank line inside data"));
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != columns {
            return Err(parse_err(path, no, format!("expected {columns} fields, found {}", fields.len())));
        }
        rows.push((no, fields));
    }
    if rows.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }
    Ok(rows)
}

fn parse_num(path: &Path, line: usize, field: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_err(path, line, format!("invalid number {field:?}"))),
    }
}

/// Start time and sample rate of a uniformly sampled time column.
fn uniform_timebase(path: &Path, times: &[(usize, f64)]) -> Result<(f64, f64)> {
    if times.len() < 2 {
        return Err(parse_err(path, times[0].0, "at least two samples are needed to infer the sample rate"));
    }
    let t0 = times[0].1;
    let dt = (times[times.len() - 1].1 - t0) / (times.len() - 1) as f64;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::NonUniformSampling(1));
    }
    for (i, &(_, t)) in times.iter().enumerate() {
        if (t - (t0 + i as f64 * dt)).abs() > MAX_JITTER {
            return Err(Error::NonUniformSampling(i));
        }
    }
    let mut fs = 1.0 / dt;
    let snapped = (fs * 1e6).round() / 1e6;
    if (fs - snapped).abs() <= 1e-9 * fs {
        fs = snapped;
    }
    Ok((t0, fs))
}

pub fn read_scalar_series(path: &Path) -> Result<ScalarSeries> {
    let rows = read_rows(path, SCALAR_HEADER, 2)?;
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (no, f) in &rows {
        times.push((*no, parse_num(path, *no, &f[0])?));
        values.push(parse_num(path, *no, &f[1])?);
    }
    let (t0, fs) = uniform_timebase(path, &times)?;
    ScalarSeries::new(values, fs, t0)
}

pub fn format_scalar_series(series: &ScalarSeries) -> String {
    let mut out = String::with_capacity(series.len() * 48 + 16);
    out.push_str(SCALAR_HEADER);
    out.push('\n');
    for (i, v) in series.values().iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt_f64(series.time_at(i)), fmt_f64(*v));
    }
    out
}

pub fn write_scalar_series(series: &ScalarSeries, path: &Path) -> Result<()> {
    write_atomic(path, format_scalar_series(series).as_bytes())
}

/// Reads an echo file; the wavelength (mm) is not part of the format.
pub fn read_complex_series(path: &Path, wavelength: f64) -> Result<ComplexEchoSeries> {
    let rows = read_rows(path, ECHO_HEADER, 3)?;
    let mut times = Vec::with_capacity(rows.len());
    let mut samples = Vec::with_capacity(rows.len());
    for (no, f) in &rows {
        times.push((*no, parse_num(path, *no, &f[0])?));
        samples.push(Complex64::new(parse_num(path, *no, &f[1])?, parse_num(path, *no, &f[2])?));
    }
    let (t0, fs) = uniform_timebase(path, &times)?;
    ComplexEchoSeries::with_start(samples, fs, wavelength, t0)
}

pub fn write_complex_series(series: &ComplexEchoSeries, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(series.len() * 72 + 16);
    out.push_str(ECHO_HEADER);
    out.push('\n');
    for (i, s) in series.samples().iter().enumerate() {
        let t = series.start_time() + i as f64 / series.sample_rate();
        let _ = writeln!(out, "{},{},{}", fmt_f64(t), fmt_f64(s.re), fmt_f64(s.im));
    }
    write_atomic(path, out.as_bytes())
}

/// Reads scored events; the recording length comes from the caller.
pub fn read_annotation(path: &Path, recording_duration: f64) -> Result<ReferenceAnnotation> {
    let rows = match read_rows(path, ANNOTATION_HEADER, 3) {
        // An annotation without events is legitimate.
        Err(Error::Parse { msg, .. }) if msg == "no data rows" => Vec::new(),
        other => other?,
    };
    let mut events = Vec::with_capacity(rows.len());
    for (no, f) in &rows {
        let start = parse_num(path, *no, &f[0])?;
        let end = parse_num(path, *no, &f[1])?;
        if start >= end {
            return Err(parse_err(path, *no, format!("event start {start} is not before end {end}")));
        }
        let kind = ApneaType::from_code(&f[2])?;
        events.push(AnnotatedEvent { start, end, kind });
    }
    ReferenceAnnotation::new(events, recording_duration)
}

pub fn write_annotation(annotation: &ReferenceAnnotation, path: &Path) -> Result<()> {
    let mut out = String::from(ANNOTATION_HEADER);
    out.push('\n');
    for e in &annotation.events {
        let _ = writeln!(out, "{},{},{}", fmt_f64(e.start), fmt_f64(e.end), e.kind.code());
    }
    write_atomic(path, out.as_bytes())
}
