//! File format and offline conditioning for synchronized two-detector
//! quadrature time series.
//!
//! The on-disk format is plain text, UTF-8, LF line endings: a `#`-prefixed
//! header block of `key=value` metadata lines, the column header
//! `index,q1,q2`, then one comma-separated row per sample. Numbers are
//! rendered with 17 significant digits so 64-bit values round-trip
//! losslessly. The same sliding threshold rule used by the Monte Carlo
//! module is applied to recorded series, so simulator exports and real
//! recordings postprocess identically.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::montecarlo::{estimate_from_samples, DistillationEstimate, MonteCarloError};

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("metadata field {field} must be positive, got {value}")]
    InvalidMetadata { field: &'static str, value: f64 },
    #[error("description must not contain newlines")]
    MultilineDescription,
    #[error("record indices must be strictly increasing (record {position})")]
    NonMonotoneIndex { position: usize },
    #[error("record {position} holds a non-finite value")]
    NonFiniteValue { position: usize },
    #[error("series of {len} samples is shorter than the trigger window {n_qcp}")]
    SeriesTooShort { len: usize, n_qcp: u32 },
    #[error("trigger threshold must be positive, got {q}")]
    InvalidThreshold { q: f64 },
    #[error(transparent)]
    Estimate(#[from] MonteCarloError),
}

/// One synchronized sample pair from the two homodyne detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureRecord {
    /// Sample ordinal; strictly increasing within a series.
    pub index: u64,
    /// Trigger-detector quadrature value.
    pub q1: f64,
    /// Verification-detector quadrature value.
    pub q2: f64,
}

/// Header metadata of a series file.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMetadata {
    pub sample_rate_hz: f64,
    pub trigger_angle_rad: f64,
    pub verify_angle_rad: f64,
    /// Raw-unit variance of the vacuum calibration recording; dividing the
    /// samples by its square root converts them to shot-noise units.
    pub shot_noise_variance_raw: f64,
    pub description: String,
}

impl SeriesMetadata {
    fn validate(&self) -> Result<(), TimeSeriesError> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(TimeSeriesError::InvalidMetadata {
                field: "sample_rate_hz",
                value: self.sample_rate_hz,
            });
        }
        if !(self.shot_noise_variance_raw > 0.0) {
            return Err(TimeSeriesError::InvalidMetadata {
                field: "shot_noise_variance_raw",
                value: self.shot_noise_variance_raw,
            });
        }
        if self.description.contains('\n') || self.description.contains('\r') {
            return Err(TimeSeriesError::MultilineDescription);
        }
        Ok(())
    }
}

// 17 significant digits: lossless for f64.
fn render(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a series in the plain-text format described in the module docs.
pub fn save_series<W: Write>(
    records: &[QuadratureRecord],
    metadata: &SeriesMetadata,
    writer: W,
) -> Result<(), TimeSeriesError> {
    metadata.validate()?;
    validate_records(records)?;
    let mut w = BufWriter::new(writer);
    writeln!(w, "# sample_rate_hz={}", render(metadata.sample_rate_hz))?;
    writeln!(
        w,
        "# trigger_angle_rad={}",
        render(metadata.trigger_angle_rad)
    )?;
    writeln!(
        w,
        "# verify_angle_rad={}",
        render(metadata.verify_angle_rad)
    )?;
    writeln!(
        w,
        "# shot_noise_variance_raw={}",
        render(metadata.shot_noise_variance_raw)
    )?;
    writeln!(w, "# description={}", metadata.description)?;
    writeln!(w, "index,q1,q2")?;
    for r in records {
        writeln!(w, "{},{},{}", r.index, render(r.q1), render(r.q2))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_series_to_path<P: AsRef<Path>>(
    records: &[QuadratureRecord],
    metadata: &SeriesMetadata,
    path: P,
) -> Result<(), TimeSeriesError> {
    save_series(records, metadata, File::create(path)?)
}

/// Parses a series file, validating the header, monotone indices and
/// finiteness of every value. Errors carry the offending line number.
pub fn load_series<R: Read>(
    reader: R,
) -> Result<(Vec<QuadratureRecord>, SeriesMetadata), TimeSeriesError> {
    let mut lines = BufReader::new(reader).lines().enumerate();

    let mut sample_rate_hz = None;
    let mut trigger_angle_rad = None;
    let mut verify_angle_rad = None;
    let mut shot_noise_variance_raw = None;
    let mut description = String::new();
    let mut header_done_line = None;

    for (i, line) in lines.by_ref() {
        let line = line?;
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_start();
            let (key, value) = rest.split_once('=').ok_or_else(|| TimeSeriesError::Parse {
                line: lineno,
                message: format!("header line is not key=value: {rest:?}"),
            })?;
            let numeric = |slot: &mut Option<f64>| -> Result<(), TimeSeriesError> {
                let parsed = value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| TimeSeriesError::Parse {
                        line: lineno,
                        message: format!("non-numeric value for {key}: {value:?}"),
                    })?;
                *slot = Some(parsed);
                Ok(())
            };
            match key.trim() {
                "sample_rate_hz" => numeric(&mut sample_rate_hz)?,
                "trigger_angle_rad" => numeric(&mut trigger_angle_rad)?,
                "verify_angle_rad" => numeric(&mut verify_angle_rad)?,
                "shot_noise_variance_raw" => numeric(&mut shot_noise_variance_raw)?,
                "description" => description = value.to_string(),
                // Unknown keys are carried by future writers; skip them.
                _ => {}
            }
        } else if line.trim() == "index,q1,q2" {
            header_done_line = Some(lineno);
            break;
        } else {
            return Err(TimeSeriesError::Parse {
                line: lineno,
                message: format!("expected header line or column header, got {line:?}"),
            });
        }
    }

    let missing = |field: &str, lineno| TimeSeriesError::Parse {
        line: lineno,
        message: format!("missing required header field {field}"),
    };
    let header_line = header_done_line.ok_or_else(|| missing("column header 'index,q1,q2'", 0))?;
    let metadata = SeriesMetadata {
        sample_rate_hz: sample_rate_hz.ok_or_else(|| missing("sample_rate_hz", header_line))?,
        trigger_angle_rad: trigger_angle_rad
            .ok_or_else(|| missing("trigger_angle_rad", header_line))?,
        verify_angle_rad: verify_angle_rad
            .ok_or_else(|| missing("verify_angle_rad", header_line))?,
        shot_noise_variance_raw: shot_noise_variance_raw
            .ok_or_else(|| missing("shot_noise_variance_raw", header_line))?,
        description,
    };
    metadata.validate()?;

    let mut records = Vec::new();
    let mut last_index: Option<u64> = None;
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut field = |name: &str| {
            parts.next().ok_or_else(|| TimeSeriesError::Parse {
                line: lineno,
                message: format!("missing field {name}"),
            })
        };
        let index: u64 = field("index")?
            .trim()
            .parse()
            .map_err(|_| TimeSeriesError::Parse {
                line: lineno,
                message: "non-integer index".into(),
            })?;
        let q1: f64 = field("q1")?
            .trim()
            .parse()
            .map_err(|_| TimeSeriesError::Parse {
                line: lineno,
                message: "non-numeric q1".into(),
            })?;
        let q2: f64 = field("q2")?
            .trim()
            .parse()
            .map_err(|_| TimeSeriesError::Parse {
                line: lineno,
                message: "non-numeric q2".into(),
            })?;
        if parts.next().is_some() {
            return Err(TimeSeriesError::Parse {
                line: lineno,
                message: "too many fields".into(),
            });
        }
        if !q1.is_finite() || !q2.is_finite() {
            return Err(TimeSeriesError::Parse {
                line: lineno,
                message: format!("non-finite quadrature value in {line:?}"),
            });
        }
        if let Some(prev) = last_index {
            if index <= prev {
                return Err(TimeSeriesError::Parse {
                    line: lineno,
                    message: format!("index {index} not greater than previous {prev}"),
                });
            }
        }
        last_index = Some(index);
        records.push(QuadratureRecord { index, q1, q2 });
    }
    Ok((records, metadata))
}

pub fn load_series_from_path<P: AsRef<Path>>(
    path: P,
) -> Result<(Vec<QuadratureRecord>, SeriesMetadata), TimeSeriesError> {
    load_series(File::open(path)?)
}

/// Converts raw detector values to shot-noise units by dividing through
/// `sqrt(shot_noise_variance_raw)`.
pub fn calibrate(
    records: &[QuadratureRecord],
    metadata: &SeriesMetadata,
) -> Result<Vec<QuadratureRecord>, TimeSeriesError> {
    if !(metadata.shot_noise_variance_raw > 0.0) {
        return Err(TimeSeriesError::InvalidMetadata {
            field: "shot_noise_variance_raw",
            value: metadata.shot_noise_variance_raw,
        });
    }
    let scale = metadata.shot_noise_variance_raw.sqrt().recip();
    Ok(records
        .iter()
        .map(|r| QuadratureRecord {
            index: r.index,
            q1: r.q1 * scale,
            q2: r.q2 * scale,
        })
        .collect())
}

/// Applies the sliding acceptance rule `|q1| < Q` over `n_qcp` consecutive
/// samples (the final index of each qualifying window is accepted) and
/// estimates the distilled variance over accepted `q2`, exactly as the
/// Monte Carlo module does. `q_threshold = None` is the no-threshold
/// sentinel: every candidate is accepted. `seed` drives the bootstrap
/// resampling of the standard error.
pub fn condition_series(
    records: &[QuadratureRecord],
    q_threshold: Option<f64>,
    n_qcp: u32,
    seed: u64,
) -> Result<(Vec<u64>, DistillationEstimate), TimeSeriesError> {
    if n_qcp == 0 || records.len() < n_qcp as usize {
        return Err(TimeSeriesError::SeriesTooShort {
            len: records.len(),
            n_qcp,
        });
    }
    if let Some(q) = q_threshold {
        if !(q > 0.0) {
            return Err(TimeSeriesError::InvalidThreshold { q });
        }
    }
    let window = n_qcp as usize;
    let mut run = 0usize;
    let mut accepted_indices = Vec::new();
    let mut accepted_q2 = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let pass = match q_threshold {
            Some(q) => r.q1.abs() < q,
            None => true,
        };
        if pass {
            run += 1;
        } else {
            run = 0;
        }
        if i + 1 >= window && run >= window {
            accepted_indices.push(r.index);
            accepted_q2.push(r.q2);
        }
    }
    let candidates = (records.len() - window + 1) as u64;
    let estimate = estimate_from_samples(&accepted_q2, candidates, seed)?;
    Ok((accepted_indices, estimate))
}

fn validate_records(records: &[QuadratureRecord]) -> Result<(), TimeSeriesError> {
    let mut last: Option<u64> = None;
    for (position, r) in records.iter().enumerate() {
        if !r.q1.is_finite() || !r.q2.is_finite() {
            return Err(TimeSeriesError::NonFiniteValue { position });
        }
        if let Some(prev) = last {
            if r.index <= prev {
                return Err(TimeSeriesError::NonMonotoneIndex { position });
            }
        }
        last = Some(r.index);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metadata() -> SeriesMetadata {
        SeriesMetadata {
            sample_rate_hz: 100_000.0,
            trigger_angle_rad: 0.0,
            verify_angle_rad: 0.0,
            shot_noise_variance_raw: 1.0,
            description: "unit test".into(),
        }
    }

    fn sample_records() -> Vec<QuadratureRecord> {
        vec![
            QuadratureRecord {
                index: 0,
                q1: 0.5,
                q2: -0.25,
            },
            QuadratureRecord {
                index: 1,
                q1: -1.75,
                q2: 0.125,
            },
            QuadratureRecord {
                index: 2,
                q1: 0.062_499_999_999_999_9,
                q2: 3.3,
            },
        ]
    }

    #[test]
    fn round_trip_is_lossless() {
        let records = sample_records();
        let mut buf = Vec::new();
        save_series(&records, &metadata(), &mut buf).unwrap();
        let (loaded, meta) = load_series(buf.as_slice()).unwrap();
        assert_eq!(loaded, records);
        assert_eq!(meta, metadata());
    }

    #[test]
    fn empty_data_section_is_valid() {
        let mut buf = Vec::new();
        save_series(&[], &metadata(), &mut buf).unwrap();
        let (loaded, meta) = load_series(buf.as_slice()).unwrap();
        assert!(loaded.is_empty());
        assert_eq!(meta, metadata());
    }

    #[test]
    fn nan_is_rejected_with_line_number() {
        let text = "# sample_rate_hz=1e5\n# trigger_angle_rad=0\n# verify_angle_rad=0\n\
                    # shot_noise_variance_raw=1\nindex,q1,q2\n0,NaN,0.5\n";
        match load_series(text.as_bytes()) {
            Err(TimeSeriesError::Parse { line, message }) => {
                assert_eq!(line, 6);
                assert!(message.contains("non-finite"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn garbled_rows_are_rejected() {
        let header = "# sample_rate_hz=1e5\n# trigger_angle_rad=0\n# verify_angle_rad=0\n\
                      # shot_noise_variance_raw=1\nindex,q1,q2\n";
        for (bad, what) in [
            ("5,abc,0.1\n", "non-numeric q1"),
            ("5,0.1\n", "missing field"),
            ("5,0.1,0.2,0.3\n", "too many fields"),
            ("x,0.1,0.2\n", "non-integer index"),
        ] {
            let text = format!("{header}{bad}");
            match load_series(text.as_bytes()) {
                Err(TimeSeriesError::Parse { line: 6, message }) => {
                    assert!(
                        message.contains(what.split(' ').next().unwrap()),
                        "{message}"
                    )
                }
                other => panic!("expected line-6 parse error for {bad:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn non_monotone_indices_rejected() {
        let text = "# sample_rate_hz=1e5\n# trigger_angle_rad=0\n# verify_angle_rad=0\n\
                    # shot_noise_variance_raw=1\nindex,q1,q2\n0,0.1,0.2\n0,0.3,0.4\n";
        assert!(matches!(
            load_series(text.as_bytes()),
            Err(TimeSeriesError::Parse { line: 7, .. })
        ));
    }

    #[test]
    fn missing_header_field_is_reported() {
        let text = "# sample_rate_hz=1e5\nindex,q1,q2\n";
        match load_series(text.as_bytes()) {
            Err(TimeSeriesError::Parse { message, .. }) => {
                assert!(message.contains("trigger_angle_rad"), "{message}")
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn calibration_identity_and_scaling() {
        let records = sample_records();
        let meta = metadata();
        assert_eq!(calibrate(&records, &meta).unwrap(), records);

        let mut raw4 = meta.clone();
        raw4.shot_noise_variance_raw = 4.0;
        let halved = calibrate(&records, &raw4).unwrap();
        for (r, h) in records.iter().zip(&halved) {
            assert_eq!(h.q1, r.q1 / 2.0);
            assert_eq!(h.q2, r.q2 / 2.0);
        }

        let mut bad = meta;
        bad.shot_noise_variance_raw = 0.0;
        assert!(matches!(
            calibrate(&records, &bad),
            Err(TimeSeriesError::InvalidMetadata { .. })
        ));
    }

    #[test]
    fn no_threshold_accepts_all() {
        let records: Vec<QuadratureRecord> = (0..64)
            .map(|i| QuadratureRecord {
                index: i,
                q1: (i as f64).sin() * 3.0,
                q2: i as f64 % 2.0,
            })
            .collect();
        let (indices, est) = condition_series(&records, None, 1, 0).unwrap();
        assert_eq!(indices.len(), 64);
        assert_eq!(est.p_hat, 1.0);
        let q2: Vec<f64> = records.iter().map(|r| r.q2).collect();
        let mean = q2.iter().sum::<f64>() / 64.0;
        let var = q2.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 63.0;
        assert!((est.v_out_hat - var).abs() < 1e-14);
    }

    #[test]
    fn single_window_acceptance_set() {
        let records: Vec<QuadratureRecord> = [0.5, 1.5, -0.2, 0.9, -2.0]
            .iter()
            .enumerate()
            .map(|(i, &q1)| QuadratureRecord {
                index: i as u64,
                q1,
                q2: 0.1 * i as f64,
            })
            .collect();
        let (indices, _) = condition_series(&records, Some(1.0), 1, 0).unwrap();
        assert_eq!(indices, vec![0, 2, 3]);
    }

    #[test]
    fn alternating_series_never_fires_deep_window() {
        let records: Vec<QuadratureRecord> = (0..32)
            .map(|i| QuadratureRecord {
                index: i,
                q1: if i % 2 == 0 { 0.1 } else { 5.0 },
                q2: 0.3,
            })
            .collect();
        match condition_series(&records, Some(1.0), 4, 0) {
            Err(TimeSeriesError::Estimate(MonteCarloError::NoAcceptedTrials)) => {}
            other => panic!("expected no accepted samples, got {other:?}"),
        }
    }

    #[test]
    fn window_deeper_than_series_is_an_error() {
        let records = sample_records();
        assert!(matches!(
            condition_series(&records, Some(1.0), 8, 0),
            Err(TimeSeriesError::SeriesTooShort { len: 3, n_qcp: 8 })
        ));
    }

    #[test]
    fn qcp_acceptance_is_subset_of_plain() {
        let records: Vec<QuadratureRecord> = (0..128)
            .map(|i| QuadratureRecord {
                index: i,
                q1: ((i * 37 % 17) as f64 - 8.0) / 6.0,
                q2: (i as f64 * 0.611).sin(),
            })
            .collect();
        let (one, _) = condition_series(&records, Some(1.0), 1, 0).unwrap();
        let (two, _) = condition_series(&records, Some(1.0), 2, 0).unwrap();
        for idx in &two {
            assert!(one.contains(idx));
        }
    }
}
