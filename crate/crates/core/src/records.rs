//! Prediction records and their line-delimited file format.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Error text prefixes that classify failed records.
pub mod failure {
    /// The endpoint could not produce a completion; retried on resume.
    pub const TRANSPORT: &str = "transport";
    /// A completion arrived but held no number.
    pub const UNPARSEABLE: &str = "unparseable completion";
    /// The predictor has nothing to say (e.g. 1-NN with no demonstrations).
    pub const NO_PREDICTION: &str = "no prediction";
    pub const LOOKUP: &str = "lookup";
    pub const NUMERICAL: &str = "numerical";
}

/// One prediction for one `(episode, n)` task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub predictor_id: String,
    pub episode_id: String,
    pub n: usize,
    pub x_star: Vec<f64>,
    pub y_hat: Option<f64>,
    pub y_target: f64,
    pub raw_text: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub predictor_id: String,
    pub episode_id: String,
    pub n: usize,
}

impl PredictionRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            predictor_id: self.predictor_id.clone(),
            episode_id: self.episode_id.clone(),
            n: self.n,
        }
    }

    /// `|ŷ − ỹ|` when a finite prediction exists.
    pub fn abs_error(&self) -> Option<f64> {
        self.y_hat.filter(|v| v.is_finite()).map(|v| (v - self.y_target).abs())
    }

    pub fn is_success(&self) -> bool {
        self.abs_error().is_some()
    }

    /// Failed for a reason a rerun might fix.
    pub fn is_retryable(&self) -> bool {
        self.error.as_deref().is_some_and(|e| e.starts_with(failure::TRANSPORT))
    }

    pub fn is_unparseable(&self) -> bool {
        self.error.as_deref() == Some(failure::UNPARSEABLE)
    }
}

pub fn parse_records(text: &str, source: &str) -> Result<Vec<PredictionRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: source.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_records(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, &path.display().to_string())
}

/// Like [`read_records`], but drops a final line that was cut off
/// mid-write (no trailing newline and not valid JSON).
pub fn read_records_for_resume(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let complete = match text.rfind('\n') {
        Some(i) if i + 1 < text.len() => {
            let tail = &text[i + 1..];
            if serde_json::from_str::<PredictionRecord>(tail).is_ok() {
                &text[..]
            } else {
                &text[..=i]
            }
        }
        Some(_) => &text[..],
        None if serde_json::from_str::<PredictionRecord>(&text).is_ok() => &text[..],
        None => "",
    };
    parse_records(complete, &path.display().to_string())
}

pub fn record_line(record: &PredictionRecord) -> Result<String> {
    let mut s = serde_json::to_string(record)?;
    s.push('\n');
    Ok(s)
}

pub fn write_records(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&record_line(r)?);
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Appends records one line at a time, flushing after each so an
/// interrupted run leaves only whole records behind.
pub struct RecordWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RecordWriter {
    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    pub fn write(&mut self, record: &PredictionRecord) -> Result<()> {
        let line = record_line(record)?;
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Keys whose latest record is final (not retryable).
pub fn completed_keys(records: &[PredictionRecord]) -> HashSet<RecordKey> {
    records.iter().filter(|r| !r.is_retryable()).map(PredictionRecord::key).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, y_hat: Option<f64>, error: Option<&str>) -> PredictionRecord {
        PredictionRecord {
            predictor_id: "p".into(),
            episode_id: "ep00000".into(),
            n,
            x_star: vec![1.0],
            y_hat,
            y_target: 0.5,
            raw_text: String::new(),
            error: error.map(String::from),
        }
    }

    #[test]
    fn abs_error_and_status() {
        assert_eq!(rec(0, Some(0.25), None).abs_error(), Some(0.25));
        assert_eq!(rec(0, None, Some(failure::UNPARSEABLE)).abs_error(), None);
        assert!(rec(0, None, Some("transport: refused")).is_retryable());
        assert!(!rec(0, None, Some(failure::UNPARSEABLE)).is_retryable());
        assert_eq!(rec(0, Some(f64::INFINITY), None).abs_error(), None);
    }

    #[test]
    fn truncated_tail_is_dropped_on_resume() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let full = format!(
            "{}{}",
            record_line(&rec(0, Some(0.1), None)).unwrap(),
            record_line(&rec(1, Some(0.2), None)).unwrap()
        );
        std::fs::write(&path, &full[..full.len() - 10]).unwrap();
        assert!(read_records(&path).is_err());
        let kept = read_records_for_resume(&path).unwrap();
        assert_eq!(kept.len(), 1);
        std::fs::write(&path, &full[..full.len() - 1]).unwrap();
        assert_eq!(read_records_for_resume(&path).unwrap().len(), 2);
    }

    #[test]
    fn null_fields_round_trip() {
        let r = rec(3, None, Some(failure::UNPARSEABLE));
        let line = record_line(&r).unwrap();
        assert!(line.contains("\"y_hat\":null"));
        assert_eq!(parse_records(&line, "x").unwrap(), vec![r]);
    }
}
