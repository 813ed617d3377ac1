//! Airline-passenger series: ingestion, min-max scaling, supervised split
//! and reporting metrics.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observations in the canonical monthly series (1949-01 to 1960-12).
pub const CANONICAL_LEN: usize = 144;
/// Leading observations used for training.
pub const TRAIN_LEN: usize = 96;

/// Path of the bundled canonical dataset.
pub fn bundled_dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/airline-passengers.csv")
}

/// Reads passenger counts from the last field of each CSV record. A header
/// row is tolerated. A series whose length differs from 144 is returned with
/// a logged warning; use [`load_series_strict`] to reject it instead.
pub fn load_series(path: &Path) -> Result<Vec<f64>> {
    let values = read_counts(path)?;
    if values.len() != CANONICAL_LEN {
        log::warn!(
            "{}: expected {CANONICAL_LEN} observations, found {}",
            path.display(),
            values.len()
        );
    }
    Ok(values)
}

pub fn load_series_strict(path: &Path) -> Result<Vec<f64>> {
    let values = read_counts(path)?;
    if values.len() != CANONICAL_LEN {
        return Err(Error::Ingestion {
            path: path.to_owned(),
            row: values.len(),
            message: format!(
                "expected {CANONICAL_LEN} observations, found {}",
                values.len()
            ),
        });
    }
    Ok(values)
}

fn read_counts(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                _ => unreachable!(),
            },
            _ => Error::Csv(e),
        })?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let bad = |message: String| Error::Ingestion {
            path: path.to_owned(),
            row,
            message,
        };
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let last = record.iter().next_back().unwrap_or_default();
        match last.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => values.push(v),
            Ok(v) => return Err(bad(format!("passenger count must be positive, got {v}"))),
            // a non-numeric first row is the header
            Err(_) if row == 1 => continue,
            Err(_) => return Err(bad(format!("cannot parse passenger count {last:?}"))),
        }
    }
    if values.is_empty() {
        return Err(Error::Ingestion {
            path: path.to_owned(),
            row: 0,
            message: "no observations".into(),
        });
    }
    Ok(values)
}

/// Scaling applied before the series enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Min-max over the full series.
    #[default]
    MinMax,
}

/// Min-max scaling with statistics from the whole series.
pub fn normalize(raw: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    if raw.len() < 2 {
        return Err(Error::domain("normalization needs at least two observations"));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(Error::domain("cannot normalize a constant series"));
    }
    let span = max - min;
    Ok((raw.iter().map(|v| (v - min) / span).collect(), min, max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub norm_min: f64,
    pub norm_max: f64,
    pub split_index: usize,
}

impl TimeSeriesDataset {
    pub fn new(raw: Vec<f64>, split_index: usize) -> Result<Self> {
        let (normalized, norm_min, norm_max) = normalize(&raw)?;
        if split_index < 2 || split_index >= raw.len() {
            return Err(Error::domain(format!(
                "split index {split_index} invalid for a series of {}",
                raw.len()
            )));
        }
        Ok(TimeSeriesDataset {
            raw,
            normalized,
            norm_min,
            norm_max,
            split_index,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(load_series(path)?, TRAIN_LEN)
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        denormalize(y, self.norm_min, self.norm_max)
    }
}

pub fn denormalize(y: f64, norm_min: f64, norm_max: f64) -> f64 {
    y * (norm_max - norm_min) + norm_min
}

/// One-step-ahead pairs `(x_t, x_{t+1})` over a contiguous range.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SupervisedPairs {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    /// Series index of each target.
    pub target_index: Vec<usize>,
}

impl SupervisedPairs {
    fn span(series: &[f64], first_input: usize, count: usize) -> Self {
        let mut p = SupervisedPairs::default();
        for t in first_input..first_input + count {
            p.inputs.push(series[t]);
            p.targets.push(series[t + 1]);
            p.target_index.push(t + 1);
        }
        p
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Train pairs use inputs `0..split-1` (targets inside the training
/// segment); test pairs predict every observation from `split` onwards.
pub fn make_supervised(ds: &TimeSeriesDataset) -> (SupervisedPairs, SupervisedPairs) {
    let n = ds.normalized.len();
    let s = ds.split_index;
    let train = SupervisedPairs::span(&ds.normalized, 0, s - 1);
    let test = SupervisedPairs::span(&ds.normalized, s - 1, n - s);
    (train, test)
}

pub fn mse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    if pred.len() != actual.len() || pred.is_empty() {
        return Err(Error::domain(format!(
            "series lengths must match and be nonzero, got {} and {}",
            pred.len(),
            actual.len()
        )));
    }
    let sum: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok(sum / pred.len() as f64)
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    mse(pred, actual).map(f64::sqrt)
}
