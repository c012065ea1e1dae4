//! Dataset ingestion, strided per-node partitioning and a synthetic drifting
//! stream for desk-scale experiments.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::prototype::{Label, Sample};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("index {index} out of range for a source of {len} rows")]
    OutOfRange { index: usize, len: usize },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        /// Zero-based label column; `None` means the last column.
        label_column: Option<usize>,
    },
    /// Two drifting Gaussian blobs; `length` defaults to the dataset size.
    Synthetic { length: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartIndex {
    Fixed(usize),
    /// Drawn per run, uniform on `[0, source_len - D]`.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub source: DataSource,
    /// Rows used in total, split evenly across nodes.
    pub d_size: usize,
    pub start: StartIndex,
    pub normalize: bool,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic { length: None },
            d_size: 5000,
            start: StartIndex::Fixed(0),
            normalize: true,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self, n_nodes: usize) -> Result<(), DataError> {
        if n_nodes == 0 || self.d_size < 2 * n_nodes {
            return Err(DataError::InvalidSpec(format!(
                "D = {} is too small for {} nodes (need at least 2 rows per node)",
                self.d_size, n_nodes
            )));
        }
        if let DataSource::Synthetic { length: Some(len) } = self.source {
            if len < self.d_size {
                return Err(DataError::InvalidSpec(format!(
                    "synthetic length {len} is shorter than D = {}",
                    self.d_size
                )));
            }
        }
        Ok(())
    }
}

/// `{R + i*N + m | i = 0..S}`, checked against the source length.
pub fn partition_indices(
    m: usize,
    n: usize,
    s: usize,
    r: usize,
    source_len: usize,
) -> Result<Vec<usize>, DataError> {
    if n == 0 || m >= n {
        return Err(DataError::InvalidSpec(format!(
            "node index {m} not below node count {n}"
        )));
    }
    if s == 0 {
        return Err(DataError::InvalidSpec(
            "need at least one sample per node".into(),
        ));
    }
    let last = r + (s - 1) * n + m;
    if last >= source_len {
        return Err(DataError::OutOfRange {
            index: last,
            len: source_len,
        });
    }
    Ok((0..s).map(|i| r + i * n + m).collect())
}

/// Parses a headed, comma-separated file of numeric features and an integer
/// label. Row numbers in errors count data rows from 1.
pub fn read_csv<R: Read>(input: R, label_column: Option<usize>) -> Result<Vec<Sample>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let mut out = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| DataError::Parse {
            row,
            message: e.to_string(),
        })?;
        let cols = rec.len();
        if cols < 2 {
            return Err(DataError::Parse {
                row,
                message: format!("expected at least 2 columns, found {cols}"),
            });
        }
        if *width.get_or_insert(cols) != cols {
            return Err(DataError::Parse {
                row,
                message: format!("expected {} columns, found {cols}", width.unwrap()),
            });
        }
        let label_at = label_column.unwrap_or(cols - 1);
        if label_at >= cols {
            return Err(DataError::Parse {
                row,
                message: format!("label column {label_at} missing"),
            });
        }
        let mut features = Vec::with_capacity(cols - 1);
        let mut label: Label = 0;
        for (c, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if c == label_at {
                label = parse_label(cell).ok_or_else(|| DataError::Parse {
                    row,
                    message: format!("label {cell:?} is not an integer"),
                })?;
            } else {
                let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                    row,
                    message: format!("column {c}: {cell:?} is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(DataError::Parse {
                        row,
                        message: format!("column {c}: non-finite value"),
                    });
                }
                features.push(v);
            }
        }
        out.push(Sample::new(features, label));
    }
    Ok(out)
}

fn parse_label(cell: &str) -> Option<Label> {
    cell.parse::<Label>().ok().or_else(|| {
        let v: f64 = cell.parse().ok()?;
        (v.fract() == 0.0 && v.abs() <= Label::MAX as f64).then_some(v as Label)
    })
}

pub fn read_csv_file(path: &Path, label_column: Option<usize>) -> Result<Vec<Sample>, DataError> {
    let file = File::open(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, label_column)
}

/// Two-class 2-D Gaussian blobs with unit spread; the class means swap at
/// `drift_at`.
pub fn synth_drift_stream<R: Rng + ?Sized>(
    n: usize,
    drift_at: usize,
    rng: &mut R,
) -> Result<Vec<Sample>, DataError> {
    if !(0 < drift_at && drift_at < n) {
        return Err(DataError::InvalidSpec(format!(
            "drift point {drift_at} must lie strictly inside (0, {n})"
        )));
    }
    let noise = Normal::new(0.0, 0.8).expect("valid normal");
    let means = [[-1.0, -1.0], [1.0, 1.0]];
    Ok((0..n)
        .map(|i| {
            let label: Label = rng.random_range(0..2);
            let centre = if i < drift_at {
                means[label as usize]
            } else {
                means[1 - label as usize]
            };
            let features = centre.iter().map(|c| c + noise.sample(rng)).collect();
            Sample::new(features, label)
        })
        .collect())
}

/// Rescales every feature to `[0, 1]`; constant columns map to 0.
pub fn normalize_min_max(samples: &mut [Sample]) {
    let Some(first) = samples.first() else { return };
    let d = first.features.len();
    for c in 0..d {
        let (lo, hi) = samples
            .iter()
            .map(|s| s.features[c])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        for s in samples.iter_mut() {
            s.features[c] = if range > 0.0 {
                (s.features[c] - lo) / range
            } else {
                0.0
            };
        }
    }
}

/// Materialises the full source rows for a spec.
pub fn load_source<R: Rng + ?Sized>(
    spec: &DatasetSpec,
    rng: &mut R,
) -> Result<Vec<Sample>, DataError> {
    match &spec.source {
        DataSource::Csv { path, label_column } => read_csv_file(path, *label_column),
        DataSource::Synthetic { length } => {
            let n = length.unwrap_or(spec.d_size);
            synth_drift_stream(n, n / 2, rng)
        }
    }
}

/// Node `m`'s stream from an already loaded source.
pub fn load_stream(
    spec: &DatasetSpec,
    source: &[Sample],
    m: usize,
    n: usize,
    r: usize,
) -> Result<Vec<Sample>, DataError> {
    let s = spec.d_size / n;
    let idx = partition_indices(m, n, s, r, source.len())?;
    let mut stream: Vec<Sample> = idx.into_iter().map(|i| source[i].clone()).collect();
    if spec.normalize {
        normalize_min_max(&mut stream);
    }
    Ok(stream)
}

/// Resolves the start index, drawing it when random.
pub fn resolve_start<R: Rng + ?Sized>(
    spec: &DatasetSpec,
    source_len: usize,
    rng: &mut R,
) -> Result<usize, DataError> {
    if source_len < spec.d_size {
        return Err(DataError::InvalidSpec(format!(
            "source has {source_len} rows, fewer than D = {}",
            spec.d_size
        )));
    }
    Ok(match spec.start {
        StartIndex::Fixed(r) => r,
        StartIndex::Random => rng.random_range(0..=source_len - spec.d_size),
    })
}

/// Loads the source and returns every node's stream plus the start used.
pub fn load_partitions<R: Rng + ?Sized>(
    spec: &DatasetSpec,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<Sample>>, usize), DataError> {
    spec.validate(n)?;
    let source = load_source(spec, rng)?;
    let r = resolve_start(spec, source.len(), rng)?;
    let streams = (0..n)
        .map(|m| load_stream(spec, &source, m, n, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((streams, r))
}
