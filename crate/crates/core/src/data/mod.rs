//! Dataset ingestion, sample assembly and splitting.

pub mod csv;
pub mod edf;
pub mod synth;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::signal::Recording;

pub use self::csv::{load_csv, load_csv_dir, write_csv, write_manifest, Manifest, MANIFEST_FILE};
pub use self::edf::{eegmmidb_path, load_edf, load_eegmmidb, EdfFile, EdfSelection};
pub use self::synth::{synth_generate, SyntheticSpec};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Csv {
        path: String,
        line: u64,
        message: String,
    },
    #[error("{path}: no samples")]
    NoSamples { path: String },
    #[error("manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("EDF field `{field}` at byte {offset}: {message}")]
    Edf {
        field: String,
        offset: usize,
        message: String,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid split: {0}")]
    Split(String),
    #[error("invalid sample set: {0}")]
    Invalid(String),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
}

/// Where a sample set came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub band: String,
    pub stage: String,
}

/// Classification samples: one row per sample, one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub provenance: Provenance,
}

impl SampleSet {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: usize,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        if features.nrows() != labels.len() {
            return Err(DataError::Invalid(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(DataError::LabelOutOfRange {
                label,
                classes: num_classes,
            });
        }
        Ok(SampleSet {
            features,
            labels,
            num_classes,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        SampleSet {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            provenance: self.provenance.clone(),
        }
    }
}

/// Turn recordings into samples. With `seq_len = 1` every time point is one
/// sample; with `seq_len = L` a sample is `L` consecutive time points
/// concatenated (time-major), one per time point from index `L-1` on.
pub fn assemble(
    recordings: &[Recording],
    seq_len: usize,
    num_classes: usize,
    provenance: Provenance,
) -> Result<SampleSet, DataError> {
    if seq_len == 0 {
        return Err(DataError::Invalid("seq_len must be at least 1".into()));
    }
    let channels = match recordings.first() {
        Some(r) => r.channels(),
        None => return Err(DataError::Invalid("no recordings".into())),
    };
    if let Some(r) = recordings.iter().find(|r| r.channels() != channels) {
        return Err(DataError::Invalid(format!(
            "recording for subject {} has {} channels, expected {channels}",
            r.subject,
            r.channels()
        )));
    }
    let rows: usize = recordings
        .iter()
        .map(|r| (r.len() + 1).saturating_sub(seq_len))
        .sum();
    let mut features = Array2::zeros((rows, channels * seq_len));
    let mut labels = Vec::with_capacity(rows);
    let mut row = 0;
    for rec in recordings {
        let s = rec.samples();
        for end in (seq_len - 1)..rec.len() {
            let mut out = features.row_mut(row);
            for step in 0..seq_len {
                let t = end + 1 - seq_len + step;
                for c in 0..channels {
                    out[step * channels + c] = s[[t, c]];
                }
            }
            labels.push(rec.subject);
            row += 1;
        }
    }
    SampleSet::new(features, labels, num_classes, provenance)
}

/// Seeded uniform shuffle of `0..n` cut into `(train, test)` index lists.
pub fn split_indices(
    n: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DataError::Split(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(DataError::Split(format!(
            "fraction {test_fraction} of {n} samples leaves an empty side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut crate::rng::substream(seed, "split"));
    let test = order[..n_test].to_vec();
    let train = order[n_test..].to_vec();
    Ok((train, test))
}

pub fn split(
    set: &SampleSet,
    test_fraction: f64,
    seed: u64,
) -> Result<(SampleSet, SampleSet), DataError> {
    let (train, test) = split_indices(set.len(), test_fraction, seed)?;
    Ok((set.select(&train), set.select(&test)))
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<Array2<f64>, DataError> {
    let mut out = Array2::zeros((labels.len(), num_classes));
    for (i, &l) in labels.iter().enumerate() {
        if l >= num_classes {
            return Err(DataError::LabelOutOfRange {
                label: l,
                classes: num_classes,
            });
        }
        out[[i, l]] = 1.0;
    }
    Ok(out)
}
