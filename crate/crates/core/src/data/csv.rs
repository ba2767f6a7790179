//! CSV recordings: header `ch1,…,chN,subject,trial`, one time point per row.
//!
//! CSV carries no sampling rate, so a directory of CSV files comes with a
//! `manifest.json` of the form `{"name": …, "rate_hz": …, "channels": …}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::signal::Recording;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub rate_hz: f64,
    pub channels: usize,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest, DataError> {
        let text = fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| DataError::Manifest {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if !(m.rate_hz > 0.0 && m.rate_hz.is_finite()) || m.channels == 0 {
            return Err(DataError::Manifest {
                path: path.display().to_string(),
                message: "rate_hz must be positive and channels at least 1".into(),
            });
        }
        Ok(m)
    }
}

fn parse_header(path: &str, header: &::csv::StringRecord) -> Result<usize, DataError> {
    let fields: Vec<&str> = header.iter().map(str::trim).collect();
    let err = |message: String| DataError::Csv {
        path: path.to_string(),
        line: 1,
        message,
    };
    if fields.len() < 3 {
        return Err(err(format!(
            "header has {} columns, need ch1..chN,subject,trial",
            fields.len()
        )));
    }
    let n = fields.len() - 2;
    for (i, f) in fields[..n].iter().enumerate() {
        if *f != format!("ch{}", i + 1) {
            return Err(err(format!(
                "unknown header column `{f}`, expected `ch{}`",
                i + 1
            )));
        }
    }
    if fields[n] != "subject" || fields[n + 1] != "trial" {
        return Err(err(format!(
            "unknown header columns `{}`,`{}`, expected `subject`,`trial`",
            fields[n],
            fields[n + 1]
        )));
    }
    Ok(n)
}

/// Read one CSV file into one raw recording per `(subject, trial)` group,
/// ordered by subject then trial.
pub fn load_csv(path: &Path, rate_hz: f64) -> Result<Vec<Recording>, DataError> {
    let shown = path.display().to_string();
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| DataError::Csv {
            path: shown.clone(),
            line: 0,
            message: e.to_string(),
        })?;
    let header = reader.headers().map_err(|e| DataError::Csv {
        path: shown.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    let n = parse_header(&shown, &header.clone())?;

    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Csv {
            path: shown.clone(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| DataError::Csv {
            path: shown.clone(),
            line,
            message,
        };
        if record.len() != n + 2 {
            return Err(bad(format!(
                "expected {} fields, found {}",
                n + 2,
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(n);
        for (c, field) in record.iter().take(n).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| bad(format!("ch{} value `{field}` is not a number", c + 1)))?;
            if !v.is_finite() {
                return Err(bad(format!("ch{} value `{field}` is not finite", c + 1)));
            }
            values.push(v);
        }
        let label = |idx: usize, name: &str| -> Result<usize, DataError> {
            let f = record[idx].trim();
            f.parse()
                .map_err(|_| bad(format!("{name} `{f}` is not a non-negative integer")))
        };
        let subject = label(n, "subject")?;
        let trial = label(n + 1, "trial")?;
        groups.entry((subject, trial)).or_default().extend(values);
    }
    if groups.is_empty() {
        return Err(DataError::NoSamples { path: shown });
    }
    groups
        .into_iter()
        .map(|((subject, trial), flat)| {
            let rows = flat.len() / n;
            let samples = Array2::from_shape_vec((rows, n), flat).expect("rows of equal arity");
            Ok(Recording::new(samples, rate_hz, subject, trial)?)
        })
        .collect()
}

/// Write recordings in the CSV layout read by [`load_csv`]. Values are written
/// in shortest round-trip form, so reading back is lossless.
pub fn write_csv(path: &Path, recordings: &[Recording]) -> Result<(), DataError> {
    let channels = recordings.first().map_or(0, Recording::channels);
    let mut out = String::new();
    for c in 1..=channels {
        let _ = write!(out, "ch{c},");
    }
    out.push_str("subject,trial\n");
    for rec in recordings {
        for row in rec.samples().rows() {
            for v in row {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{},{}", rec.subject, rec.trial);
        }
    }
    fs::write(path, out).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load every `*.csv` file of a dataset directory (sorted by file name) using
/// the rate from its manifest.
pub fn load_csv_dir(dir: &Path) -> Result<(Manifest, Vec<Recording>), DataError> {
    let manifest = Manifest::load(&dir.join(MANIFEST_FILE))?;
    let entries = fs::read_dir(dir).map_err(|source| DataError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(DataError::NoSamples {
            path: dir.display().to_string(),
        });
    }
    let mut recordings = Vec::new();
    for file in &files {
        for rec in load_csv(file, manifest.rate_hz)? {
            if rec.channels() != manifest.channels {
                return Err(DataError::Manifest {
                    path: file.display().to_string(),
                    message: format!(
                        "file has {} channels, manifest declares {}",
                        rec.channels(),
                        manifest.channels
                    ),
                });
            }
            recordings.push(rec);
        }
    }
    Ok((manifest, recordings))
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), DataError> {
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}
