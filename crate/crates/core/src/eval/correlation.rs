use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::substream;
use crate::signal::{decompose, BandName, Recording};

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::Shape(format!(
            "pearson on lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(EvalError::Undefined("fewer than two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::Undefined("constant input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationConfig {
    pub window_len: usize,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        CorrelationConfig {
            window_len: 128,
            pairs: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandCorrelation {
    pub band: BandName,
    /// Mean |r| per subject, in the order of [`CorrelationTable::subjects`].
    pub per_subject: Vec<f64>,
    /// Population standard deviation of `per_subject`.
    pub std: f64,
    pub average: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub subjects: Vec<usize>,
    pub bands: Vec<BandCorrelation>,
    pub config: CorrelationConfig,
}

impl CorrelationTable {
    pub fn band(&self, name: BandName) -> Option<&BandCorrelation> {
        self.bands.iter().find(|b| b.band == name)
    }

    /// Band with the lowest average coefficient.
    pub fn lowest(&self) -> Option<BandName> {
        self.bands
            .iter()
            .min_by(|a, b| a.average.total_cmp(&b.average))
            .map(|b| b.band)
    }

    /// Subjects as rows, bands as columns, then STD and average rows.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:<10}", "subject");
        for b in &self.bands {
            write!(out, "{:>8}", b.band.as_str()).unwrap();
        }
        out.push('\n');
        for (i, s) in self.subjects.iter().enumerate() {
            write!(out, "{:<10}", s).unwrap();
            for b in &self.bands {
                write!(out, "{:>8.3}", b.per_subject[i]).unwrap();
            }
            out.push('\n');
        }
        for (label, pick) in [("std", 0), ("average", 1)] {
            write!(out, "{label:<10}").unwrap();
            for b in &self.bands {
                write!(out, "{:>8.3}", if pick == 0 { b.std } else { b.average }).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Mean absolute Pearson coefficient between each subject and the others.
///
/// `recordings` must be preprocessed; every subject may contribute several.
/// For each band and subject, `pairs` draws pick another subject, one
/// recording of each, a channel and a window start shared by both signals.
pub fn inter_subject_correlation(
    recordings: &[Recording],
    bands: &[BandName],
    config: &CorrelationConfig,
) -> Result<CorrelationTable, EvalError> {
    let mut by_subject: BTreeMap<usize, Vec<&Recording>> = BTreeMap::new();
    for r in recordings {
        by_subject.entry(r.subject).or_default().push(r);
    }
    if by_subject.len() < 2 {
        return Err(EvalError::Undefined(format!(
            "need at least two subjects, found {}",
            by_subject.len()
        )));
    }
    if config.window_len < 2 || config.pairs == 0 {
        return Err(EvalError::Shape(
            "window_len must be ≥ 2 and pairs ≥ 1".into(),
        ));
    }
    let channels = recordings[0].channels();
    if let Some(r) = recordings.iter().find(|r| r.channels() != channels) {
        return Err(EvalError::Shape(format!(
            "subject {} trial {} has {} channels, expected {channels}",
            r.subject,
            r.trial,
            r.channels()
        )));
    }
    if let Some(r) = recordings.iter().find(|r| r.len() < config.window_len) {
        return Err(EvalError::Shape(format!(
            "window of {} samples is longer than subject {} trial {} ({} samples)",
            config.window_len,
            r.subject,
            r.trial,
            r.len()
        )));
    }
    let subjects: Vec<usize> = by_subject.keys().copied().collect();

    let mut rows = Vec::with_capacity(bands.len());
    for &band in bands {
        let filtered: Vec<Vec<Recording>> = by_subject
            .values()
            .map(|recs| {
                recs.iter()
                    .map(|r| decompose(r, band))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let mut per_subject = Vec::with_capacity(subjects.len());
        for (si, &subject) in subjects.iter().enumerate() {
            let mut rng = substream(config.seed, &format!("correlate/{band}/{subject}"));
            let mut total = 0.0;
            for _ in 0..config.pairs {
                let mut oi = rng.random_range(0..subjects.len() - 1);
                if oi >= si {
                    oi += 1;
                }
                let a = &filtered[si][rng.random_range(0..filtered[si].len())];
                let b = &filtered[oi][rng.random_range(0..filtered[oi].len())];
                let ch = rng.random_range(0..channels);
                let span = a.len().min(b.len()) - config.window_len;
                let start = rng.random_range(0..=span);
                let end = start + config.window_len;
                let x: Vec<f64> = a
                    .samples()
                    .column(ch)
                    .slice(ndarray::s![start..end])
                    .to_vec();
                let y: Vec<f64> = b
                    .samples()
                    .column(ch)
                    .slice(ndarray::s![start..end])
                    .to_vec();
                let r = pearson(&x, &y).map_err(|e| {
                    EvalError::Undefined(format!(
                        "{band} band, subjects {subject}/{} channel {ch} window {start}: {e}",
                        subjects[oi]
                    ))
                })?;
                total += r.abs();
            }
            per_subject.push(total / config.pairs as f64);
        }
        let n = per_subject.len() as f64;
        let average = per_subject.iter().sum::<f64>() / n;
        let std = (per_subject
            .iter()
            .map(|v| (v - average).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        rows.push(BandCorrelation {
            band,
            per_subject,
            std,
            average,
        });
    }
    Ok(CorrelationTable {
        subjects,
        bands: rows,
        config: config.clone(),
    })
}
