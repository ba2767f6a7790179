//! Minimal classic EDF reader and writer.
//!
//! Layout: a 256-byte fixed ASCII header, 256 bytes of ASCII per signal, then
//! `n_records` data records. Each record holds, signal after signal,
//! `samples_per_record` 16-bit little-endian two's-complement samples.
//! EDF+ annotation signals are skipped on load.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::signal::Recording;

const FIXED_HEADER: usize = 256;
const PER_SIGNAL: usize = 256;
const ANNOTATION_LABEL: &str = "EDF Annotations";

/// Fixed header fields with their widths, in file order.
const HEADER_FIELDS: [(&str, usize); 10] = [
    ("version", 8),
    ("patient", 80),
    ("recording", 80),
    ("start_date", 8),
    ("start_time", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
];

/// Per-signal fields with their widths. Each is stored for all signals before
/// the next field starts.
const SIGNAL_FIELDS: [(&str, usize); 10] = [
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("signal_reserved", 32),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdfHeader {
    pub version: String,
    pub patient: String,
    pub recording: String,
    pub start_date: String,
    pub start_time: String,
    pub reserved: String,
    pub n_records: usize,
    pub record_duration_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdfSignal {
    pub label: String,
    pub transducer: String,
    pub physical_dimension: String,
    pub physical_min: f64,
    pub physical_max: f64,
    pub digital_min: i32,
    pub digital_max: i32,
    pub prefiltering: String,
    pub samples_per_record: usize,
    /// Every digital sample of this signal, records concatenated.
    pub digital: Vec<i16>,
}

impl EdfSignal {
    pub fn gain(&self) -> f64 {
        (self.physical_max - self.physical_min) / f64::from(self.digital_max - self.digital_min)
    }

    pub fn is_annotation(&self) -> bool {
        self.label.trim() == ANNOTATION_LABEL
    }

    pub fn physical(&self) -> impl Iterator<Item = f64> + '_ {
        let gain = self.gain();
        let (dmin, pmin) = (f64::from(self.digital_min), self.physical_min);
        self.digital
            .iter()
            .map(move |&d| (f64::from(d) - dmin) * gain + pmin)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdfFile {
    pub header: EdfHeader,
    pub signals: Vec<EdfSignal>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn field(&mut self, name: &str, width: usize) -> Result<&'a str, DataError> {
        let start = self.offset;
        let end = start + width;
        let raw = self.bytes.get(start..end).ok_or_else(|| DataError::Edf {
            field: name.to_string(),
            offset: start,
            message: format!("header truncated ({} bytes available)", self.bytes.len()),
        })?;
        if let Some(pos) = raw.iter().position(|b| !(0x20..=0x7e).contains(b)) {
            return Err(DataError::Edf {
                field: name.to_string(),
                offset: start + pos,
                message: format!("non-ASCII byte 0x{:02x}", raw[pos]),
            });
        }
        self.offset = end;
        Ok(std::str::from_utf8(raw)
            .expect("printable ASCII")
            .trim_end())
    }

    fn number<T: std::str::FromStr>(&mut self, name: &str, width: usize) -> Result<T, DataError> {
        let start = self.offset;
        let text = self.field(name, width)?;
        text.trim().parse().map_err(|_| DataError::Edf {
            field: name.to_string(),
            offset: start,
            message: format!("`{}` is not a valid number", text.trim()),
        })
    }
}

impl EdfFile {
    pub fn parse(bytes: &[u8]) -> Result<EdfFile, DataError> {
        let mut cur = Cursor { bytes, offset: 0 };
        let version = cur.field("version", 8)?.to_string();
        let patient = cur.field("patient", 80)?.to_string();
        let recording = cur.field("recording", 80)?.to_string();
        let start_date = cur.field("start_date", 8)?.to_string();
        let start_time = cur.field("start_time", 8)?.to_string();
        let header_offset = cur.offset;
        let header_bytes: usize = cur.number("header_bytes", 8)?;
        let reserved = cur.field("reserved", 44)?.to_string();
        let records_offset = cur.offset;
        let n_records: i64 = cur.number("n_records", 8)?;
        let duration_offset = cur.offset;
        let record_duration_s: f64 = cur.number("record_duration", 8)?;
        let signals_offset = cur.offset;
        let n_signals: usize = cur.number("n_signals", 4)?;

        if n_records < 0 {
            return Err(DataError::Edf {
                field: "n_records".into(),
                offset: records_offset,
                message: format!("record count {n_records} is not supported"),
            });
        }
        let n_records = n_records as usize;
        if !(record_duration_s > 0.0 && record_duration_s.is_finite()) {
            return Err(DataError::Edf {
                field: "record_duration".into(),
                offset: duration_offset,
                message: format!("record duration must be positive, got {record_duration_s}"),
            });
        }
        if n_signals == 0 {
            return Err(DataError::Edf {
                field: "n_signals".into(),
                offset: signals_offset,
                message: "file declares no signals".into(),
            });
        }
        let expected_header = FIXED_HEADER + PER_SIGNAL * n_signals;
        if header_bytes != expected_header {
            return Err(DataError::Edf {
                field: "header_bytes".into(),
                offset: header_offset,
                message: format!(
                    "declares {header_bytes} bytes, {n_signals} signals need {expected_header}"
                ),
            });
        }

        let read_all =
            |cur: &mut Cursor<'_>, name: &str, width: usize| -> Result<Vec<String>, DataError> {
                (0..n_signals)
                    .map(|_| cur.field(name, width).map(|s| s.trim().to_string()))
                    .collect()
            };
        let num_all = |cur: &mut Cursor<'_>,
                       name: &str,
                       width: usize|
         -> Result<Vec<(usize, f64)>, DataError> {
            (0..n_signals)
                .map(|_| {
                    let at = cur.offset;
                    cur.number::<f64>(name, width).map(|v| (at, v))
                })
                .collect()
        };
        let labels = read_all(&mut cur, "label", 16)?;
        let transducers = read_all(&mut cur, "transducer", 80)?;
        let dims = read_all(&mut cur, "physical_dimension", 8)?;
        let pmins = num_all(&mut cur, "physical_min", 8)?;
        let pmaxs = num_all(&mut cur, "physical_max", 8)?;
        let dmins = num_all(&mut cur, "digital_min", 8)?;
        let dmaxs = num_all(&mut cur, "digital_max", 8)?;
        let prefilters = read_all(&mut cur, "prefiltering", 80)?;
        let sprs = num_all(&mut cur, "samples_per_record", 8)?;
        read_all(&mut cur, "signal_reserved", 32)?;

        let mut signals = Vec::with_capacity(n_signals);
        for i in 0..n_signals {
            let int_field = |(at, v): (usize, f64), name: &str| -> Result<i32, DataError> {
                if v.fract() != 0.0 || v < f64::from(i16::MIN) || v > f64::from(i16::MAX) {
                    return Err(DataError::Edf {
                        field: name.into(),
                        offset: at,
                        message: format!("signal {i}: {v} is not a 16-bit integer"),
                    });
                }
                Ok(v as i32)
            };
            let digital_min = int_field(dmins[i], "digital_min")?;
            let digital_max = int_field(dmaxs[i], "digital_max")?;
            if digital_min >= digital_max {
                return Err(DataError::Edf {
                    field: "digital_min".into(),
                    offset: dmins[i].0,
                    message: format!(
                        "signal {i}: digital min {digital_min} ≥ digital max {digital_max}"
                    ),
                });
            }
            let (spr_at, spr) = sprs[i];
            if spr.fract() != 0.0 || spr < 1.0 {
                return Err(DataError::Edf {
                    field: "samples_per_record".into(),
                    offset: spr_at,
                    message: format!("signal {i}: invalid sample count {spr}"),
                });
            }
            let (pmin, pmax) = (pmins[i].1, pmaxs[i].1);
            if pmin == pmax {
                return Err(DataError::Edf {
                    field: "physical_min".into(),
                    offset: pmins[i].0,
                    message: format!("signal {i}: physical min equals physical max"),
                });
            }
            signals.push(EdfSignal {
                label: labels[i].clone(),
                transducer: transducers[i].clone(),
                physical_dimension: dims[i].clone(),
                physical_min: pmin,
                physical_max: pmax,
                digital_min,
                digital_max,
                prefiltering: prefilters[i].clone(),
                samples_per_record: spr as usize,
                digital: Vec::with_capacity(spr as usize * n_records),
            });
        }

        let record_samples: usize = signals.iter().map(|s| s.samples_per_record).sum();
        let payload = &bytes[expected_header..];
        let needed = record_samples * 2 * n_records;
        if payload.len() != needed {
            let complete = payload.len() / (record_samples * 2);
            return Err(DataError::Edf {
                field: "data_records".into(),
                offset: expected_header + complete * record_samples * 2,
                message: format!(
                    "declared {n_records} records ({needed} bytes) but payload has {} bytes",
                    payload.len()
                ),
            });
        }
        let mut words = payload
            .chunks_exact(2)
            .map(|w| i16::from_le_bytes([w[0], w[1]]));
        for _ in 0..n_records {
            for s in signals.iter_mut() {
                s.digital.extend(words.by_ref().take(s.samples_per_record));
            }
        }

        Ok(EdfFile {
            header: EdfHeader {
                version,
                patient,
                recording,
                start_date,
                start_time,
                reserved,
                n_records,
                record_duration_s,
            },
            signals,
        })
    }

    /// Serialize to EDF bytes (space-padded ASCII header, LE payload).
    pub fn to_bytes(&self) -> Vec<u8> {
        let ns = self.signals.len();
        let mut out = Vec::with_capacity(FIXED_HEADER + PER_SIGNAL * ns);
        let h = &self.header;
        let fixed = [
            h.version.clone(),
            h.patient.clone(),
            h.recording.clone(),
            h.start_date.clone(),
            h.start_time.clone(),
            (FIXED_HEADER + PER_SIGNAL * ns).to_string(),
            h.reserved.clone(),
            h.n_records.to_string(),
            format_compact(h.record_duration_s),
            ns.to_string(),
        ];
        for ((_, width), value) in HEADER_FIELDS.iter().zip(&fixed) {
            push_padded(&mut out, value, *width);
        }
        for (idx, (_, width)) in SIGNAL_FIELDS.iter().enumerate() {
            for s in &self.signals {
                let value = match idx {
                    0 => s.label.clone(),
                    1 => s.transducer.clone(),
                    2 => s.physical_dimension.clone(),
                    3 => format_compact(s.physical_min),
                    4 => format_compact(s.physical_max),
                    5 => s.digital_min.to_string(),
                    6 => s.digital_max.to_string(),
                    7 => s.prefiltering.clone(),
                    8 => s.samples_per_record.to_string(),
                    _ => String::new(),
                };
                push_padded(&mut out, &value, *width);
            }
        }
        for r in 0..h.n_records {
            for s in &self.signals {
                let spr = s.samples_per_record;
                for &d in &s.digital[r * spr..(r + 1) * spr] {
                    out.extend_from_slice(&d.to_le_bytes());
                }
            }
        }
        out
    }

    /// Data signals (annotations skipped) as a raw recording. All data signals
    /// must share one sampling rate.
    pub fn to_recording(&self, subject: usize, trial: usize) -> Result<Recording, DataError> {
        let data: Vec<&EdfSignal> = self.signals.iter().filter(|s| !s.is_annotation()).collect();
        let first = data.first().ok_or_else(|| DataError::Edf {
            field: "label".into(),
            offset: FIXED_HEADER,
            message: "no data signals".into(),
        })?;
        let spr = first.samples_per_record;
        if let Some(s) = data.iter().find(|s| s.samples_per_record != spr) {
            return Err(DataError::Edf {
                field: "samples_per_record".into(),
                offset: FIXED_HEADER,
                message: format!(
                    "signal `{}` has {} samples per record, expected {spr}",
                    s.label, s.samples_per_record
                ),
            });
        }
        let rate = spr as f64 / self.header.record_duration_s;
        let t = spr * self.header.n_records;
        if t == 0 {
            return Err(DataError::Edf {
                field: "n_records".into(),
                offset: 236,
                message: "no data records".into(),
            });
        }
        let mut samples = Array2::zeros((t, data.len()));
        for (c, s) in data.iter().enumerate() {
            for (i, v) in s.physical().enumerate() {
                samples[[i, c]] = v;
            }
        }
        Ok(Recording::new(samples, rate, subject, trial)?)
    }
}

fn push_padded(out: &mut Vec<u8>, value: &str, width: usize) {
    let mut bytes: Vec<u8> = value.bytes().take(width).collect();
    bytes.resize(width, b' ');
    out.extend_from_slice(&bytes);
}

fn format_compact(v: f64) -> String {
    let s = format!("{v}");
    if s.len() <= 8 {
        s
    } else {
        let mut t = format!("{v:.6}");
        t.truncate(8);
        t.trim_end_matches('.').to_string()
    }
}

pub fn load_edf(path: &Path, subject: usize, trial: usize) -> Result<Recording, DataError> {
    let bytes = fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EdfFile::parse(&bytes)?.to_recording(subject, trial)
}

/// Which part of the PhysioNet EEG Motor Movement/Imagery database to use.
/// Files are expected at `<root>/S001/S001R02.edf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdfSelection {
    pub subjects: usize,
    pub run: usize,
    pub samples_per_subject: usize,
}

impl Default for EdfSelection {
    /// First 8 subjects, eyes-closed baseline run, 7,000 samples each.
    fn default() -> Self {
        EdfSelection {
            subjects: 8,
            run: 2,
            samples_per_subject: 7000,
        }
    }
}

pub fn eegmmidb_path(root: &Path, subject: usize, run: usize) -> std::path::PathBuf {
    let s = format!("S{:03}", subject + 1);
    root.join(&s).join(format!("{s}R{run:02}.edf"))
}

pub fn load_eegmmidb(root: &Path, sel: &EdfSelection) -> Result<Vec<Recording>, DataError> {
    (0..sel.subjects)
        .map(|subject| {
            let rec = load_edf(&eegmmidb_path(root, subject, sel.run), subject, 0)?;
            if rec.len() < sel.samples_per_subject {
                return Err(DataError::Invalid(format!(
                    "subject {subject} has {} samples, {} requested",
                    rec.len(),
                    sel.samples_per_subject
                )));
            }
            let head = rec
                .samples()
                .slice(ndarray::s![..sel.samples_per_subject, ..])
                .to_owned();
            Ok(Recording::new(head, rec.rate_hz(), subject, 0)?)
        })
        .collect()
}
