use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, RunConfig};
use super::PipelineError;
use crate::boost::{train_boost_with_history, BoostedModel, BOOST_FORMAT_VERSION};
use crate::data::{
    self, assemble, load_csv, load_csv_dir, load_eegmmidb, synth_generate, Provenance,
};
use crate::eval::{
    confusion_and_report, inter_subject_correlation, roc_auc, roc_csv, CorrelationTable,
    EvaluationReport,
};
use crate::nn::{extract_features, train, AttentionRnn, NetworkConfig, NN_FORMAT_VERSION};
use crate::signal::{decompose, remove_dc, zscore_normalize, BandName, Recording};

pub const REPORT_FORMAT_VERSION: u32 = 1;

pub const RNN_MODEL_FILE: &str = "rnn_model.json";
pub const BOOST_MODEL_FILE: &str = "boost_model.json";
pub const REPORT_FILE: &str = "report.json";
pub const ROC_FILE: &str = "roc.csv";
pub const RUN_MANIFEST_FILE: &str = "manifest.json";

/// Preprocessed recordings with subjects relabeled `0..K`.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub recordings: Vec<Recording>,
    /// Original subject ID of each label.
    pub subject_ids: Vec<usize>,
    pub rate_hz: f64,
    pub channels: usize,
}

/// Everything needed to rerun or reuse a pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub crate_version: String,
    pub nn_format_version: u32,
    pub boost_format_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub dataset: String,
    pub subject_ids: Vec<usize>,
    pub rate_hz: f64,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub format_version: u32,
    pub seed: u64,
    pub band: BandName,
    pub provenance: Provenance,
    pub subject_ids: Vec<usize>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub network_final_loss: f64,
    pub boost_final_train_loss: f64,
    pub evaluation: EvaluationReport,
    pub config: RunConfig,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome {
    pub manifest: RunManifest,
    pub report: PipelineReport,
    pub network: AttentionRnn,
    pub boost: BoostedModel,
}

impl PipelineOutcome {
    pub fn report_json(&self) -> String {
        serde_json::to_string_pretty(&self.report).expect("report serializes")
    }

    fn artifacts(&self) -> Vec<(String, String)> {
        vec![
            (RNN_MODEL_FILE.into(), self.network.to_json()),
            (BOOST_MODEL_FILE.into(), self.boost.to_json()),
            (REPORT_FILE.into(), self.report_json()),
            (ROC_FILE.into(), roc_csv(&self.report.evaluation.roc)),
            (
                RUN_MANIFEST_FILE.into(),
                serde_json::to_string_pretty(&self.manifest).expect("manifest serializes"),
            ),
        ]
    }
}

fn effective(config: &RunConfig) -> Result<RunConfig, PipelineError> {
    let mut c = config.clone();
    c.sync_seeds();
    c.validate()?;
    Ok(c)
}

/// Load the configured dataset, remove its DC offset and z-score every
/// recording.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset, PipelineError> {
    let data_err = |e: data::DataError| PipelineError::Data(e.to_string());
    let raw = match &config.dataset {
        DatasetSource::Synthetic(spec) => synth_generate(spec).map_err(PipelineError::Data)?,
        DatasetSource::Csv { dir } => load_csv_dir(dir).map_err(data_err)?.1,
        DatasetSource::Eegmmidb { root, selection } => {
            load_eegmmidb(root, selection).map_err(data_err)?
        }
    };
    let first = raw
        .first()
        .ok_or_else(|| PipelineError::Data(format!("{}: no recordings", config.dataset.name())))?;
    let (rate_hz, channels) = (first.rate_hz(), first.channels());
    let subject_ids: Vec<usize> = raw
        .iter()
        .map(|r| r.subject)
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let label: BTreeMap<usize, usize> = subject_ids
        .iter()
        .enumerate()
        .map(|(i, &s)| (s, i))
        .collect();
    let dc = config.dc_offset();
    let mut recordings = Vec::with_capacity(raw.len());
    for r in &raw {
        if r.rate_hz() != rate_hz || r.channels() != channels {
            return Err(PipelineError::Data(format!(
                "subject {} trial {}: {} channels at {} Hz, expected {channels} at {rate_hz} Hz",
                r.subject,
                r.trial,
                r.channels(),
                r.rate_hz()
            )));
        }
        let centered = remove_dc(r, dc).map_err(|e| PipelineError::Data(e.to_string()))?;
        let mut norm = zscore_normalize(&centered).recording;
        norm.subject = label[&r.subject];
        recordings.push(norm);
    }
    Ok(Dataset {
        name: config.dataset.name(),
        recordings,
        subject_ids,
        rate_hz,
        channels,
    })
}

/// Decompose, train the network and the boosted trees on the training split
/// and evaluate on the held-out split. Nothing is written.
pub fn run_pipeline(config: &RunConfig, data: &Dataset) -> Result<PipelineOutcome, PipelineError> {
    let config = effective(config)?;
    let band = config.band;
    let k = data.subject_ids.len();
    let filtered: Vec<Recording> = data
        .recordings
        .iter()
        .map(|r| decompose(r, band))
        .collect::<Result<_, _>>()
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    let provenance = Provenance {
        dataset: data.name.clone(),
        band: band.to_string(),
        stage: format!("band:{band}"),
    };
    let set = assemble(&filtered, config.network.seq_len, k, provenance.clone())
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    let (train_set, test_set) = data::split(&set, config.test_fraction, config.seed)
        .map_err(|e| PipelineError::Data(e.to_string()))?;
    log::info!(
        "{band}: {} train / {} test samples, {k} subjects",
        train_set.len(),
        test_set.len()
    );

    let net_config = NetworkConfig {
        input_dim: data.channels,
        output_dim: k,
        ..config.network.clone()
    };
    let training = |e: crate::nn::NnError| PipelineError::Training(format!("network: {e}"));
    let outcome =
        train(&net_config, train_set.features.view(), &train_set.labels).map_err(training)?;
    let network_final_loss = *outcome.loss_history.last().unwrap_or(&f64::NAN);
    log::info!("{band}: network trained, final batch loss {network_final_loss:.5}");
    let network = outcome.model;
    let train_deep = extract_features(&network, train_set.features.view()).map_err(training)?;
    let test_deep = extract_features(&network, test_set.features.view()).map_err(training)?;

    let (boost, history) =
        train_boost_with_history(train_deep.view(), &train_set.labels, k, &config.boost)
            .map_err(|e| PipelineError::Training(format!("boosting: {e}")))?;
    let boost_final_train_loss = *history
        .last()
        .expect("history starts with the initial loss");
    log::info!("{band}: boosting done, train log-loss {boost_final_train_loss:.5}");

    let eval = |e: crate::eval::EvalError| PipelineError::Evaluation(e.to_string());
    let predictions = boost
        .predict_all(test_deep.view())
        .map_err(|e| PipelineError::Evaluation(e.to_string()))?;
    let predicted: Vec<usize> = predictions.iter().map(|p| p.class).collect();
    let mut scores = ndarray::Array2::zeros((predictions.len(), k));
    for (i, p) in predictions.iter().enumerate() {
        scores
            .row_mut(i)
            .assign(&ndarray::ArrayView1::from(&p.probabilities));
    }
    let evaluation = confusion_and_report(&test_set.labels, &predicted, k)
        .map_err(eval)?
        .with_roc(roc_auc(&test_set.labels, scores.view()).map_err(eval)?);
    log::info!("{band}: held-out accuracy {:.4}", evaluation.accuracy);

    let manifest = RunManifest {
        format_version: REPORT_FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        nn_format_version: NN_FORMAT_VERSION,
        boost_format_version: BOOST_FORMAT_VERSION,
        seed: config.seed,
        config: config.clone(),
        dataset: data.name.clone(),
        subject_ids: data.subject_ids.clone(),
        rate_hz: data.rate_hz,
        channels: data.channels,
    };
    let report = PipelineReport {
        format_version: REPORT_FORMAT_VERSION,
        seed: config.seed,
        band,
        provenance,
        subject_ids: data.subject_ids.clone(),
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        network_final_loss,
        boost_final_train_loss,
        evaluation,
        config,
    };
    Ok(PipelineOutcome {
        manifest,
        report,
        network,
        boost,
    })
}

/// Write `files` into `out`, staging them first so that a failure leaves no
/// partial artifacts behind.
pub fn write_artifacts(out: &Path, files: &[(String, String)]) -> Result<(), PipelineError> {
    let io = |what: &str, p: &Path, e: std::io::Error| {
        PipelineError::Output(format!("{what} {}: {e}", p.display()))
    };
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| io("creating", &parent, e))?;
    let leaf = out
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let staging = parent.join(format!(".{leaf}.staging-{}", std::process::id()));
    let result = (|| {
        for (name, body) in files {
            let p = staging.join(name);
            if let Some(dir) = p.parent() {
                fs::create_dir_all(dir).map_err(|e| io("creating", dir, e))?;
            }
            fs::write(&p, body).map_err(|e| io("writing", &p, e))?;
        }
        for (name, _) in files {
            let target = out.join(name);
            if let Some(dir) = target.parent() {
                fs::create_dir_all(dir).map_err(|e| io("creating", dir, e))?;
            }
            fs::rename(staging.join(name), &target).map_err(|e| io("moving into", &target, e))?;
        }
        Ok(())
    })();
    let _ = fs::remove_dir_all(&staging);
    result
}

/// Full pipeline on the configured band; artifacts go to `out`.
pub fn cmd_pipeline(config: &RunConfig, out: &Path) -> Result<PipelineOutcome, PipelineError> {
    let config = effective(config)?;
    let data = load_dataset(&config)?;
    let outcome = run_pipeline(&config, &data)?;
    write_artifacts(out, &outcome.artifacts())?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub band: BandName,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternTable {
    pub seed: u64,
    pub dataset: String,
    pub rows: Vec<PatternRow>,
    pub config: RunConfig,
}

impl PatternTable {
    pub fn row(&self, band: BandName) -> Option<&PatternRow> {
        self.rows.iter().find(|r| r.band == band)
    }

    /// True when `band`'s accuracy is strictly above every other band's.
    pub fn strictly_best(&self, band: BandName) -> bool {
        match self.row(band) {
            Some(b) => self
                .rows
                .iter()
                .all(|r| r.band == band || r.accuracy < b.accuracy),
            None => false,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:<8}{:>10}{:>10}{:>10}\n",
            "band", "accuracy", "macro_f1", "auc"
        );
        for r in &self.rows {
            let auc = r.macro_auc.map_or("-".to_string(), |a| format!("{a:.4}"));
            writeln!(
                out,
                "{:<8}{:>10.4}{:>10.4}{:>10}",
                r.band.as_str(),
                r.accuracy,
                r.macro_f1,
                auc
            )
            .unwrap();
        }
        out
    }
}

pub const PATTERNS_FILE: &str = "patterns.json";
pub const PATTERNS_TEXT_FILE: &str = "patterns.txt";

/// One pipeline per band on a shared preprocessed dataset, seed and split.
/// Each band's artifacts go to `out/<band>/`.
pub fn cmd_compare_patterns(
    config: &RunConfig,
    out: &Path,
) -> Result<(PatternTable, Vec<PipelineOutcome>), PipelineError> {
    let config = effective(config)?;
    let data = load_dataset(&config)?;
    // Bands share nothing but the dataset, so they train side by side.
    let outcomes = BandName::ALL
        .par_iter()
        .map(|&band| {
            let cfg = RunConfig {
                band,
                ..config.clone()
            };
            run_pipeline(&cfg, &data)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut files = Vec::new();
    for o in &outcomes {
        let (band, e) = (o.report.band, &o.report.evaluation);
        rows.push(PatternRow {
            band,
            accuracy: e.accuracy,
            macro_f1: e.macro_f1,
            macro_auc: e.macro_auc,
        });
        files.extend(
            o.artifacts()
                .into_iter()
                .map(|(n, b)| (format!("{band}/{n}"), b)),
        );
    }
    let table = PatternTable {
        seed: config.seed,
        dataset: data.name.clone(),
        rows,
        config,
    };
    files.push((
        PATTERNS_FILE.into(),
        serde_json::to_string_pretty(&table).expect("table serializes"),
    ));
    files.push((PATTERNS_TEXT_FILE.into(), table.to_text()));
    write_artifacts(out, &files)?;
    Ok((table, outcomes))
}

pub const CORRELATION_FILE: &str = "correlation.json";
pub const CORRELATION_TEXT_FILE: &str = "correlation.txt";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub seed: u64,
    pub dataset: String,
    pub subject_ids: Vec<usize>,
    pub table: CorrelationTable,
    pub config: RunConfig,
}

/// Inter-subject correlation of every band, written as JSON and text.
pub fn cmd_correlate(config: &RunConfig, out: &Path) -> Result<CorrelationReport, PipelineError> {
    let config = effective(config)?;
    let data = load_dataset(&config)?;
    let mut table =
        inter_subject_correlation(&data.recordings, &BandName::ALL, &config.correlation)
            .map_err(|e| PipelineError::Evaluation(e.to_string()))?;
    table.subjects = table
        .subjects
        .iter()
        .map(|&l| data.subject_ids[l])
        .collect();
    let report = CorrelationReport {
        seed: config.seed,
        dataset: data.name,
        subject_ids: data.subject_ids,
        table,
        config,
    };
    write_artifacts(
        out,
        &[
            (
                CORRELATION_FILE.into(),
                serde_json::to_string_pretty(&report).expect("report serializes"),
            ),
            (CORRELATION_TEXT_FILE.into(), report.table.to_text()),
        ],
    )?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub subject: usize,
    pub trial: usize,
    /// Time index of the sample's last point within its recording.
    pub index: usize,
    /// Original subject ID.
    pub predicted: usize,
    pub probabilities: Vec<f64>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

/// Identify every sample of a CSV file with the models in `models`, writing
/// one CSV line per sample to `w`. An empty file yields no output.
pub fn cmd_identify(
    models: &Path,
    samples: &Path,
    w: &mut dyn Write,
) -> Result<Vec<Identification>, PipelineError> {
    let manifest: RunManifest = read_json(&models.join(RUN_MANIFEST_FILE))?;
    let text = fs::read_to_string(models.join(RNN_MODEL_FILE)).map_err(|e| {
        PipelineError::Config(format!("{}: {e}", models.join(RNN_MODEL_FILE).display()))
    })?;
    let network =
        AttentionRnn::from_json(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
    let text = fs::read_to_string(models.join(BOOST_MODEL_FILE)).map_err(|e| {
        PipelineError::Config(format!("{}: {e}", models.join(BOOST_MODEL_FILE).display()))
    })?;
    let boost = BoostedModel::from_json(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
    let k = manifest.subject_ids.len();
    if network.config.output_dim != k
        || boost.num_classes != k
        || boost.num_features != network.config.lstm_cells
    {
        return Err(PipelineError::Config(
            "network, boosting model and manifest disagree on shapes".into(),
        ));
    }

    let body = fs::read_to_string(samples)
        .map_err(|e| PipelineError::Data(format!("{}: {e}", samples.display())))?;
    if body.lines().filter(|l| !l.trim().is_empty()).count() <= 1 {
        return Ok(Vec::new());
    }
    let recordings =
        load_csv(samples, manifest.rate_hz).map_err(|e| PipelineError::Data(e.to_string()))?;
    let config = &manifest.config;
    let seq_len = network.config.seq_len;
    let mut results = Vec::new();
    for rec in &recordings {
        if rec.channels() != manifest.channels {
            return Err(PipelineError::Data(format!(
                "subject {} trial {}: {} channels, models expect {}",
                rec.subject,
                rec.trial,
                rec.channels(),
                manifest.channels
            )));
        }
        let centered =
            remove_dc(rec, config.dc_offset()).map_err(|e| PipelineError::Data(e.to_string()))?;
        let mut filtered = decompose(&zscore_normalize(&centered).recording, config.band)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        filtered.subject = 0;
        let provenance = Provenance {
            dataset: samples.display().to_string(),
            band: config.band.to_string(),
            stage: format!("band:{}", config.band),
        };
        let set = assemble(std::slice::from_ref(&filtered), seq_len, 1, provenance)
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        let deep = extract_features(&network, set.features.view())
            .map_err(|e| PipelineError::Data(e.to_string()))?;
        let preds = boost
            .predict_all(deep.view())
            .map_err(|e| PipelineError::Evaluation(e.to_string()))?;
        for (i, p) in preds.into_iter().enumerate() {
            results.push(Identification {
                subject: rec.subject,
                trial: rec.trial,
                index: i + seq_len - 1,
                predicted: manifest.subject_ids[p.class],
                probabilities: p.probabilities,
            });
        }
    }

    let out_err =
        |e: std::io::Error| PipelineError::Output(format!("writing identifications: {e}"));
    if !results.is_empty() {
        let probs: Vec<String> = manifest
            .subject_ids
            .iter()
            .map(|s| format!("p_{s}"))
            .collect();
        writeln!(w, "subject,trial,index,predicted,{}", probs.join(",")).map_err(out_err)?;
    }
    for r in &results {
        let probs: Vec<String> = r.probabilities.iter().map(|p| p.to_string()).collect();
        writeln!(
            w,
            "{},{},{},{},{}",
            r.subject,
            r.trial,
            r.index,
            r.predicted,
            probs.join(",")
        )
        .map_err(out_err)?;
    }
    Ok(results)
}

/// Export the configured synthetic dataset as `data.csv` plus a manifest.
pub fn cmd_synth(config: &RunConfig, out: &Path) -> Result<usize, PipelineError> {
    let DatasetSource::Synthetic(spec) = &config.dataset else {
        return Err(PipelineError::Config(
            "synth needs a synthetic dataset config".into(),
        ));
    };
    spec.validate().map_err(PipelineError::Config)?;
    let recordings = synth_generate(spec).map_err(PipelineError::Data)?;
    let parent = out.parent().map(Path::to_path_buf).unwrap_or_default();
    let staging = tempdir_in(&parent)?;
    let result = (|| {
        data::write_csv(&staging.join("data.csv"), &recordings)
            .map_err(|e| PipelineError::Output(e.to_string()))?;
        data::write_manifest(
            &staging,
            &data::Manifest {
                name: config.dataset.name(),
                rate_hz: spec.rate_hz,
                channels: spec.channels,
            },
        )
        .map_err(|e| PipelineError::Output(e.to_string()))?;
        let files: Vec<(String, String)> = ["data.csv", data::MANIFEST_FILE]
            .iter()
            .map(|n| {
                fs::read_to_string(staging.join(n))
                    .map(|b| (n.to_string(), b))
                    .map_err(|e| PipelineError::Output(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        write_artifacts(out, &files)
    })();
    let _ = fs::remove_dir_all(&staging);
    result.map(|()| recordings.len())
}

fn tempdir_in(parent: &Path) -> Result<std::path::PathBuf, PipelineError> {
    let dir = parent.join(format!(".mindid-synth-{}", std::process::id()));
    fs::create_dir_all(&dir)
        .map_err(|e| PipelineError::Output(format!("{}: {e}", dir.display())))?;
    Ok(dir)
}
