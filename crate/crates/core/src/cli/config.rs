use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::boost::BoostConfig;
use crate::data::{EdfSelection, SyntheticSpec};
use crate::eval::CorrelationConfig;
use crate::nn::NetworkConfig;
use crate::signal::{BandName, DEFAULT_FILTER_ORDER, EMOTIV_DC_OFFSET};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 200 network iterations, 50 boosting rounds, 64 hidden units.
    Ci,
    /// 2000 iterations, 500 rounds, 164 hidden units.
    Standard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    /// A directory of CSV files plus `manifest.json`.
    Csv {
        dir: PathBuf,
    },
    /// PhysioNet EEG Motor Movement/Imagery database root.
    Eegmmidb {
        root: PathBuf,
        #[serde(default)]
        selection: EdfSelection,
    },
}

impl DatasetSource {
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Synthetic(s) => format!("synthetic-{}x{}", s.subjects, s.channels),
            DatasetSource::Csv { dir } => dir.display().to_string(),
            DatasetSource::Eegmmidb { root, selection } => format!(
                "eegmmidb:{} (subjects 1-{}, run {}, {} samples)",
                root.display(),
                selection.subjects,
                selection.run,
                selection.samples_per_subject
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub band: BandName,
    /// Subtracted before normalization; `None` picks 4200 µV for CSV, the
    /// generator's offset for synthetic data and 0 for EDF.
    pub dc_offset: Option<f64>,
    pub filter_order: usize,
    /// `input_dim` and `output_dim` are replaced by the dataset's channel and
    /// subject counts.
    pub network: NetworkConfig,
    pub boost: BoostConfig,
    pub test_fraction: f64,
    pub correlation: CorrelationConfig,
    /// Root of every random stream; copied into the network, boosting and
    /// correlation seeds.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Standard)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> RunConfig {
        let mut network = NetworkConfig::default();
        let mut boost = BoostConfig::default();
        if preset == Preset::Ci {
            network.hidden_dim = 64;
            network.lstm_cells = 64;
            network.decoder_hidden = 64;
            network.n_iter = 200;
            boost.rounds = 50;
        }
        RunConfig {
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            band: BandName::Delta,
            dc_offset: None,
            filter_order: DEFAULT_FILTER_ORDER,
            network,
            boost,
            test_fraction: 0.125,
            correlation: CorrelationConfig::default(),
            seed: 0,
        }
    }

    pub fn load(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
    }

    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.seed = seed;
        self.sync_seeds();
        self
    }

    pub(crate) fn sync_seeds(&mut self) {
        self.network.seed = self.seed;
        self.boost.seed = self.seed;
        self.correlation.seed = self.seed;
    }

    pub fn dc_offset(&self) -> f64 {
        self.dc_offset.unwrap_or(match &self.dataset {
            DatasetSource::Synthetic(s) => s.dc_offset_uv,
            DatasetSource::Csv { .. } => EMOTIV_DC_OFFSET,
            DatasetSource::Eegmmidb { .. } => 0.0,
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(PipelineError::Config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.filter_order == 0 {
            return Err(PipelineError::Config(
                "filter_order must be at least 1".into(),
            ));
        }
        self.boost
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        // Dimensions come from the data, so check everything else with placeholders.
        NetworkConfig {
            input_dim: 1,
            output_dim: 1,
            ..self.network.clone()
        }
        .validate()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
        if let DatasetSource::Synthetic(s) = &self.dataset {
            s.validate().map_err(PipelineError::Config)?;
        }
        Ok(())
    }
}
