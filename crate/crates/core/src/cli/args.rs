use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::commands::{cmd_compare_patterns, cmd_correlate, cmd_identify, cmd_pipeline, cmd_synth};
use super::config::{DatasetSource, Preset, RunConfig};
use super::PipelineError;
use crate::data::EdfSelection;
use crate::signal::BandName;

#[derive(Debug, Parser)]
#[command(name = "mindid", version, about = "EEG-based person identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate on one band.
    Pipeline(RunArgs),
    /// Run the pipeline on all six bands with a shared seed and split.
    ComparePatterns(RunArgs),
    /// Inter-subject correlation of every band.
    Correlate(RunArgs),
    /// Identify the samples of a CSV file with saved models.
    Identify {
        /// Output directory of a pipeline run.
        #[arg(long)]
        models: PathBuf,
        /// CSV with header `ch1..chN,subject,trial`.
        samples: PathBuf,
    },
    /// Write the configured synthetic dataset as CSV plus manifest.
    Synth(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run config; fields left out take the preset's values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Size preset; `standard` when neither this nor --config is given.
    #[arg(long)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// delta, theta, alpha, beta, gamma or full.
    #[arg(long)]
    pub band: Option<BandName>,
    #[arg(long, default_value = "mindid-out")]
    pub out: PathBuf,
    /// Directory of CSV recordings with a manifest.json.
    #[arg(long, conflicts_with = "eegmmidb")]
    pub data: Option<PathBuf>,
    /// Root of the PhysioNet eegmmidb download.
    #[arg(long)]
    pub eegmmidb: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, PipelineError> {
        let mut config = match (&self.config, self.preset) {
            (Some(path), None) => RunConfig::load(path)?,
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "--config and --preset are mutually exclusive".into(),
                ))
            }
            (None, preset) => RunConfig::preset(preset.unwrap_or(Preset::Standard)),
        };
        if let Some(dir) = &self.data {
            config.dataset = DatasetSource::Csv { dir: dir.clone() };
        }
        if let Some(root) = &self.eegmmidb {
            config.dataset = DatasetSource::Eegmmidb {
                root: root.clone(),
                selection: EdfSelection::default(),
            };
        }
        if let Some(band) = self.band {
            config.band = band;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.sync_seeds();
        config.validate()?;
        Ok(config)
    }
}

fn dispatch(cli: &Cli) -> Result<(), PipelineError> {
    let mut stdout = std::io::stdout().lock();
    let print = |s: &mut dyn Write, text: &str| -> Result<(), PipelineError> {
        s.write_all(text.as_bytes())
            .map_err(|e| PipelineError::Output(e.to_string()))
    };
    match &cli.command {
        Command::Pipeline(a) => {
            let o = cmd_pipeline(&a.resolve()?, &a.out)?;
            let e = &o.report.evaluation;
            print(
                &mut stdout,
                &format!(
                    "{} band: accuracy {:.4}, macro F1 {:.4} on {} held-out samples; artifacts in {}\n",
                    o.report.band,
                    e.accuracy,
                    e.macro_f1,
                    o.report.test_samples,
                    a.out.display()
                ),
            )
        }
        Command::ComparePatterns(a) => {
            let (table, _) = cmd_compare_patterns(&a.resolve()?, &a.out)?;
            print(&mut stdout, &table.to_text())
        }
        Command::Correlate(a) => {
            let report = cmd_correlate(&a.resolve()?, &a.out)?;
            print(&mut stdout, &report.table.to_text())
        }
        Command::Identify { models, samples } => {
            cmd_identify(models, samples, &mut stdout).map(|_| ())
        }
        Command::Synth(a) => {
            let n = cmd_synth(&a.resolve()?, &a.out)?;
            print(
                &mut stdout,
                &format!("wrote {n} recordings to {}\n", a.out.display()),
            )
        }
    }
}

/// Parse `args` and run the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mindid: {e}");
            e.exit_code()
        }
    }
}
