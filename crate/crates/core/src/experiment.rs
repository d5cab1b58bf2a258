//! Declarative run manifests and the estimate → train → evaluate pipeline.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cooccurrence::{estimate_corpus, CooccurrenceMatrix};
use crate::corpus::{load_corpus, CorpusTrack};
use crate::error::{Error, Result};
use crate::fretboard::FretboardConfig;
use crate::inhibition::{string_constraint_weights, weights_from_cooccurrence, InhibitionMatrix, DEFAULT_BOOST};
use crate::metrics::{evaluate_track, EvalReport, EvalRow};
use crate::model::{forward, infer, train, Checkpoint, Head, HistoryEntry, ModelConfig, Sample, Schedule};
use crate::persist;
use crate::synth::{generate_corpus, split_corpus, SynthParams, DEFAULT_SPLIT};
use crate::tab::{FrameTablature, DEFAULT_FRAME_RATE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    #[default]
    None,
    StringConstraints,
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSpec {
    pub source: WeightSource,
    pub boost: u32,
    /// Persisted co-occurrence matrix. Estimated from the training split when absent.
    pub likelihoods: Option<PathBuf>,
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec {
            source: WeightSource::None,
            boost: DEFAULT_BOOST,
            likelihoods: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub hidden_dim: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec { hidden_dim: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// Corpus generation and the train/validation/test split.
    pub data: u64,
    /// Initialization and batch sampling.
    pub model: u64,
}

/// Either a directory of interchange documents with feature sidecars or a
/// synthetic corpus. The synthetic `seed` is replaced by `seeds.data`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum CorpusSpec {
    Dir(PathBuf),
    Synth(SynthParams),
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec::Synth(SynthParams::default())
    }
}

fn default_frame_rate() -> f64 {
    DEFAULT_FRAME_RATE
}

fn default_split() -> [f64; 3] {
    DEFAULT_SPLIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub experiment: String,
    pub head: Head,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub fretboard: FretboardConfig,
    #[serde(default)]
    pub weights: WeightSpec,
    #[serde(default)]
    pub schedule: Schedule,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub corpus: CorpusSpec,
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    /// Output directory. Defaults to `<manifest dir>/<experiment>`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunManifest {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("invalid manifest: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    /// Reads a manifest and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_toml(&text)
            .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve_paths(base);
        Ok(m)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let CorpusSpec::Dir(d) = &mut self.corpus {
            fix(d);
        }
        if let Some(p) = &mut self.weights.likelihoods {
            fix(p);
        }
        match &mut self.output {
            Some(p) => fix(p),
            None => self.output = Some(base.join(&self.experiment)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let id_ok = !self.experiment.is_empty()
            && self.experiment.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
            && !self.experiment.starts_with('.');
        if !id_ok {
            return Err(Error::Validation(format!(
                "experiment id `{}` must be a plain file name",
                self.experiment
            )));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::Validation(format!("frame rate must be positive, got {}", self.frame_rate)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        match (self.head, self.weights.source) {
            (Head::SixDSoftmax, WeightSource::StringConstraints | WeightSource::Corpus) => {
                return Err(Error::Validation(
                    "the six-d-softmax head does not accept an inhibition weight source".into(),
                ))
            }
            (Head::SixDSoftmax, WeightSource::None) if self.lambda > 0.0 => {
                return Err(Error::Validation("the six-d-softmax head requires lambda = 0".into()))
            }
            (Head::Logistic, WeightSource::None) if self.lambda > 0.0 => {
                return Err(Error::Validation("lambda > 0 requires a weight source".into()))
            }
            _ => {}
        }
        if self.weights.boost == 0 {
            return Err(Error::Validation("boost must be >= 1".into()));
        }
        if let CorpusSpec::Synth(p) = &self.corpus {
            if p.fretboard != self.fretboard {
                return Err(Error::Validation(
                    "synthetic corpus fretboard differs from the manifest fretboard".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Train, validation and test tracks of one run.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Vec<CorpusTrack>,
    pub val: Vec<CorpusTrack>,
    pub test: Vec<CorpusTrack>,
}

pub fn prepare_corpus(m: &RunManifest) -> Result<Vec<CorpusTrack>> {
    let tracks = match &m.corpus {
        CorpusSpec::Synth(p) => generate_corpus(&SynthParams {
            seed: m.seeds.data,
            ..p.clone()
        })?,
        CorpusSpec::Dir(d) => load_corpus(d, m.frame_rate)?,
    };
    for t in &tracks {
        if t.tablature.config() != &m.fretboard {
            return Err(Error::Validation(format!(
                "track {} uses a different fretboard than the manifest",
                t.track_id
            )));
        }
    }
    Ok(tracks)
}

pub fn prepare_splits(m: &RunManifest) -> Result<Splits> {
    let tracks = prepare_corpus(m)?;
    let (train, val, test) = split_corpus(&tracks, m.split, m.seeds.data)?;
    Ok(Splits { train, val, test })
}

fn samples(tracks: &[CorpusTrack]) -> Result<Vec<Sample>> {
    tracks.iter().map(CorpusTrack::to_sample).collect()
}

fn tablatures(tracks: &[CorpusTrack]) -> Vec<FrameTablature> {
    tracks.iter().map(|t| t.tablature.clone()).collect()
}

/// Standard (`b = 1`) and boosted evaluation weights from one likelihood matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalWeights {
    pub standard: InhibitionMatrix,
    pub boosted: InhibitionMatrix,
}

impl EvalWeights {
    pub fn from_cooccurrence(m: &CooccurrenceMatrix) -> Result<Self> {
        Ok(EvalWeights {
            standard: weights_from_cooccurrence(m, 1)?,
            boosted: weights_from_cooccurrence(m, DEFAULT_BOOST)?,
        })
    }
}

/// Argmax predictions of `checkpoint` on every track, scored against the truth.
pub fn evaluate_checkpoint(checkpoint: &Checkpoint, tracks: &[CorpusTrack], weights: &EvalWeights) -> Result<EvalReport> {
    let cfg = &checkpoint.config;
    let rows = tracks
        .par_iter()
        .map(|t| {
            let s = t.to_sample()?;
            if s.features.nrows() != cfg.input_dim || t.tablature.config() != &cfg.fretboard {
                return Err(Error::Dimension(format!(
                    "track {} has {} feature rows on a {}-string fretboard, checkpoint expects {} on {} strings",
                    t.track_id,
                    s.features.nrows(),
                    t.tablature.config().num_strings(),
                    cfg.input_dim,
                    cfg.fretboard.num_strings()
                )));
            }
            let (_, act) = forward(&checkpoint.params, cfg, s.features.view())?;
            let pred = infer(&cfg.fretboard, act.values.view())?;
            evaluate_track(&cfg.fretboard, &t.track_id, pred.view(), s.targets.view(), &weights.standard, &weights.boosted)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<HistoryEntry>,
    pub report: EvalReport,
    pub likelihoods: CooccurrenceMatrix,
}

/// Runs one manifest end to end without touching the file system beyond
/// reading its inputs.
pub fn run(m: &RunManifest) -> Result<RunOutcome> {
    m.validate()?;
    let splits = prepare_splits(m)?;
    let likelihoods = match &m.weights.likelihoods {
        Some(p) => persist::load(p)?.into_cooccurrence()?,
        None => estimate_corpus(&tablatures(&splits.train))?,
    };
    if likelihoods.config_hash != m.fretboard.fingerprint() {
        return Err(Error::Validation(
            "likelihood matrix was estimated for a different fretboard".into(),
        ));
    }
    let inhibition = match m.weights.source {
        WeightSource::None => None,
        WeightSource::StringConstraints => Some(string_constraint_weights(&m.fretboard)),
        WeightSource::Corpus => Some(weights_from_cooccurrence(&likelihoods, m.weights.boost)?),
    };
    let train_samples = samples(&splits.train)?;
    let config = ModelConfig {
        fretboard: m.fretboard.clone(),
        input_dim: train_samples[0].features.nrows(),
        hidden_dim: m.model.hidden_dim,
        head: m.head,
        lambda: m.lambda,
        inhibition,
        seed: m.seeds.model,
    };
    let outcome = train(&train_samples, &samples(&splits.val)?, &config, &m.schedule)?;
    let checkpoint = Checkpoint {
        config,
        params: outcome.params,
        iteration: outcome.best_iteration,
        val_f_tab: outcome.best_val_f_tab,
    };
    let report = evaluate_checkpoint(&checkpoint, &splits.test, &EvalWeights::from_cooccurrence(&likelihoods)?)?;
    Ok(RunOutcome {
        checkpoint,
        history: outcome.history,
        report,
        likelihoods,
    })
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.json";
pub const REPORT_FILE: &str = "report.csv";

pub fn write_history(path: &Path, history: &[HistoryEntry]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(history).expect("history serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

impl RunOutcome {
    /// Writes checkpoint, history and test report into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
        write_history(&dir.join(HISTORY_FILE), &self.history)?;
        self.report.save(&dir.join(REPORT_FILE))
    }
}

/// One line of the comparative table.
#[derive(Debug)]
pub struct AblationRow {
    pub experiment: String,
    pub outcome: Result<EvalRow>,
}

/// Runs every manifest, each into its own output directory. Failures are
/// kept as rows and do not stop the other variants. Rows follow input order.
pub fn run_ablation(manifests: &[RunManifest]) -> Vec<AblationRow> {
    manifests
        .par_iter()
        .map(|m| {
            let outcome = run(m).and_then(|o| {
                if let Some(dir) = &m.output {
                    o.write(dir)?;
                }
                Ok(o.report.mean)
            });
            AblationRow {
                experiment: m.experiment.clone(),
                outcome,
            }
        })
        .collect()
}

const METRIC_COLUMNS: [&str; 11] = [
    "p_tab", "r_tab", "f_tab", "p_pitch", "r_pitch", "f_pitch", "tdr", "l_inh", "l_inh_plus", "e_dp", "e_fa",
];

pub fn write_ablation<W: std::io::Write>(out: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["experiment", "status"];
    header.extend(METRIC_COLUMNS);
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut record = vec![r.experiment.clone()];
        match &r.outcome {
            Ok(row) => {
                record.push("ok".into());
                let v = [
                    row.p_tab, row.r_tab, row.f_tab, row.p_pitch, row.r_pitch, row.f_pitch, row.tdr,
                    row.l_inh, row.l_inh_plus, row.e_dp, row.e_fa,
                ];
                record.extend(v.iter().map(|x| format!("{x:?}")));
            }
            Err(e) => {
                record.push(format!("error: {e}"));
                record.extend(std::iter::repeat_n(String::new(), METRIC_COLUMNS.len()));
            }
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
