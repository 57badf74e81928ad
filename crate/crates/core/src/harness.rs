//! Experiment orchestration: configuration, the accuracy metric, the
//! end-to-end pipeline runner, and result tables.
//!
//! A run is fully described by an [`ExperimentConfig`]; identical configs
//! (same digest) produce byte-identical persisted [`ResultRecord`]s, and a
//! record already present in the output directory is reused instead of
//! recomputed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng as _};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::backbones::Architecture;
use crate::backend::{fit_backend, predict, BackendKind, BackendParams};
use crate::dataio::{
    adapters::{load_recording, PU_SAMPLE_LEN},
    segment, time_split, ClassLabel, Dataset, VibrationRecording, VibrationSample,
};
use crate::error::MbfdError;
use crate::features;
use crate::losses::LossConfig;
use crate::preprocess::{self, Method};
use crate::protocols::{self, SegmentationRule, SplitSpec};
use crate::trainer::{self, EpochLoss, TrainConfig, TrainSet};
use crate::Result;

/// Which of the five studied pipelines to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    MlBaseline,
    Sdlm,
    SSdlm,
    USdlm,
    RobustMbfd,
}

impl Pipeline {
    /// The deep architecture behind this pipeline, if any.
    pub fn architecture(self) -> Option<Architecture> {
        match self {
            Pipeline::MlBaseline => None,
            Pipeline::Sdlm => Some(Architecture::Sdlm),
            Pipeline::SSdlm => Some(Architecture::SSdlm),
            Pipeline::USdlm => Some(Architecture::USdlm),
            Pipeline::RobustMbfd => Some(Architecture::RobustMbfd),
        }
    }

    fn needs_windows(self) -> bool {
        matches!(self, Pipeline::Sdlm | Pipeline::SSdlm | Pipeline::RobustMbfd)
    }

    fn needs_feature_vectors(self) -> bool {
        matches!(self, Pipeline::USdlm | Pipeline::RobustMbfd)
    }
}

impl std::str::FromStr for Pipeline {
    type Err = MbfdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "ML_BASELINE" => Ok(Self::MlBaseline),
            "SDLM" => Ok(Self::Sdlm),
            "S_SDLM" => Ok(Self::SSdlm),
            "U_SDLM" => Ok(Self::USdlm),
            "ROBUST_MBFD" | "ROBUST" => Ok(Self::RobustMbfd),
            other => Err(MbfdError::InvalidConfig(format!("unknown pipeline {other:?}"))),
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MlBaseline => "ML_BASELINE",
            Self::Sdlm => "SDLM",
            Self::SSdlm => "S_SDLM",
            Self::USdlm => "U_SDLM",
            Self::RobustMbfd => "ROBUST_MBFD",
        })
    }
}

/// Which hand-crafted feature columns the ML baseline uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureDomain {
    Time,
    Freq,
    Both,
}

impl std::str::FromStr for FeatureDomain {
    type Err = MbfdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "time" => Ok(Self::Time),
            "freq" | "frequency" => Ok(Self::Freq),
            "both" => Ok(Self::Both),
            other => Err(MbfdError::InvalidConfig(format!("unknown feature domain {other:?}"))),
        }
    }
}

impl std::fmt::Display for FeatureDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Time => "time",
            Self::Freq => "freq",
            Self::Both => "both",
        })
    }
}

/// Serde bridge serializing enums through their canonical string form.
mod text {
    use serde::{de::Error as _, Deserialize as _, Deserializer, Serializer};

    pub fn serialize<T: std::fmt::Display, S: Serializer>(
        v: &T,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, T, D>(d: D) -> std::result::Result<T, D::Error>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
        D: Deserializer<'de>,
    {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

/// One experiment, fully specified. Mirrors the TOML config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Protocol name: "PU-C1", "PU-C2", "PU-C2-<k>", "CWRU-C<n>", "MFPT",
    /// or "SYNTHETIC".
    pub split: String,
    #[serde(with = "text")]
    pub pipeline: Pipeline,
    /// Feature columns for the ML baseline; deep pipelines use "both".
    #[serde(with = "text")]
    pub feature_domain: FeatureDomain,
    #[serde(with = "text")]
    pub normalization: Method,
    #[serde(with = "text")]
    pub backend: BackendKind,
    pub loss: LossConfig,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    /// Dataset root; falls back to the `MBFD_DATA_DIR` environment variable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// MFPT only: drop the published healthy-set overlap.
    pub strict_disjoint: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            split: "SYNTHETIC".into(),
            pipeline: Pipeline::MlBaseline,
            feature_domain: FeatureDomain::Both,
            normalization: Method::Norm,
            backend: BackendKind::Euclidean,
            loss: LossConfig::default(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("out"),
            data_dir: None,
            strict_disjoint: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
        let cfg: Self =
            toml::from_str(&text).map_err(|e| MbfdError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| MbfdError::Serde(e.to_string()))
    }

    /// Rejects meaningless combinations and unknown split names.
    pub fn validate(&self) -> Result<()> {
        if self.feature_domain != FeatureDomain::Both && self.pipeline != Pipeline::MlBaseline {
            return Err(MbfdError::InvalidConfig(format!(
                "feature domain {} only applies to ML_BASELINE, not {}",
                self.feature_domain, self.pipeline
            )));
        }
        let name = self.split.to_ascii_uppercase();
        if name != "SYNTHETIC" && name != "PU-C2" {
            protocols::by_name(&self.split, self.strict_disjoint)?;
        }
        Ok(())
    }

    /// Digest over every result-determining field plus the crate version.
    /// Keys the result cache and names the persisted artifacts.
    pub fn digest(&self) -> String {
        let key = serde_json::json!({
            "version": env!("CARGO_PKG_VERSION"),
            "split": self.split,
            "pipeline": self.pipeline.to_string(),
            "feature_domain": self.feature_domain.to_string(),
            "normalization": self.normalization.to_string(),
            "backend": self.backend.to_string(),
            "loss": self.loss,
            "train": self.train,
            "strict_disjoint": self.strict_disjoint,
        });
        let hash = Sha256::digest(key.to_string().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn resolve_data_dir(&self) -> Result<PathBuf> {
        self.data_dir
            .clone()
            .or_else(|| std::env::var_os("MBFD_DATA_DIR").map(PathBuf::from))
            .ok_or_else(|| {
                MbfdError::MissingData(
                    "no data directory: set data_dir in the config or MBFD_DATA_DIR".into(),
                )
            })
    }
}

/// Outcome of one experiment. Wall time is reported in memory but skipped
/// when persisting so identical runs produce byte-identical artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub digest: String,
    /// Percent correct on the test split (mean over combinations for PU-C2).
    pub accuracy: f64,
    /// Counts indexed `[truth][prediction]`, summed over combinations.
    pub confusion: Vec<Vec<usize>>,
    pub seed: u64,
    /// Per-combination accuracies for aggregated protocols; empty otherwise.
    pub sub_accuracies: Vec<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ResultRecord {
    /// 100 · trace / total over the stored confusion counts.
    pub fn accuracy_from_confusion(&self) -> f64 {
        let total: usize = self.confusion.iter().flatten().sum();
        let trace: usize = self.confusion.iter().enumerate().map(|(i, row)| row[i]).sum();
        100.0 * trace as f64 / total as f64
    }
}

/// A record together with the config that produced it, as persisted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub config: ExperimentConfig,
    pub record: ResultRecord,
}

impl StoredRecord {
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Percent of predictions equal to the truth: 100 · M / N.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.is_empty() {
        return Err(MbfdError::EmptyInput("accuracy of zero predictions".into()));
    }
    if pred.len() != truth.len() {
        return Err(MbfdError::ShapeMismatch(format!(
            "{} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let m = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(100.0 * m as f64 / pred.len() as f64)
}

/// Confusion counts indexed `[truth][prediction]` over `classes` classes.
pub fn confusion_counts(pred: &[usize], truth: &[usize], classes: usize) -> Result<Vec<Vec<usize>>> {
    let mut counts = vec![vec![0usize; classes]; classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= classes || t >= classes {
            return Err(MbfdError::UnknownLabel(p.max(t)));
        }
        counts[t][p] += 1;
    }
    Ok(counts)
}

// ---------------------------------------------------------------------------
// Synthetic dataset
// ---------------------------------------------------------------------------

const SYN_CLASSES: usize = 3;
const SYN_LEN: usize = 512;
const SYN_RATE: f64 = 8192.0;
const SYN_TRAIN_PER_CLASS: usize = 24;
const SYN_TEST_PER_CLASS: usize = 8;

/// Seeded synthetic samples with class-dependent spectra: a low tone, a pair
/// of high tones, and broadband noise. Separable by construction, so the
/// full pipeline is testable without the real archives.
pub fn synthetic_samples(seed: u64, per_class: usize) -> Vec<VibrationSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_class * SYN_CLASSES);
    let names = ["healthy", "inner-race", "outer-race"];
    for class in 0..SYN_CLASSES {
        for k in 0..per_class {
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(0.9..1.1);
            let values = (0..SYN_LEN)
                .map(|i| {
                    let t = i as f64 / SYN_RATE;
                    let noise: f64 = rng.gen_range(-1.0..1.0);
                    match class {
                        0 => amp * (std::f64::consts::TAU * 200.0 * t + phase).sin() + 0.1 * noise,
                        1 => {
                            0.7 * amp * (std::f64::consts::TAU * 900.0 * t + phase).sin()
                                + 0.5 * (std::f64::consts::TAU * 1800.0 * t + 2.0 * phase).sin()
                                + 0.1 * noise
                        }
                        _ => {
                            amp * noise
                                + 0.2 * (std::f64::consts::TAU * 400.0 * t + phase).sin()
                        }
                    }
                })
                .collect();
            out.push(VibrationSample {
                values,
                sample_rate: SYN_RATE,
                label: ClassLabel::new(class, names[class]),
                origin: (format!("SYN-{class}-{k}"), 0),
            });
        }
    }
    out
}

/// The CI dataset: disjoint seeded train and test sides.
pub fn synthetic_dataset(seed: u64) -> (Vec<VibrationSample>, Vec<VibrationSample>) {
    let train = synthetic_samples(seed, SYN_TRAIN_PER_CLASS);
    let test = synthetic_samples(seed.wrapping_add(0x5EED), SYN_TEST_PER_CLASS);
    (train, test)
}

// ---------------------------------------------------------------------------
// Split assembly from dataset files
// ---------------------------------------------------------------------------

fn split_dataset(name: &str) -> Dataset {
    let upper = name.to_ascii_uppercase();
    if upper.starts_with("PU") {
        Dataset::Pu
    } else if upper.starts_with("CWRU") {
        Dataset::Cwru
    } else if upper.starts_with("MFPT") {
        Dataset::Mfpt
    } else {
        Dataset::Synthetic
    }
}

/// Finds `<id>.f32` (canonical) or `<id>.mat` under `<dir>/<DATASET>/` or
/// directly under `<dir>`.
fn resolve_source(dir: &Path, dataset: Dataset, id: &str) -> Result<PathBuf> {
    let sub = dir.join(dataset.to_string());
    for base in [&sub, &dir.to_path_buf()] {
        for ext in ["f32", "mat"] {
            let cand = base.join(format!("{id}.{ext}"));
            if cand.is_file() {
                return Ok(cand);
            }
        }
    }
    Err(MbfdError::MissingData(format!(
        "{id}: no {id}.f32 or {id}.mat under {}",
        dir.display()
    )))
}

fn load_labeled(
    dir: &Path,
    dataset: Dataset,
    id: &str,
    label: &ClassLabel,
) -> Result<VibrationRecording> {
    let path = resolve_source(dir, dataset, id)?;
    let mut rec = load_recording(&path, dataset, id)?;
    rec.label = Some(label.clone());
    Ok(rec)
}

const WINDOW_MS: f64 = 400.0;

/// Materializes a split: loads every source recording and applies the
/// protocol's segmentation rule, yielding labeled train and test samples.
pub fn assemble_split(
    spec: &SplitSpec,
    dir: &Path,
) -> Result<(Vec<VibrationSample>, Vec<VibrationSample>)> {
    let dataset = split_dataset(&spec.name);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in &spec.classes {
        match spec.rule {
            SegmentationRule::WholeRecording => {
                for (ids, side) in [(&class.train, &mut train), (&class.test, &mut test)] {
                    for id in ids {
                        let mut rec = load_labeled(dir, dataset, id, &class.label)?;
                        // PU recordings vary slightly in length; use a fixed prefix
                        if dataset == Dataset::Pu && rec.len() > PU_SAMPLE_LEN {
                            rec.samples.truncate(PU_SAMPLE_LEN);
                        }
                        side.push(VibrationSample {
                            values: rec.samples,
                            sample_rate: rec.sample_rate,
                            label: class.label.clone(),
                            origin: (id.clone(), 0),
                        });
                    }
                }
            }
            SegmentationRule::Time8020Then400ms => {
                // both sides list the same sources; each file is split in time
                for id in &class.train {
                    let rec = load_labeled(dir, dataset, id, &class.label)?;
                    let (head, tail) = time_split(&rec, 0.8)?;
                    train.extend(segment(&head, WINDOW_MS, 0.0)?);
                    test.extend(segment(&tail, WINDOW_MS, 0.0)?);
                }
            }
            SegmentationRule::Segment400ms50Pct => {
                for (ids, side) in [(&class.train, &mut train), (&class.test, &mut test)] {
                    for id in ids {
                        let rec = load_labeled(dir, dataset, id, &class.label)?;
                        side.extend(segment(&rec, WINDOW_MS, 0.5)?);
                    }
                }
            }
        }
    }
    if spec.rule == SegmentationRule::WholeRecording {
        // uniform sample length for the raw-signal models
        if let Some(min) = train.iter().chain(&test).map(|s| s.len()).min() {
            for s in train.iter_mut().chain(&mut test) {
                s.values.truncate(min);
            }
        }
    }
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// Matrices
// ---------------------------------------------------------------------------

fn labels_of(samples: &[VibrationSample]) -> Vec<usize> {
    samples.iter().map(|s| s.label.index).collect()
}

/// Hand-crafted feature matrix restricted to the requested domain.
pub fn feature_matrix(samples: &[VibrationSample], domain: FeatureDomain) -> Result<Array2<f64>> {
    if samples.is_empty() {
        return Err(MbfdError::EmptyInput("feature matrix of zero samples".into()));
    }
    let rows: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let fv = features::extract(s)?;
            Ok(match domain {
                FeatureDomain::Time => fv.time_slice().to_vec(),
                FeatureDomain::Freq => fv.freq_slice().to_vec(),
                FeatureDomain::Both => fv.values.to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    let cols = rows[0].len();
    Array2::from_shape_vec((rows.len(), cols), rows.concat())
        .map_err(|e| MbfdError::ShapeMismatch(e.to_string()))
}

/// Raw windows as rows; all samples must share one length.
fn windows_matrix(samples: &[VibrationSample]) -> Result<Array2<f64>> {
    if samples.is_empty() {
        return Err(MbfdError::EmptyInput("window matrix of zero samples".into()));
    }
    let len = samples[0].len();
    if let Some(s) = samples.iter().find(|s| s.len() != len) {
        return Err(MbfdError::ShapeMismatch(format!(
            "window lengths differ: {} has {} vs {}",
            s.origin.0,
            s.len(),
            len
        )));
    }
    let flat: Vec<f64> = samples.iter().flat_map(|s| s.values.iter().copied()).collect();
    Array2::from_shape_vec((samples.len(), len), flat)
        .map_err(|e| MbfdError::ShapeMismatch(e.to_string()))
}

fn normalized_pair(
    method: Method,
    train: &Array2<f64>,
    test: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let t = preprocess::fit(method, train.view())?;
    Ok((preprocess::apply(&t, train.view())?, preprocess::apply(&t, test.view())?))
}

/// Normalized inputs for the deep pipelines. Every transform is fitted on
/// the train side only, so nothing downstream can depend on the test data.
fn build_train_sets(
    cfg: &ExperimentConfig,
    train_s: &[VibrationSample],
    test_s: &[VibrationSample],
) -> Result<(TrainSet, TrainSet)> {
    let mut train = TrainSet { windows: None, features: None, labels: labels_of(train_s) };
    let mut test = TrainSet { windows: None, features: None, labels: labels_of(test_s) };
    if cfg.pipeline.needs_windows() {
        let (a, b) =
            normalized_pair(cfg.normalization, &windows_matrix(train_s)?, &windows_matrix(test_s)?)?;
        train.windows = Some(a);
        test.windows = Some(b);
    }
    if cfg.pipeline.needs_feature_vectors() {
        let (a, b) = normalized_pair(
            cfg.normalization,
            &feature_matrix(train_s, FeatureDomain::Both)?,
            &feature_matrix(test_s, FeatureDomain::Both)?,
        )?;
        train.features = Some(a);
        test.features = Some(b);
    }
    Ok((train, test))
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

struct SingleOutcome {
    accuracy: f64,
    confusion: Vec<Vec<usize>>,
    losses: Vec<EpochLoss>,
    model: Option<crate::backbones::ModelState>,
}

/// One train→predict pass on already-materialized samples.
fn run_split(
    cfg: &ExperimentConfig,
    train_s: &[VibrationSample],
    test_s: &[VibrationSample],
    classes: usize,
) -> Result<SingleOutcome> {
    let truth = labels_of(test_s);
    let params =
        BackendParams { seed: cfg.train.seed, nearest_neighbor_distance: false };
    let (pred, losses, model) = match cfg.pipeline.architecture() {
        None => {
            let (xtr, xte) = normalized_pair(
                cfg.normalization,
                &feature_matrix(train_s, cfg.feature_domain)?,
                &feature_matrix(test_s, cfg.feature_domain)?,
            )?;
            let backend = fit_backend(cfg.backend, &xtr, &labels_of(train_s), &params)?;
            (predict(&backend, &xte)?, Vec::new(), None)
        }
        Some(arch) => {
            let (train_set, test_set) = build_train_sets(cfg, train_s, test_s)?;
            let (mut state, losses) = trainer::train(arch, classes, &train_set, &cfg.train, &cfg.loss)?;
            // train embeddings fit the backend; test embeddings are only predicted
            let etr = trainer::extract_features(&mut state, &train_set)?;
            let backend = fit_backend(cfg.backend, &etr, &train_set.labels, &params)?;
            let ete = trainer::extract_features(&mut state, &test_set)?;
            (predict(&backend, &ete)?, losses, Some(state))
        }
    };
    Ok(SingleOutcome {
        accuracy: accuracy(&pred, &truth)?,
        confusion: confusion_counts(&pred, &truth, classes)?,
        losses,
        model,
    })
}

fn add_confusion(total: &mut Vec<Vec<usize>>, part: &[Vec<usize>]) {
    if total.is_empty() {
        *total = part.to_vec();
        return;
    }
    for (tr, pr) in total.iter_mut().zip(part) {
        for (t, p) in tr.iter_mut().zip(pr) {
            *t += p;
        }
    }
}

/// Executes the full pipeline for `cfg` and persists the outcome.
///
/// A matching record already in the output directory is returned as-is
/// (results are cached by config digest). "PU-C2" runs all 10 combinations
/// and reports their mean accuracy.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let digest = cfg.digest();
    let record_path = cfg.output_dir.join(format!("record_{digest}.json"));
    if record_path.is_file() {
        if let Ok(stored) = StoredRecord::load(&record_path) {
            return Ok(stored.record);
        }
    }

    let start = Instant::now();
    let name = cfg.split.to_ascii_uppercase();
    let mut record = ResultRecord {
        digest: digest.clone(),
        accuracy: 0.0,
        confusion: Vec::new(),
        seed: cfg.train.seed,
        sub_accuracies: Vec::new(),
        wall_time_s: 0.0,
    };
    let mut loss_logs: Vec<(String, Vec<EpochLoss>)> = Vec::new();
    let mut model = None;

    if name == "SYNTHETIC" {
        let (train_s, test_s) = synthetic_dataset(cfg.train.seed);
        let out = run_split(cfg, &train_s, &test_s, SYN_CLASSES)?;
        record.accuracy = out.accuracy;
        record.confusion = out.confusion;
        loss_logs.push((format!("loss_{digest}.csv"), out.losses));
        model = out.model;
    } else if name == "PU-C2" {
        let dir = cfg.resolve_data_dir()?;
        let combos = protocols::pu_c2_combinations();
        for (k, spec) in combos.iter().enumerate() {
            spec.validate()?;
            let (train_s, test_s) = assemble_split(spec, &dir)?;
            let out = run_split(cfg, &train_s, &test_s, spec.class_count())?;
            record.sub_accuracies.push(out.accuracy);
            add_confusion(&mut record.confusion, &out.confusion);
            loss_logs.push((format!("loss_{digest}_{}.csv", k + 1), out.losses));
        }
        // "the final result is computed as an average of the 10 results"
        record.accuracy =
            record.sub_accuracies.iter().sum::<f64>() / record.sub_accuracies.len() as f64;
    } else {
        let dir = cfg.resolve_data_dir()?;
        let spec = protocols::by_name(&cfg.split, cfg.strict_disjoint)?;
        spec.validate()?;
        let (train_s, test_s) = assemble_split(&spec, &dir)?;
        let out = run_split(cfg, &train_s, &test_s, spec.class_count())?;
        record.accuracy = out.accuracy;
        record.confusion = out.confusion;
        loss_logs.push((format!("loss_{digest}.csv"), out.losses));
        model = out.model;
    }

    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| MbfdError::Io { path: cfg.output_dir.clone(), source: e })?;
    for (file, log) in &loss_logs {
        if !log.is_empty() {
            trainer::write_loss_log(&cfg.output_dir.join(file), log)?;
        }
    }
    if let Some(mut state) = model {
        crate::backbones::save_checkpoint(
            &cfg.output_dir.join(format!("model_{digest}.ckpt")),
            &mut state,
        )?;
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    let stored = StoredRecord { config: cfg.clone(), record: record.clone() };
    let mut json = serde_json::to_string_pretty(&stored)?;
    json.push('\n');
    std::fs::write(&record_path, json)
        .map_err(|e| MbfdError::Io { path: record_path.clone(), source: e })?;
    Ok(record)
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

/// Table column order (normalization methods).
pub const TABLE_METHODS: [Method; 6] =
    [Method::Mas, Method::Ss, Method::Rs, Method::Norm, Method::Qt, Method::Pt];
/// Table row order (back-end classifiers).
pub const TABLE_BACKENDS: [BackendKind; 5] = [
    BackendKind::Svm,
    BackendKind::Knn,
    BackendKind::Rf,
    BackendKind::Euclidean,
    BackendKind::Cosine,
];

const MISSING_CELL: &str = "—";

fn table_rows(records: &[StoredRecord]) -> Vec<(BackendKind, Vec<Option<f64>>)> {
    let mut cells: std::collections::HashMap<(String, String), f64> = std::collections::HashMap::new();
    for r in records {
        cells.insert(
            (r.config.backend.to_string(), r.config.normalization.to_string()),
            r.record.accuracy,
        );
    }
    TABLE_BACKENDS
        .iter()
        .filter_map(|&b| {
            let row: Vec<Option<f64>> = TABLE_METHODS
                .iter()
                .map(|m| cells.get(&(b.to_string(), m.to_string())).copied())
                .collect();
            row.iter().any(Option::is_some).then_some((b, row))
        })
        .collect()
}

fn format_cell(v: Option<f64>) -> String {
    v.map_or_else(|| MISSING_CELL.to_string(), |a| format!("{a:.2}"))
}

/// Accuracy grid (backend rows × normalization columns) as CSV.
/// Backends without any record are omitted; missing cells render as "—".
pub fn emit_table_csv(records: &[StoredRecord]) -> String {
    let mut out = String::from("backend");
    for m in TABLE_METHODS {
        out.push(',');
        out.push_str(&m.to_string());
    }
    out.push('\n');
    for (backend, row) in table_rows(records) {
        out.push_str(&backend.to_string());
        for cell in row {
            out.push(',');
            out.push_str(&format_cell(cell));
        }
        out.push('\n');
    }
    out
}

/// The same grid as a Markdown table.
pub fn emit_table_markdown(records: &[StoredRecord]) -> String {
    let mut out = String::from("| backend |");
    for m in TABLE_METHODS {
        out.push_str(&format!(" {m} |"));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(TABLE_METHODS.len()));
    out.push('\n');
    for (backend, row) in table_rows(records) {
        out.push_str(&format!("| {backend} |"));
        for cell in row {
            out.push_str(&format!(" {} |", format_cell(cell)));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::canonical::write_canonical;

    #[test]
    fn accuracy_matches_worked_examples() {
        let truth: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let mut pred = truth.clone();
        pred[0] = 1 - pred[0];
        pred[5] = 1 - pred[5];
        assert_eq!(accuracy(&pred, &truth).unwrap(), 80.0);
        assert_eq!(accuracy(&truth, &truth).unwrap(), 100.0);
        let wrong: Vec<usize> = truth.iter().map(|&t| 1 - t).collect();
        assert_eq!(accuracy(&wrong, &truth).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_rejects_empty_and_mismatched_inputs() {
        assert!(matches!(accuracy(&[], &[]), Err(MbfdError::EmptyInput(_))));
        assert!(matches!(accuracy(&[0, 1], &[0]), Err(MbfdError::ShapeMismatch(_))));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.split = "PU-C1".into();
        cfg.pipeline = Pipeline::RobustMbfd;
        cfg.normalization = Method::Ss;
        cfg.backend = BackendKind::Svm;
        cfg.train.epochs = 7;
        let text = cfg.to_toml_string().unwrap();
        assert!(text.contains("pipeline = \"ROBUST_MBFD\""));
        assert!(text.contains("normalization = \"SS\""));
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn config_rejects_meaningless_combinations() {
        let mut cfg = ExperimentConfig::default();
        cfg.pipeline = Pipeline::USdlm;
        cfg.feature_domain = FeatureDomain::Freq;
        assert!(matches!(cfg.validate(), Err(MbfdError::InvalidConfig(_))));
        cfg.feature_domain = FeatureDomain::Both;
        cfg.split = "NO-SUCH-SPLIT".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn digest_tracks_result_determining_fields_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), b.digest());
        let mut c = a.clone();
        c.train.seed = 1;
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn ml_baseline_uses_15_columns_for_both_domains() {
        let samples = synthetic_samples(3, 2);
        assert_eq!(feature_matrix(&samples, FeatureDomain::Both).unwrap().dim(), (6, 15));
        assert_eq!(feature_matrix(&samples, FeatureDomain::Time).unwrap().dim(), (6, 11));
        assert_eq!(feature_matrix(&samples, FeatureDomain::Freq).unwrap().dim(), (6, 4));
    }

    #[test]
    fn synthetic_generation_is_seeded_and_balanced() {
        let a = synthetic_samples(5, 4);
        let b = synthetic_samples(5, 4);
        assert_eq!(a.len(), 12);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values, y.values);
        }
        for class in 0..3 {
            assert_eq!(a.iter().filter(|s| s.label.index == class).count(), 4);
        }
        let c = synthetic_samples(6, 4);
        assert_ne!(a[0].values, c[0].values);
    }

    fn synthetic_cfg(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.split = "SYNTHETIC".into();
        cfg.output_dir = dir.to_path_buf();
        cfg
    }

    #[test]
    fn synthetic_ml_baseline_is_nearly_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synthetic_cfg(dir.path());
        cfg.backend = BackendKind::Knn;
        cfg.normalization = Method::Ss;
        let rec = run_experiment(&cfg).unwrap();
        assert!(rec.accuracy > 95.0, "accuracy {}", rec.accuracy);
        assert!((rec.accuracy - rec.accuracy_from_confusion()).abs() < 1e-12);
    }

    #[test]
    fn synthetic_usdlm_with_euclidean_exceeds_95() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synthetic_cfg(dir.path());
        cfg.pipeline = Pipeline::USdlm;
        cfg.normalization = Method::Ss;
        cfg.backend = BackendKind::Euclidean;
        cfg.train.epochs = 20;
        let rec = run_experiment(&cfg).unwrap();
        assert!(rec.accuracy > 95.0, "accuracy {}", rec.accuracy);
        // the deep run also leaves a loss log and checkpoint behind
        assert!(dir.path().join(format!("loss_{}.csv", rec.digest)).is_file());
        assert!(dir.path().join(format!("model_{}.ckpt", rec.digest)).is_file());
    }

    #[test]
    fn rerun_with_identical_config_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let run = |dir: &Path| {
            let mut cfg = synthetic_cfg(dir);
            cfg.pipeline = Pipeline::USdlm;
            cfg.normalization = Method::Ss;
            cfg.train.epochs = 3;
            let rec = run_experiment(&cfg).unwrap();
            let record = std::fs::read(dir.join(format!("record_{}.json", rec.digest))).unwrap();
            let losses = std::fs::read(dir.join(format!("loss_{}.csv", rec.digest))).unwrap();
            (record, losses)
        };
        let a = run(dir_a.path());
        let b = run(dir_b.path());
        // the stored config embeds the output dir; results must not
        let rec_a = String::from_utf8(a.0).unwrap().replace(&dir_a.path().display().to_string(), "");
        let rec_b = String::from_utf8(b.0).unwrap().replace(&dir_b.path().display().to_string(), "");
        assert_eq!(rec_a, rec_b);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn cached_record_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = synthetic_cfg(dir.path());
        cfg.backend = BackendKind::Knn;
        let first = run_experiment(&cfg).unwrap();
        let path = dir.path().join(format!("record_{}.json", first.digest));
        let mut stored = StoredRecord::load(&path).unwrap();
        stored.record.accuracy = 12.34; // marker proving the cache is read
        std::fs::write(&path, serde_json::to_string(&stored).unwrap()).unwrap();
        let second = run_experiment(&cfg).unwrap();
        assert_eq!(second.accuracy, 12.34);
    }

    #[test]
    fn train_inputs_are_independent_of_the_test_side() {
        let mut cfg = ExperimentConfig::default();
        cfg.pipeline = Pipeline::RobustMbfd;
        cfg.normalization = Method::Ss;
        let train_s = synthetic_samples(11, 6);
        let (a, _) = build_train_sets(&cfg, &train_s, &synthetic_samples(12, 6)).unwrap();
        let (b, _) = build_train_sets(&cfg, &train_s, &synthetic_samples(13, 6)).unwrap();
        assert_eq!(a.windows, b.windows);
        assert_eq!(a.features, b.features);
        assert_eq!(a.labels, b.labels);
    }

    /// Seeds a fake PU archive of canonical containers so the PU-C2
    /// aggregation path runs without the real dataset.
    fn fake_pu_dir(dir: &Path) {
        let pu = dir.join("PU");
        std::fs::create_dir_all(&pu).unwrap();
        let ids = [
            "K001", "K002", "K003", "K004", "K005", "KA04", "KA15", "KA16", "KA22", "KA30",
            "KI04", "KI14", "KI16", "KI18", "KI21",
        ];
        for (k, id) in ids.iter().enumerate() {
            let class = k / 5;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + k as u64);
            let samples: Vec<f64> = (0..4096)
                .map(|i| {
                    let t = i as f64 / 64_000.0;
                    let f = 500.0 * (class + 1) as f64;
                    (std::f64::consts::TAU * f * t).sin() + 0.05 * rng.gen_range(-1.0..1.0)
                })
                .collect();
            let rec =
                VibrationRecording::new(samples, 64_000.0, *id, Dataset::Pu, None).unwrap();
            write_canonical(&rec, &pu.join(format!("{id}.f32"))).unwrap();
        }
    }

    #[test]
    fn pu_c2_aggregates_ten_sub_results() {
        let data = tempfile::tempdir().unwrap();
        fake_pu_dir(data.path());
        let out = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.split = "PU-C2".into();
        cfg.backend = BackendKind::Knn;
        cfg.normalization = Method::Ss;
        cfg.data_dir = Some(data.path().to_path_buf());
        cfg.output_dir = out.path().to_path_buf();
        let rec = run_experiment(&cfg).unwrap();
        assert_eq!(rec.sub_accuracies.len(), 10);
        let mean = rec.sub_accuracies.iter().sum::<f64>() / 10.0;
        assert!((rec.accuracy - mean).abs() < 1e-12);
        // equal test sizes per combination: mean equals the pooled accuracy
        assert!((rec.accuracy - rec.accuracy_from_confusion()).abs() < 1e-9);
        let total: usize = rec.confusion.iter().flatten().sum();
        assert_eq!(total, 10 * 6); // 10 combinations x 6 test bearings
    }

    #[test]
    fn missing_data_directory_is_reported_as_missing_data() {
        let data = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.split = "PU-C1".into();
        cfg.data_dir = Some(data.path().to_path_buf());
        cfg.output_dir = out.path().to_path_buf();
        assert!(matches!(run_experiment(&cfg), Err(MbfdError::MissingData(_))));
    }

    fn stored(backend: BackendKind, method: Method, acc: f64) -> StoredRecord {
        let mut config = ExperimentConfig::default();
        config.backend = backend;
        config.normalization = method;
        StoredRecord {
            config,
            record: ResultRecord {
                digest: "x".into(),
                accuracy: acc,
                confusion: vec![vec![1, 0], vec![0, 1]],
                seed: 0,
                sub_accuracies: vec![],
                wall_time_s: 0.0,
            },
        }
    }

    #[test]
    fn empty_table_renders_header_only() {
        assert_eq!(emit_table_csv(&[]), "backend,MAS,SS,RS,N,QT,PT\n");
        assert_eq!(emit_table_markdown(&[]).lines().count(), 2);
    }

    #[test]
    fn table_cells_match_their_records_and_gaps_render_as_dashes() {
        let records = vec![
            stored(BackendKind::Svm, Method::Mas, 91.25),
            stored(BackendKind::Svm, Method::Norm, 72.72),
            stored(BackendKind::Euclidean, Method::Ss, 88.0),
        ];
        let csv = emit_table_csv(&records);
        assert_eq!(
            csv,
            "backend,MAS,SS,RS,N,QT,PT\nSVM,91.25,—,—,72.72,—,—\nEUCLIDEAN,—,88.00,—,—,—,—\n"
        );
        let md = emit_table_markdown(&records);
        assert!(md.contains("| SVM | 91.25 | — | — | 72.72 | — | — |"));
        // rows without any record are omitted entirely
        assert!(!csv.contains("KNN"));
    }
}
