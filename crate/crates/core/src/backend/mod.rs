//! Back-end classifiers over hand-crafted features or learned embeddings:
//! SVM (RBF, one-vs-one), kNN, random forest, and nearest-centroid by
//! Euclidean distance or cosine similarity.
//!
//! All tie-breaking resolves to the lowest class index so predictions are
//! deterministic. Fitted models are immutable and serializable.

pub mod centroid;
pub mod forest;
pub mod knn;
pub mod svm;

pub use centroid::CentroidModel;
pub use forest::ForestModel;
pub use knn::KnnModel;
pub use svm::SvmModel;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::MbfdError;
use crate::Result;

/// Which classifier to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    Svm,
    Knn,
    Rf,
    Euclidean,
    Cosine,
}

impl std::str::FromStr for BackendKind {
    type Err = MbfdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SVM" => Ok(Self::Svm),
            "KNN" => Ok(Self::Knn),
            "RF" => Ok(Self::Rf),
            "EUCLIDEAN" => Ok(Self::Euclidean),
            "COSINE" => Ok(Self::Cosine),
            other => Err(MbfdError::InvalidConfig(format!("unknown backend {other:?}"))),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Svm => "SVM",
            Self::Knn => "KNN",
            Self::Rf => "RF",
            Self::Euclidean => "EUCLIDEAN",
            Self::Cosine => "COSINE",
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendParams {
    pub seed: u64,
    /// Distance classifiers: compare against every training sample instead
    /// of the per-class centroid.
    pub nearest_neighbor_distance: bool,
}

impl Default for BackendParams {
    fn default() -> Self {
        Self { seed: 0, nearest_neighbor_distance: false }
    }
}

/// A fitted classifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum BackendModel {
    Svm(SvmModel),
    Knn(KnnModel),
    Rf(ForestModel),
    Centroid(CentroidModel),
}

pub(crate) fn validate_training(x: &Array2<f64>, y: &[usize]) -> Result<()> {
    if x.dim().0 == 0 {
        return Err(MbfdError::EmptyInput("training matrix".into()));
    }
    if x.dim().0 != y.len() {
        return Err(MbfdError::ShapeMismatch(format!(
            "{} samples vs {} labels",
            x.dim().0,
            y.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MbfdError::NonFinite("training matrix".into()));
    }
    Ok(())
}

pub fn fit_backend(
    kind: BackendKind,
    x: &Array2<f64>,
    y: &[usize],
    params: &BackendParams,
) -> Result<BackendModel> {
    validate_training(x, y)?;
    Ok(match kind {
        BackendKind::Svm => BackendModel::Svm(SvmModel::fit(x, y, params.seed)?),
        BackendKind::Knn => BackendModel::Knn(KnnModel::fit(x, y)),
        BackendKind::Rf => BackendModel::Rf(ForestModel::fit(x, y, params.seed)),
        BackendKind::Euclidean => BackendModel::Centroid(CentroidModel::fit(
            x,
            y,
            centroid::Metric::Euclidean,
            params.nearest_neighbor_distance,
        )),
        BackendKind::Cosine => BackendModel::Centroid(CentroidModel::fit(
            x,
            y,
            centroid::Metric::Cosine,
            params.nearest_neighbor_distance,
        )),
    })
}

pub fn predict(model: &BackendModel, x: &Array2<f64>) -> Result<Vec<usize>> {
    match model {
        BackendModel::Svm(m) => m.predict(x),
        BackendModel::Knn(m) => m.predict(x),
        BackendModel::Rf(m) => m.predict(x),
        BackendModel::Centroid(m) => m.predict(x),
    }
}

pub fn save_backend(path: &Path, model: &BackendModel) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    serde_json::to_writer(std::io::BufWriter::new(file), model)?;
    Ok(())
}

pub fn load_backend(path: &Path) -> Result<BackendModel> {
    let file = std::fs::File::open(path)
        .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// Majority vote with ties resolved to the lowest class index.
pub(crate) fn majority(votes: &[usize]) -> usize {
    let mut counts = std::collections::BTreeMap::new();
    for &v in votes {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&c, _)| c)
        .unwrap()
}
