//! Ingestion of vibration recordings and segmentation into labeled samples.
//!
//! Recordings come either from the canonical container (raw f32 little-endian
//! plus a JSON sidecar, see [`canonical`]) or from the published MATLAB
//! Level-5 archives via the per-dataset adapters in [`adapters`].

pub mod adapters;
pub mod canonical;
pub mod mat5;

use serde::{Deserialize, Serialize};

use crate::{MbfdError, Result};

/// Which published archive a recording came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dataset {
    Pu,
    Cwru,
    Mfpt,
    Synthetic,
}

impl std::str::FromStr for Dataset {
    type Err = MbfdError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PU" => Ok(Dataset::Pu),
            "CWRU" => Ok(Dataset::Cwru),
            "MFPT" => Ok(Dataset::Mfpt),
            "SYNTHETIC" => Ok(Dataset::Synthetic),
            other => Err(MbfdError::InvalidConfig(format!("unknown dataset {other:?}"))),
        }
    }
}

impl std::fmt::Display for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Dataset::Pu => "PU",
            Dataset::Cwru => "CWRU",
            Dataset::Mfpt => "MFPT",
            Dataset::Synthetic => "SYNTHETIC",
        };
        f.write_str(s)
    }
}

/// Class identity within one split's class set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLabel {
    pub index: usize,
    pub name: String,
}

impl ClassLabel {
    pub fn new(index: usize, name: impl Into<String>) -> Self {
        Self { index, name: name.into() }
    }
}

/// One sensor channel of raw vibration.
#[derive(Debug, Clone)]
pub struct VibrationRecording {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub source_id: String,
    pub dataset: Dataset,
    pub label: Option<ClassLabel>,
}

impl VibrationRecording {
    /// Validates the container invariants: non-empty, positive rate, finite.
    pub fn new(
        samples: Vec<f64>,
        sample_rate: f64,
        source_id: impl Into<String>,
        dataset: Dataset,
        label: Option<ClassLabel>,
    ) -> Result<Self> {
        let source_id = source_id.into();
        if samples.is_empty() {
            return Err(MbfdError::InvalidSignal(format!("{source_id}: empty recording")));
        }
        if !(sample_rate > 0.0) {
            return Err(MbfdError::InvalidSignal(format!(
                "{source_id}: sample rate {sample_rate} not positive"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(MbfdError::NonFinite(source_id));
        }
        Ok(Self { samples, sample_rate, source_id, dataset, label })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Fixed-length labeled segment; the unit of classification.
#[derive(Debug, Clone)]
pub struct VibrationSample {
    pub values: Vec<f64>,
    pub sample_rate: f64,
    pub label: ClassLabel,
    /// (source recording id, start index within that recording)
    pub origin: (String, usize),
}

impl VibrationSample {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Window length in samples for a window of `window_ms` at `sample_rate`.
pub fn window_len(window_ms: f64, sample_rate: f64) -> usize {
    (window_ms / 1000.0 * sample_rate).floor() as usize
}

/// Cuts `rec` into fixed windows of `window_ms` with the given overlap.
///
/// Windows start at multiples of `hop = floor(w * (1 - overlap))`; a trailing
/// remainder shorter than one window is discarded. Each sample inherits the
/// recording's label, which must be present.
pub fn segment(
    rec: &VibrationRecording,
    window_ms: f64,
    overlap_fraction: f64,
) -> Result<Vec<VibrationSample>> {
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(MbfdError::InvalidConfig(format!(
            "overlap fraction {overlap_fraction} outside [0,1)"
        )));
    }
    let w = window_len(window_ms, rec.sample_rate);
    if w < 1 {
        return Err(MbfdError::InvalidConfig(format!(
            "window of {window_ms} ms is shorter than one sample at {} Hz",
            rec.sample_rate
        )));
    }
    if rec.len() < w {
        return Err(MbfdError::InvalidSignal(format!(
            "{}: recording of {} samples shorter than window {w}",
            rec.source_id,
            rec.len()
        )));
    }
    let hop = (w as f64 * (1.0 - overlap_fraction)).floor() as usize;
    if hop == 0 {
        return Err(MbfdError::InvalidConfig("hop is zero; overlap too large".into()));
    }
    let label = rec.label.clone().ok_or_else(|| {
        MbfdError::InvalidSignal(format!("{}: cannot segment an unlabeled recording", rec.source_id))
    })?;
    let count = (rec.len() - w) / hop + 1;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start = i * hop;
        out.push(VibrationSample {
            values: rec.samples[start..start + w].to_vec(),
            sample_rate: rec.sample_rate,
            label: label.clone(),
            origin: (rec.source_id.clone(), start),
        });
    }
    Ok(out)
}

/// Splits a recording in time: the first `floor(train_fraction * L)` samples
/// versus the remainder. Both parts must end up non-empty.
pub fn time_split(
    rec: &VibrationRecording,
    train_fraction: f64,
) -> Result<(VibrationRecording, VibrationRecording)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(MbfdError::InvalidConfig(format!(
            "train fraction {train_fraction} outside (0,1)"
        )));
    }
    let cut = (train_fraction * rec.len() as f64).floor() as usize;
    if cut == 0 || cut == rec.len() {
        return Err(MbfdError::InvalidSignal(format!(
            "{}: {}/{} split leaves an empty part",
            rec.source_id,
            cut,
            rec.len()
        )));
    }
    let mut head = rec.clone();
    head.samples.truncate(cut);
    let mut tail = rec.clone();
    tail.samples.drain(..cut);
    Ok((head, tail))
}
