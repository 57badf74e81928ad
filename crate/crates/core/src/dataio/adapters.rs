//! Per-dataset adapters from published archive layouts to [`VibrationRecording`].
//!
//! Exactly one channel is selected per dataset (CWRU: drive-end accelerometer;
//! PU: vibration channel; MFPT: the sole channel). Variable-name mapping and
//! fallback sample rates live in [`AdapterConfig`] so archive quirks are
//! configuration rather than code.

use std::path::Path;

use super::canonical::read_canonical;
use super::mat5::read_mat;
use super::{Dataset, VibrationRecording};
use crate::{MbfdError, Result};

/// A PU vibration sample is one whole recording, validated/truncated to this
/// many datapoints.
pub const PU_SAMPLE_LEN: usize = 255_900;

/// Channel selection and sample-rate fallbacks for the MATLAB archives.
#[derive(Debug, Clone)]
pub struct AdapterConfig {
    /// Substring the CWRU drive-end channel variable name must contain.
    pub cwru_channel_substr: String,
    pub cwru_sample_rate: f64,
    /// Substring of the PU vibration channel variable name.
    pub pu_channel_substr: String,
    pub pu_sample_rate: f64,
    /// MFPT rate for healthy recordings (N*).
    pub mfpt_healthy_rate: f64,
    /// MFPT rate for the constant-load outer race recordings (O1..O3).
    pub mfpt_outer_fixed_rate: f64,
    /// MFPT rate for inner race and load-varied outer race recordings.
    pub mfpt_fault_rate: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            cwru_channel_substr: "_DE_time".into(),
            cwru_sample_rate: 12_000.0,
            pu_channel_substr: "vibration".into(),
            pu_sample_rate: 64_000.0,
            mfpt_healthy_rate: 97_656.0,
            mfpt_outer_fixed_rate: 48_802.0,
            mfpt_fault_rate: 48_828.0,
        }
    }
}

/// Loads one recording with the default adapter configuration.
pub fn load_recording(path: &Path, dataset: Dataset, source_id: &str) -> Result<VibrationRecording> {
    load_recording_with(path, dataset, source_id, &AdapterConfig::default())
}

/// Loads one recording. `.f32` files go through the canonical container;
/// `.mat` files go through the dataset's channel selection.
pub fn load_recording_with(
    path: &Path,
    dataset: Dataset,
    source_id: &str,
    cfg: &AdapterConfig,
) -> Result<VibrationRecording> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f32") => {
            let mut rec = read_canonical(path)?;
            rec.dataset = dataset;
            rec.source_id = source_id.to_string();
            Ok(rec)
        }
        Some("mat") => load_mat_recording(path, dataset, source_id, cfg),
        _ => Err(MbfdError::BadContainer {
            path: path.to_path_buf(),
            reason: "expected a .f32 canonical container or a .mat archive".into(),
        }),
    }
}

fn load_mat_recording(
    path: &Path,
    dataset: Dataset,
    source_id: &str,
    cfg: &AdapterConfig,
) -> Result<VibrationRecording> {
    let vars = read_mat(path)?;
    let (substr, rate) = match dataset {
        Dataset::Cwru => (cfg.cwru_channel_substr.as_str(), cfg.cwru_sample_rate),
        Dataset::Pu => (cfg.pu_channel_substr.as_str(), cfg.pu_sample_rate),
        Dataset::Mfpt => ("", mfpt_rate(source_id, cfg)),
        Dataset::Synthetic => ("", 0.0),
    };
    let chosen = if substr.is_empty() {
        // MFPT / synthetic: the sole channel = the longest numeric vector
        vars.iter().max_by_key(|(_, v)| v.data.len())
    } else {
        vars.iter().find(|(name, _)| name.contains(substr))
    };
    let (_, var) = chosen.ok_or_else(|| MbfdError::ChannelAbsent {
        path: path.to_path_buf(),
        channel: if substr.is_empty() { "<sole channel>".into() } else { substr.to_string() },
    })?;
    if rate <= 0.0 {
        return Err(MbfdError::InvalidConfig(format!(
            "no sample rate configured for {source_id} in {dataset}"
        )));
    }
    VibrationRecording::new(var.data.clone(), rate, source_id, dataset, None)
}

fn mfpt_rate(source_id: &str, cfg: &AdapterConfig) -> f64 {
    if source_id.starts_with('N') {
        cfg.mfpt_healthy_rate
    } else if matches!(source_id, "O1" | "O2" | "O3") {
        cfg.mfpt_outer_fixed_rate
    } else {
        cfg.mfpt_fault_rate
    }
}
