//! Canonical on-disk container for a vibration recording.
//!
//! A recording `name` is stored as two files with the same basename:
//! `name.f32` — raw 32-bit little-endian IEEE-754 floats — and `name.json`,
//! a sidecar `{"sample_rate": .., "source_id": .., "dataset": .., "label": ..}`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::{ClassLabel, Dataset, VibrationRecording};
use crate::{MbfdError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    sample_rate: f64,
    source_id: String,
    dataset: String,
    label: Option<String>,
    /// Class index for the label, when labeled.
    #[serde(default)]
    label_index: Option<usize>,
}

fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

/// Reads a recording from `path` (the `.f32` file; the sidecar is located by
/// swapping the extension).
pub fn read_canonical(path: &Path) -> Result<VibrationRecording> {
    if !path.exists() {
        return Err(MbfdError::MissingFile(path.to_path_buf()));
    }
    let side = sidecar_path(path);
    if !side.exists() {
        return Err(MbfdError::MissingFile(side));
    }
    let meta: Sidecar = serde_json::from_str(
        &fs::read_to_string(&side).map_err(|e| MbfdError::Io { path: side.clone(), source: e })?,
    )?;
    let mut file =
        fs::File::open(path).map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    if bytes.len() % 4 != 0 {
        return Err(MbfdError::BadContainer {
            path: path.to_path_buf(),
            reason: format!("byte length {} not a multiple of 4", bytes.len()),
        });
    }
    let mut cursor = std::io::Cursor::new(bytes);
    let n = cursor.get_ref().len() / 4;
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        samples.push(cursor.read_f32::<LittleEndian>().unwrap() as f64);
    }
    let dataset: Dataset = meta.dataset.parse()?;
    let label = meta
        .label
        .map(|name| ClassLabel { index: meta.label_index.unwrap_or(0), name });
    VibrationRecording::new(samples, meta.sample_rate, meta.source_id, dataset, label)
}

/// Writes `rec` to `path` (`.f32`) plus its JSON sidecar.
pub fn write_canonical(rec: &VibrationRecording, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .map_err(|e| MbfdError::Io { path: parent.to_path_buf(), source: e })?;
    }
    let mut buf = Vec::with_capacity(rec.len() * 4);
    for &v in &rec.samples {
        buf.write_f32::<LittleEndian>(v as f32).unwrap();
    }
    fs::write(path, &buf).map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    let meta = Sidecar {
        sample_rate: rec.sample_rate,
        source_id: rec.source_id.clone(),
        dataset: rec.dataset.to_string(),
        label: rec.label.as_ref().map(|l| l.name.clone()),
        label_index: rec.label.as_ref().map(|l| l.index),
    };
    let side = sidecar_path(path);
    let mut f =
        fs::File::create(&side).map_err(|e| MbfdError::Io { path: side.clone(), source: e })?;
    f.write_all(serde_json::to_string_pretty(&meta)?.as_bytes())
        .map_err(|e| MbfdError::Io { path: side, source: e })?;
    Ok(())
}
