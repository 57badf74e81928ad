//! Model checkpoints: one archive holding a JSON manifest followed by the
//! named parameter arrays as row-major little-endian f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::ArrayD;
use serde::{Deserialize, Serialize};

use super::{Architecture, CnnConfig, ModelState, Network};
use crate::error::MbfdError;
use crate::nn::Params;
use crate::Result;

const MAGIC: &[u8; 8] = b"MBFDCKP1";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    architecture: Architecture,
    seed: u64,
    classes: usize,
    input_len: usize,
    cnn: Option<CnnConfig>,
    mlp_input: Option<usize>,
    mlp_widths: Option<Vec<usize>>,
}

fn manifest_of(state: &ModelState) -> Manifest {
    let (cnn, mlp_input, mlp_widths) = match &state.net {
        Network::Cnn(m) => (Some(m.cfg), None, None),
        Network::Mlp(m) => (None, Some(m.input_dim()), Some(m.widths())),
        Network::Robust(r) => (Some(r.cnn.cfg), Some(r.mlp.input_dim()), Some(r.mlp.widths())),
    };
    Manifest {
        architecture: state.arch,
        seed: state.seed,
        classes: state.classes,
        input_len: state.input_len,
        cnn,
        mlp_input,
        mlp_widths,
    }
}

pub fn save_checkpoint(path: &Path, state: &mut ModelState) -> Result<()> {
    let wrap = |e: std::io::Error| MbfdError::Io { path: path.to_path_buf(), source: e };
    let mut arrays: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    state.visit_params("", &mut |name, t| {
        let data = t.value.iter().map(|&v| v as f32).collect();
        arrays.push((name.to_string(), t.value.shape().to_vec(), data));
    });
    let manifest = serde_json::to_vec(&manifest_of(state))?;
    let mut w = BufWriter::new(File::create(path).map_err(wrap)?);
    (|| -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(manifest.len() as u32)?;
        w.write_all(&manifest)?;
        w.write_u32::<LittleEndian>(arrays.len() as u32)?;
        for (name, shape, data) in &arrays {
            w.write_u32::<LittleEndian>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            w.write_u32::<LittleEndian>(shape.len() as u32)?;
            for &d in shape {
                w.write_u64::<LittleEndian>(d as u64)?;
            }
            for &v in data {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
        w.flush()
    })()
    .map_err(wrap)
}

pub fn load_checkpoint(path: &Path) -> Result<ModelState> {
    let wrap = |e: std::io::Error| MbfdError::Io { path: path.to_path_buf(), source: e };
    let bad = |reason: &str| MbfdError::BadContainer { path: path.to_path_buf(), reason: reason.to_string() };
    let mut r = BufReader::new(File::open(path).map_err(wrap)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(wrap)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let mlen = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
    let mut mbuf = vec![0u8; mlen];
    r.read_exact(&mut mbuf).map_err(wrap)?;
    let manifest: Manifest = serde_json::from_slice(&mbuf)?;

    let cnn_cfg = manifest
        .cnn
        .unwrap_or_else(|| CnnConfig::full(manifest.input_len, manifest.classes));
    let mlp_input = manifest.mlp_input.unwrap_or(crate::features::FEATURE_COUNT);
    let mlp_widths = manifest.mlp_widths.unwrap_or_else(|| super::MLP_WIDTHS.to_vec());
    let mut state =
        ModelState::with_config(manifest.architecture, cnn_cfg, mlp_input, &mlp_widths, manifest.seed);

    let count = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
    let mut arrays = std::collections::HashMap::new();
    for _ in 0..count {
        let nlen = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
        let mut nbuf = vec![0u8; nlen];
        r.read_exact(&mut nbuf).map_err(wrap)?;
        let name = String::from_utf8(nbuf).map_err(|_| bad("non-utf8 array name"))?;
        let ndim = r.read_u32::<LittleEndian>().map_err(wrap)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.read_u64::<LittleEndian>().map_err(wrap)? as usize);
        }
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.read_f32::<LittleEndian>().map_err(wrap)? as f64);
        }
        let arr = ArrayD::from_shape_vec(shape, data).map_err(|_| bad("shape/data mismatch"))?;
        arrays.insert(name, arr);
    }

    let mut missing = Vec::new();
    let mut shape_err = false;
    state.visit_params("", &mut |name, t| match arrays.remove(name) {
        Some(arr) if arr.shape() == t.value.shape() => t.value = arr,
        Some(_) => shape_err = true,
        None => missing.push(name.to_string()),
    });
    if shape_err {
        return Err(bad("parameter shape mismatch"));
    }
    if !missing.is_empty() {
        return Err(bad(&format!("missing parameters: {missing:?}")));
    }
    Ok(state)
}
