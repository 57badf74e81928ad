//! Minimal reader for MATLAB Level-5 (`.mat`) files.
//!
//! Supports what the published bearing archives need: top-level numeric
//! matrices (double/single/integer classes), zlib-compressed elements, and
//! 8-byte element alignment. Non-numeric elements (structs, cells, chars)
//! are skipped by name so the caller can report a missing channel precisely.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian};
use flate2::read::ZlibDecoder;

use crate::{MbfdError, Result};

const MI_INT8: u32 = 1;
const MI_UINT8: u32 = 2;
const MI_INT16: u32 = 3;
const MI_UINT16: u32 = 4;
const MI_INT32: u32 = 5;
const MI_UINT32: u32 = 6;
const MI_SINGLE: u32 = 7;
const MI_DOUBLE: u32 = 9;
const MI_MATRIX: u32 = 14;
const MI_COMPRESSED: u32 = 15;

/// One numeric variable: column-major data plus its dimensions.
#[derive(Debug, Clone)]
pub struct MatVariable {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

/// All numeric top-level variables of a `.mat` file, keyed by name.
pub fn read_mat(path: &Path) -> Result<BTreeMap<String, MatVariable>> {
    if !path.exists() {
        return Err(MbfdError::MissingFile(path.to_path_buf()));
    }
    let bytes = std::fs::read(path)
        .map_err(|e| MbfdError::Io { path: path.to_path_buf(), source: e })?;
    parse_mat(&bytes).map_err(|reason| MbfdError::BadContainer { path: path.to_path_buf(), reason })
}

type ParseResult<T> = std::result::Result<T, String>;

fn parse_mat(bytes: &[u8]) -> ParseResult<BTreeMap<String, MatVariable>> {
    if bytes.len() < 128 {
        return Err("shorter than the 128-byte MAT header".into());
    }
    let endian = &bytes[126..128];
    if endian != b"IM" {
        return Err(format!("unsupported endian indicator {:?}", endian));
    }
    let mut vars = BTreeMap::new();
    let mut offset = 128usize;
    while offset + 8 <= bytes.len() {
        let (dtype, size, data_start, next) = read_tag(bytes, offset)?;
        let body = bytes
            .get(data_start..data_start + size)
            .ok_or_else(|| format!("element at {offset} overruns the file"))?;
        match dtype {
            MI_COMPRESSED => {
                let mut decoder = ZlibDecoder::new(body);
                let mut inner = Vec::new();
                decoder
                    .read_to_end(&mut inner)
                    .map_err(|e| format!("zlib inflate failed: {e}"))?;
                let (itype, isize, istart, _) = read_tag(&inner, 0)?;
                if itype == MI_MATRIX {
                    if let Some((name, var)) = parse_matrix(&inner[istart..istart + isize])? {
                        vars.insert(name, var);
                    }
                }
            }
            MI_MATRIX => {
                if let Some((name, var)) = parse_matrix(body)? {
                    vars.insert(name, var);
                }
            }
            _ => {} // unexpected at top level; skip
        }
        offset = next;
    }
    Ok(vars)
}

/// Parses one element tag. Returns (type, byte size, data offset, next element offset).
fn read_tag(bytes: &[u8], offset: usize) -> ParseResult<(u32, usize, usize, usize)> {
    if offset + 8 > bytes.len() {
        return Err("truncated element tag".into());
    }
    let word = LittleEndian::read_u32(&bytes[offset..offset + 4]);
    if word >> 16 != 0 {
        // small data element: type and size packed into the first word
        let dtype = word & 0xffff;
        let size = (word >> 16) as usize;
        Ok((dtype, size, offset + 4, offset + 8))
    } else {
        let size = LittleEndian::read_u32(&bytes[offset + 4..offset + 8]) as usize;
        let padded = if word == MI_COMPRESSED { size } else { (size + 7) & !7 };
        Ok((word, size, offset + 8, offset + 8 + padded))
    }
}

fn parse_matrix(body: &[u8]) -> ParseResult<Option<(String, MatVariable)>> {
    // subelements: array flags, dimensions, name, real data [, imag]
    let (ftype, fsize, fstart, mut off) = read_tag(body, 0)?;
    if ftype != MI_UINT32 || fsize < 8 {
        return Err("malformed array-flags subelement".into());
    }
    let flags = LittleEndian::read_u32(&body[fstart..fstart + 4]);
    let class = flags & 0xff;

    let (dtype, dsize, dstart, off2) = read_tag(body, off)?;
    if dtype != MI_INT32 {
        return Err("malformed dimensions subelement".into());
    }
    let dims: Vec<usize> = body[dstart..dstart + dsize]
        .chunks_exact(4)
        .map(|c| LittleEndian::read_i32(c).max(0) as usize)
        .collect();
    off = off2;

    let (ntype, nsize, nstart, off3) = read_tag(body, off)?;
    if ntype != MI_INT8 {
        return Err("malformed array-name subelement".into());
    }
    let name = String::from_utf8_lossy(&body[nstart..nstart + nsize]).into_owned();
    off = off3;

    // numeric classes only: double=6, single=7, int8..uint32 = 8..13
    if !(6..=13).contains(&class) {
        return Ok(None);
    }
    let (vtype, vsize, vstart, _) = read_tag(body, off)?;
    let raw = body
        .get(vstart..vstart + vsize)
        .ok_or_else(|| format!("data of {name} overruns the element"))?;
    let data = decode_numeric(vtype, raw)?;
    let expected: usize = dims.iter().product();
    if data.len() != expected {
        return Err(format!("{name}: {} values for dims {:?}", data.len(), dims));
    }
    Ok(Some((name, MatVariable { dims, data })))
}

fn decode_numeric(dtype: u32, raw: &[u8]) -> ParseResult<Vec<f64>> {
    let out = match dtype {
        MI_DOUBLE => raw.chunks_exact(8).map(LittleEndian::read_f64).collect(),
        MI_SINGLE => raw.chunks_exact(4).map(|c| LittleEndian::read_f32(c) as f64).collect(),
        MI_INT8 => raw.iter().map(|&b| b as i8 as f64).collect(),
        MI_UINT8 => raw.iter().map(|&b| b as f64).collect(),
        MI_INT16 => raw.chunks_exact(2).map(|c| LittleEndian::read_i16(c) as f64).collect(),
        MI_UINT16 => raw.chunks_exact(2).map(|c| LittleEndian::read_u16(c) as f64).collect(),
        MI_INT32 => raw.chunks_exact(4).map(|c| LittleEndian::read_i32(c) as f64).collect(),
        MI_UINT32 => raw.chunks_exact(4).map(|c| LittleEndian::read_u32(c) as f64).collect(),
        other => return Err(format!("unsupported numeric storage type {other}")),
    };
    Ok(out)
}

/// Serializes numeric variables into MAT5 bytes (uncompressed). Used by tests
/// and by the synthetic-archive tooling.
pub fn write_mat(vars: &[(&str, &[usize], &[f64])]) -> Vec<u8> {
    let mut out = vec![0u8; 128];
    let text = b"MATLAB 5.0 MAT-file, written by mbfd";
    out[..text.len()].copy_from_slice(text);
    for b in out.iter_mut().take(116).skip(text.len()) {
        *b = b' ';
    }
    LittleEndian::write_u16(&mut out[124..126], 0x0100);
    out[126] = b'I';
    out[127] = b'M';

    for &(name, dims, data) in vars {
        let mut body = Vec::new();
        // array flags: class double
        push_tag(&mut body, MI_UINT32, 8);
        body.extend_from_slice(&6u32.to_le_bytes());
        body.extend_from_slice(&0u32.to_le_bytes());
        // dimensions
        push_tag(&mut body, MI_INT32, dims.len() * 4);
        for &d in dims {
            body.extend_from_slice(&(d as i32).to_le_bytes());
        }
        pad8(&mut body);
        // name
        push_tag(&mut body, MI_INT8, name.len());
        body.extend_from_slice(name.as_bytes());
        pad8(&mut body);
        // real data
        push_tag(&mut body, MI_DOUBLE, data.len() * 8);
        for &v in data {
            body.extend_from_slice(&v.to_le_bytes());
        }
        pad8(&mut body);

        push_tag(&mut out, MI_MATRIX, body.len());
        out.extend_from_slice(&body);
    }
    out
}

fn push_tag(buf: &mut Vec<u8>, dtype: u32, size: usize) {
    buf.extend_from_slice(&dtype.to_le_bytes());
    buf.extend_from_slice(&(size as u32).to_le_bytes());
}

fn pad8(buf: &mut Vec<u8>) {
    while buf.len() % 8 != 0 {
        buf.push(0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flate2::write::ZlibEncoder;
    use flate2::Compression;
    use std::io::Write;

    #[test]
    fn round_trip_plain() {
        let data: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let bytes = write_mat(&[("X097_DE_time", &[6, 1], &data)]);
        let vars = parse_mat(&bytes).unwrap();
        let v = &vars["X097_DE_time"];
        assert_eq!(v.dims, vec![6, 1]);
        assert_eq!(v.data, data);
    }

    #[test]
    fn round_trip_compressed() {
        let data: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let plain = write_mat(&[("bearing", &[16, 1], &data)]);
        // re-wrap the matrix element as miCOMPRESSED
        let element = &plain[128..];
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(element).unwrap();
        let compressed = enc.finish().unwrap();
        let mut bytes = plain[..128].to_vec();
        push_tag(&mut bytes, MI_COMPRESSED, compressed.len());
        bytes.extend_from_slice(&compressed);
        let vars = parse_mat(&bytes).unwrap();
        assert_eq!(vars["bearing"].data, data);
    }

    #[test]
    fn truncated_file_is_rejected() {
        assert!(parse_mat(&[0u8; 16]).is_err());
    }
}
