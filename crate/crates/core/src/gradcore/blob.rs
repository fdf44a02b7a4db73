//! Parameter set storage: a JSON manifest of names and shapes plus one
//! contiguous little-endian `f64` blob.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Array, Parameter};
use crate::textio::{read_bytes, read_json, write_bytes, write_json};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOB_FILE: &str = "params.bin";
const FORMAT: &str = "f64-le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the blob, counted in values (not bytes).
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamManifest {
    pub format: String,
    pub total_values: usize,
    pub entries: Vec<ManifestEntry>,
}

impl ParamManifest {
    pub fn describe(params: &[&Parameter]) -> Self {
        let mut offset = 0;
        let entries = params
            .iter()
            .map(|p| {
                let e = ManifestEntry {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    offset,
                };
                offset += p.value.len();
                e
            })
            .collect();
        Self {
            format: FORMAT.into(),
            total_values: offset,
            entries,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!("unsupported blob format `{}`", self.format)));
        }
        let mut seen = HashSet::new();
        let mut offset = 0;
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Checkpoint(format!("parameter `{}` listed twice", e.name)));
            }
            if e.offset != offset {
                return Err(Error::Checkpoint(format!(
                    "parameter `{}` starts at {} but {} was expected",
                    e.name, e.offset, offset
                )));
            }
            offset += e.shape.iter().product::<usize>();
        }
        if offset != self.total_values {
            return Err(Error::Checkpoint(format!(
                "manifest entries cover {offset} values, header says {}",
                self.total_values
            )));
        }
        Ok(())
    }
}

pub fn encode_values(params: &[&Parameter]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * params.iter().map(|p| p.value.len()).sum::<usize>());
    for p in params {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_params(params: &[&Parameter], dir: &Path) -> Result<()> {
    write_json(&dir.join(MANIFEST_FILE), &ParamManifest::describe(params))?;
    write_bytes(&dir.join(BLOB_FILE), &encode_values(params))
}

/// Reads `(name, value)` pairs in manifest order.
pub fn read_params(dir: &Path) -> Result<Vec<(String, Array)>> {
    let manifest: ParamManifest = read_json(&dir.join(MANIFEST_FILE))
        .map_err(|e| Error::Checkpoint(format!("corrupt manifest: {e}")))?;
    manifest.validate()?;
    let bytes = read_bytes(&dir.join(BLOB_FILE))?;
    if bytes.len() != 8 * manifest.total_values {
        return Err(Error::Checkpoint(format!(
            "blob holds {} bytes, manifest expects {}",
            bytes.len(),
            8 * manifest.total_values
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    manifest
        .entries
        .into_iter()
        .map(|e| {
            let n: usize = e.shape.iter().product();
            let arr = Array::from_vec(&e.shape, values[e.offset..e.offset + n].to_vec())?;
            Ok((e.name, arr))
        })
        .collect()
}

/// Copies stored values into `params`, requiring identical names, order and
/// shapes.
pub fn assign_params(params: &mut [&mut Parameter], stored: Vec<(String, Array)>) -> Result<()> {
    if params.len() != stored.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} parameters, model expects {}",
            stored.len(),
            params.len()
        )));
    }
    for (p, (name, value)) in params.iter_mut().zip(stored) {
        if p.name != name {
            return Err(Error::Checkpoint(format!(
                "parameter `{name}` found where `{}` was expected",
                p.name
            )));
        }
        if p.value.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "checkpoint parameter `{name}` has shape {:?}, model expects {:?}",
                value.shape(),
                p.value.shape()
            )));
        }
        p.value = value;
    }
    Ok(())
}
