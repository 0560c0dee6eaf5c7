//! TSSF tensor files and layer-bundle manifests.
//!
//! TSSF layout, all integers little-endian:
//!
//! ```text
//! offset  size       field
//! 0       4          magic "TSSF"
//! 4       1          version = 1
//! 5       1          dtype   = 1 (f32)
//! 6       2          flags   = 0 (reserved)
//! 8       4          ndim (u32)
//! 12      8 * ndim   dims (u64 each)
//! ...     4 * prod   payload, row-major f32
//! ```
//!
//! A feature map is a 3-d file with dims `(C, H, W)`.
//!
//! A bundle manifest lists one `layer_name<TAB>relative_path` per line.
//! Blank lines and lines starting with `#` are ignored. Paths are relative
//! to the manifest's directory.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::layers::{LayerFeatures, VggLayer};
use crate::tensor::FeatureMap;

pub const MAGIC: [u8; 4] = *b"TSSF";
pub const VERSION: u8 = 1;
pub const DTYPE_F32: u8 = 1;
const FIXED_HEADER: usize = 12;

/// A tensor of any rank as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<u64>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn into_feature_map(self) -> Result<FeatureMap> {
        if self.dims.len() != 3 {
            return Err(Error::dim(format!(
                "feature map files must be 3-d, found {} dims",
                self.dims.len()
            )));
        }
        let d = |i: usize| {
            usize::try_from(self.dims[i]).map_err(|_| Error::dim("dimension exceeds usize"))
        };
        FeatureMap::new(d(0)?, d(1)?, d(2)?, self.data)
    }
}

/// Serializes a tensor to TSSF bytes.
pub fn encode(dims: &[u64], data: &[f32]) -> Result<Vec<u8>> {
    let count = element_count(dims)?;
    if count != data.len() as u64 {
        return Err(Error::dim(format!(
            "dims {dims:?} describe {count} values, got {}",
            data.len()
        )));
    }
    let ndim = u32::try_from(dims.len()).map_err(|_| Error::dim("too many dimensions"))?;
    let mut out = Vec::with_capacity(FIXED_HEADER + 8 * dims.len() + 4 * data.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(DTYPE_F32);
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(&ndim.to_le_bytes());
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn element_count(dims: &[u64]) -> Result<u64> {
    dims.iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::dim(format!("dims {dims:?} overflow")))
}

fn truncated(section: &'static str, expected: usize, actual: usize) -> Error {
    Error::Truncated {
        section,
        expected: expected as u64,
        actual: actual as u64,
    }
}

/// Parses and validates TSSF bytes.
pub fn decode(bytes: &[u8]) -> Result<RawTensor> {
    if bytes.len() < FIXED_HEADER {
        return Err(truncated("header", FIXED_HEADER, bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    if bytes[5] != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(bytes[5]));
    }
    let flags = u16::from_le_bytes([bytes[6], bytes[7]]);
    if flags != 0 {
        return Err(Error::ReservedFlags(flags));
    }
    let ndim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let header = ndim
        .checked_mul(8)
        .and_then(|n| n.checked_add(FIXED_HEADER))
        .ok_or_else(|| Error::dim("ndim overflows"))?;
    if bytes.len() < header {
        return Err(truncated("dims", header, bytes.len()));
    }
    let dims: Vec<u64> = bytes[FIXED_HEADER..header]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let payload = &bytes[header..];
    let expected = element_count(&dims)?
        .checked_mul(4)
        .ok_or_else(|| Error::dim(format!("dims {dims:?} overflow")))?;
    if (payload.len() as u64) < expected {
        return Err(Error::Truncated {
            section: "payload",
            expected,
            actual: payload.len() as u64,
        });
    }
    if payload.len() as u64 > expected {
        return Err(Error::TrailingBytes {
            extra: payload.len() as u64 - expected,
        });
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(RawTensor { dims, data })
}

pub fn write_raw(path: impl AsRef<Path>, dims: &[u64], data: &[f32]) -> Result<()> {
    let bytes = encode(dims, data)?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawTensor> {
    decode(&fs::read(path)?)
}

/// Writes a feature map as a 3-d TSSF file.
pub fn write_tssf(f: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let dims: Vec<u64> = f.shape().iter().map(|&d| d as u64).collect();
    write_raw(path, &dims, f.data())
}

/// Reads a 3-d TSSF file as a feature map.
pub fn read_tssf(path: impl AsRef<Path>) -> Result<FeatureMap> {
    read_raw(path)?.into_feature_map()
}

/// Parses manifest text into `(layer, path)` entries, resolving paths against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<(VggLayer, PathBuf)>> {
    let mut entries: Vec<(VggLayer, PathBuf)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Manifest {
            line: line_no,
            message,
        };
        let (name, rel) = line
            .split_once('\t')
            .ok_or_else(|| bad(format!("expected name<TAB>path, got {line:?}")))?;
        if rel.is_empty() {
            return Err(bad("empty path".into()));
        }
        let layer: VggLayer = name
            .parse()
            .map_err(|_| bad(format!("unknown layer {name:?}")))?;
        if entries.iter().any(|(l, _)| *l == layer) {
            return Err(bad(format!("duplicate layer {name}")));
        }
        entries.push((layer, base.join(rel)));
    }
    if entries.is_empty() {
        return Err(Error::Manifest {
            line: 0,
            message: "manifest lists no layers".into(),
        });
    }
    Ok(entries)
}

/// Loads every layer listed in a manifest, in canonical layer order.
pub fn read_bundle(manifest: impl AsRef<Path>) -> Result<LayerFeatures> {
    let manifest = manifest.as_ref();
    let text = fs::read_to_string(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let entries = parse_manifest(&text, base)?
        .into_iter()
        .map(|(layer, path)| read_tssf(&path).map(|f| (layer, f)))
        .collect::<Result<Vec<_>>>()?;
    LayerFeatures::new(entries)
}

/// Writes `<stem>_<layer>.tssf` per layer plus `<stem>.manifest` into `dir`.
/// Returns the manifest path.
pub fn write_bundle(
    features: &LayerFeatures,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for (layer, f) in features.iter() {
        let file = format!("{stem}_{layer}.tssf");
        write_tssf(f, dir.join(&file))?;
        manifest.push_str(&format!("{layer}\t{file}\n"));
    }
    let path = dir.join(format!("{stem}.manifest"));
    fs::write(&path, manifest)?;
    Ok(path)
}
