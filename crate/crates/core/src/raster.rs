//! On-disk raster format.
//!
//! A file is one JSON header line terminated by `\n`, followed by the raw
//! little-endian payload:
//!
//! ```text
//! {"width":W,"height":H,"bands":L,"dtype":"f32","interleave":"bsq","byte_order":"little"}\n
//! <W*H*L samples>
//! ```
//!
//! Cubes and score maps use `f32`, masks use `u8` (0/1) and label maps use
//! `u32`. Readers accept both `bsq` and `bip` interleave; writers emit `bsq`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{GroundTruthMask, HsiCube, ScoreMap};
use crate::error::{Error, Result};
use crate::segmentation::SuperpixelMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U8,
    U32,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 | Dtype::U32 => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interleave {
    Bsq,
    Bip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ByteOrder {
    Little,
}

/// The JSON header line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RasterHeader {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub dtype: Dtype,
    pub interleave: Interleave,
    pub byte_order: ByteOrder,
}

impl RasterHeader {
    pub fn new(width: usize, height: usize, bands: usize, dtype: Dtype) -> Self {
        Self {
            width,
            height,
            bands,
            dtype,
            interleave: Interleave::Bsq,
            byte_order: ByteOrder::Little,
        }
    }

    fn sample_count(&self) -> usize {
        self.width * self.height * self.bands
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.bands == 0 {
            return Err(Error::Header(format!(
                "dimensions must be positive, got {}x{}x{}",
                self.width, self.height, self.bands
            )));
        }
        Ok(())
    }
}

/// Splits a raster file into its header and payload.
pub fn parse_raster(bytes: &[u8]) -> Result<(RasterHeader, &[u8])> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Header("missing header line".into()))?;
    let header: RasterHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Header(e.to_string()))?;
    header.validate()?;
    let payload = &bytes[nl + 1..];
    let expected = header.sample_count() * header.dtype.size();
    if payload.len() != expected {
        return Err(Error::SizeMismatch {
            expected,
            found: payload.len(),
        });
    }
    Ok((header, payload))
}

fn encode(header: &RasterHeader, payload: &[u8]) -> Vec<u8> {
    let mut out = serde_json::to_vec(header).expect("header serializes");
    out.push(b'\n');
    out.extend_from_slice(payload);
    out
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes `bytes` to `path`, creating parent directories.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn expect_dtype(header: &RasterHeader, dtype: Dtype) -> Result<()> {
    if header.dtype != dtype {
        return Err(Error::Header(format!(
            "expected dtype {dtype:?}, found {:?}",
            header.dtype
        )));
    }
    Ok(())
}

fn decode_f32(payload: &[u8]) -> Vec<f64> {
    payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect()
}

fn encode_f32(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect()
}

/// Decodes a cube from raster bytes.
pub fn decode_cube(bytes: &[u8]) -> Result<HsiCube> {
    let (header, payload) = parse_raster(bytes)?;
    expect_dtype(&header, Dtype::F32)?;
    let values = decode_f32(payload);
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    match header.interleave {
        Interleave::Bsq => HsiCube::from_bsq(header.width, header.height, header.bands, values),
        Interleave::Bip => HsiCube::from_bip(header.width, header.height, header.bands, &values),
    }
}

/// Encodes a cube as band-sequential `f32`.
pub fn encode_cube(cube: &HsiCube) -> Vec<u8> {
    let header = RasterHeader::new(cube.width(), cube.height(), cube.bands(), Dtype::F32);
    encode(&header, &encode_f32(cube.values()))
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HsiCube> {
    decode_cube(&read_file(path.as_ref())?)
}

pub fn save_cube(cube: &HsiCube, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_cube(cube))
}

pub fn decode_mask(bytes: &[u8]) -> Result<GroundTruthMask> {
    let (header, payload) = parse_raster(bytes)?;
    expect_dtype(&header, Dtype::U8)?;
    if header.bands != 1 {
        return Err(Error::Header("mask must have exactly one band".into()));
    }
    let mut labels = Vec::with_capacity(payload.len());
    for (i, &b) in payload.iter().enumerate() {
        match b {
            0 => labels.push(false),
            1 => labels.push(true),
            other => {
                return Err(Error::Header(format!(
                    "mask byte {other} at index {i} is not 0 or 1"
                )))
            }
        }
    }
    GroundTruthMask::new(header.width, header.height, labels)
}

pub fn encode_mask(mask: &GroundTruthMask) -> Vec<u8> {
    let header = RasterHeader::new(mask.width(), mask.height(), 1, Dtype::U8);
    let payload: Vec<u8> = mask.labels().iter().map(|&l| u8::from(l)).collect();
    encode(&header, &payload)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<GroundTruthMask> {
    decode_mask(&read_file(path.as_ref())?)
}

pub fn save_mask(mask: &GroundTruthMask, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_mask(mask))
}

pub fn decode_scores(bytes: &[u8]) -> Result<ScoreMap> {
    let (header, payload) = parse_raster(bytes)?;
    expect_dtype(&header, Dtype::F32)?;
    if header.bands != 1 {
        return Err(Error::Header("score map must have exactly one band".into()));
    }
    ScoreMap::new(header.width, header.height, decode_f32(payload))
}

pub fn encode_scores(scores: &ScoreMap) -> Vec<u8> {
    let header = RasterHeader::new(scores.width(), scores.height(), 1, Dtype::F32);
    encode(&header, &encode_f32(scores.scores()))
}

pub fn load_scores(path: impl AsRef<Path>) -> Result<ScoreMap> {
    decode_scores(&read_file(path.as_ref())?)
}

pub fn save_scores(scores: &ScoreMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_scores(scores))
}

pub fn decode_labels(bytes: &[u8]) -> Result<SuperpixelMap> {
    let (header, payload) = parse_raster(bytes)?;
    expect_dtype(&header, Dtype::U32)?;
    if header.bands != 1 {
        return Err(Error::Header("label map must have exactly one band".into()));
    }
    let labels: Vec<u32> = payload
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    SuperpixelMap::new(header.width, header.height, labels)
}

pub fn encode_labels(map: &SuperpixelMap) -> Vec<u8> {
    let header = RasterHeader::new(map.width(), map.height(), 1, Dtype::U32);
    let payload: Vec<u8> = map.labels().iter().flat_map(|l| l.to_le_bytes()).collect();
    encode(&header, &payload)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<SuperpixelMap> {
    decode_labels(&read_file(path.as_ref())?)
}

pub fn save_labels(map: &SuperpixelMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_labels(map))
}

/// Renders the `pixel_index,row,col,score` table with LF line endings.
pub fn scores_csv(scores: &ScoreMap) -> String {
    let mut out = String::from("pixel_index,row,col,score\n");
    let w = scores.width();
    for (i, s) in scores.scores().iter().enumerate() {
        out.push_str(&format!("{i},{},{},{s}\n", i / w, i % w));
    }
    out
}

pub fn save_scores_csv(scores: &ScoreMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), scores_csv(scores).as_bytes())
}
