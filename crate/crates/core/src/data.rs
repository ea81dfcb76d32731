//! Raster and matrix types shared across the pipeline.
//!
//! Cubes keep their samples in band-sequential order (`band * N + pixel`,
//! pixels in row-major order). All arithmetic is `f64`; the on-disk format
//! stores `f32`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An L-band hyperspectral raster.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    width: usize,
    height: usize,
    bands: usize,
    values: Vec<f64>,
}

impl HsiCube {
    /// Builds a cube from band-sequential samples.
    pub fn from_bsq(width: usize, height: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::Dimensions(format!(
                "cube must be non-empty, got {width}x{height}x{bands}"
            )));
        }
        let expected = width * height * bands;
        if values.len() != expected {
            return Err(Error::Dimensions(format!(
                "expected {expected} samples for {width}x{height}x{bands}, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            bands,
            values,
        })
    }

    /// Builds a cube from band-interleaved-by-pixel samples (`pixel * L + band`).
    pub fn from_bip(width: usize, height: usize, bands: usize, values: &[f64]) -> Result<Self> {
        let n = width * height;
        if values.len() != n * bands {
            return Err(Error::Dimensions(format!(
                "expected {} samples, got {}",
                n * bands,
                values.len()
            )));
        }
        let mut bsq = vec![0.0; values.len()];
        for p in 0..n {
            for b in 0..bands {
                bsq[b * n + p] = values[p * bands + b];
            }
        }
        Self::from_bsq(width, height, bands, bsq)
    }

    /// Builds a cube from per-pixel spectra given in row-major pixel order.
    pub fn from_pixels(width: usize, height: usize, pixels: &[Vec<f64>]) -> Result<Self> {
        let bands = pixels.first().map_or(0, Vec::len);
        if pixels.iter().any(|p| p.len() != bands) {
            return Err(Error::Dimensions("ragged pixel spectra".into()));
        }
        let flat: Vec<f64> = pixels.iter().flatten().copied().collect();
        Self::from_bip(width, height, bands, &flat)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Pixel count `N = width * height`.
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Band-sequential samples.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Spectrum of the pixel at `(row, col)`.
    pub fn spectrum(&self, row: usize, col: usize) -> Vec<f64> {
        self.spectrum_at(row * self.width + col)
    }

    /// Spectrum of the pixel with row-major index `pixel`.
    pub fn spectrum_at(&self, pixel: usize) -> Vec<f64> {
        let n = self.pixel_count();
        (0..self.bands).map(|b| self.values[b * n + pixel]).collect()
    }

    /// Overwrites the spectrum of pixel `pixel`.
    pub fn set_spectrum_at(&mut self, pixel: usize, spectrum: &[f64]) -> Result<()> {
        if spectrum.len() != self.bands {
            return Err(Error::Mismatch(format!(
                "spectrum has {} bands, cube has {}",
                spectrum.len(),
                self.bands
            )));
        }
        if let Some(i) = spectrum.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let n = self.pixel_count();
        for (b, &v) in spectrum.iter().enumerate() {
            self.values[b * n + pixel] = v;
        }
        Ok(())
    }

    /// Rounds every sample to the nearest `f32`, the precision the raster
    /// format stores.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.values {
            *v = f64::from(*v as f32);
        }
    }

    /// Flattens the cube to the `L x N` pixel matrix.
    pub fn flatten(&self) -> PixelMatrix {
        let n = self.pixel_count();
        let l = self.bands;
        // BSQ is row-major L x N, which is exactly the transpose of
        // nalgebra's column-major layout.
        let data = DMatrix::from_row_slice(l, n, &self.values);
        PixelMatrix {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// The image as an `L x N` matrix, one spectral pixel per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMatrix {
    width: usize,
    height: usize,
    data: DMatrix<f64>,
}

impl PixelMatrix {
    /// Wraps a matrix whose columns are the pixels of a `width x height` raster.
    pub fn new(width: usize, height: usize, data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() != width * height {
            return Err(Error::Dimensions(format!(
                "matrix has {} columns, raster has {} pixels",
                data.ncols(),
                width * height
            )));
        }
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Dimensions("empty pixel matrix".into()));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Wraps an arbitrary `L x N` matrix as a `N x 1` raster.
    pub fn from_columns(data: DMatrix<f64>) -> Result<Self> {
        let n = data.ncols();
        Self::new(n, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixel_count(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// Rebuilds the cube this matrix was flattened from.
    pub fn unflatten(&self) -> Result<HsiCube> {
        let l = self.bands();
        let n = self.pixel_count();
        let mut values = Vec::with_capacity(l * n);
        for b in 0..l {
            values.extend(self.data.row(b).iter().copied());
        }
        HsiCube::from_bsq(self.width, self.height, l, values)
    }
}

/// Binary anomaly mask, `true` marks an anomalous pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMask {
    width: usize,
    height: usize,
    labels: Vec<bool>,
}

impl GroundTruthMask {
    pub fn new(width: usize, height: usize, labels: Vec<bool>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Dimensions(format!(
                "mask of {width}x{height} needs {} labels, got {}",
                width * height,
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn set(&mut self, pixel: usize, anomalous: bool) {
        self.labels[pixel] = anomalous;
    }

    /// Number of anomalous pixels.
    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn matches(&self, width: usize, height: usize) -> bool {
        self.width == width && self.height == height
    }
}

/// Per-pixel anomaly scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    scores: Vec<f64>,
}

impl ScoreMap {
    pub fn new(width: usize, height: usize, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != width * height || scores.is_empty() {
            return Err(Error::Dimensions(format!(
                "score map of {width}x{height} needs {} scores, got {}",
                width * height,
                scores.len()
            )));
        }
        if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            width,
            height,
            scores,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Rounds every score to `f32` precision, as stored on disk.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.scores {
            *v = f64::from(*v as f32);
        }
    }

    /// Min-max normalizes scores to `[0, 1]`.
    ///
    /// A constant map normalizes to all zeros.
    pub fn normalized(&self) -> ScoreMap {
        let (lo, hi) = self
            .scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        let scores = if range > 0.0 {
            self.scores
                .iter()
                .map(|&v| if v == hi { 1.0 } else { (v - lo) / range })
                .collect()
        } else {
            vec![0.0; self.scores.len()]
        };
        ScoreMap {
            width: self.width,
            height: self.height,
            scores,
        }
    }
}

/// Free-function form of [`ScoreMap::normalized`].
pub fn normalize_scores(scores: &ScoreMap) -> ScoreMap {
    scores.normalized()
}
