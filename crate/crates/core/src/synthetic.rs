//! Desk-scale synthetic scenes with implanted target panels.
//!
//! The background is a spatially clustered mixture of smooth endmember
//! spectra. Target panels follow the five-row layout of the LCVF protocol:
//! two rows of 2x2 panels and three rows of single pixels, each row carrying
//! the abundances 100%, 25%, 50%, 75% and 95%. Targets are blended with the
//! linear mixture `x = f t + (1 - f) b`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{GroundTruthMask, HsiCube};
use crate::error::{Error, Result};

/// The per-row abundances of the panel table.
pub const TABLE_ABUNDANCES: [f64; 5] = [1.00, 0.25, 0.50, 0.75, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackgroundParams {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub materials: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_std: f64,
    /// Spatial cells per material.
    pub cells_per_material: usize,
    pub seed: u64,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            width: 100,
            height: 100,
            bands: 50,
            materials: 4,
            noise_std: 0.01,
            cells_per_material: 3,
            seed: 7,
        }
    }
}

/// A generated background with its construction truth.
#[derive(Debug, Clone)]
pub struct Background {
    pub cube: HsiCube,
    /// Material with the largest abundance at each pixel.
    pub dominant: Vec<usize>,
    /// `L x materials` endmember spectra.
    pub endmembers: DMatrix<f64>,
    /// Held-out endmember scaled to the background magnitude.
    pub target: Vec<f64>,
}

fn smooth_spectrum<R: Rng>(bands: usize, rng: &mut R) -> Vec<f64> {
    let base = rng.gen_range(0.15..0.45);
    let slope = rng.gen_range(-0.15..0.15);
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-0.15..0.3),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.05..0.2),
            )
        })
        .collect();
    (0..bands)
        .map(|b| {
            let t = if bands > 1 {
                b as f64 / (bands - 1) as f64
            } else {
                0.5
            };
            let v = base
                + slope * (t - 0.5)
                + bumps
                    .iter()
                    .map(|&(a, c, w)| a * (-(t - c).powi(2) / (2.0 * w * w)).exp())
                    .sum::<f64>();
            v.max(0.02)
        })
        .collect()
}

/// Generates a background cube.
///
/// Every pixel is a convex combination of `materials` endmembers whose
/// weights fall off with distance to each material's spatial cells, plus
/// Gaussian noise. With `materials == 1` and zero noise every pixel equals
/// the single endmember.
pub fn generate_background(params: &BackgroundParams) -> Result<Background> {
    let BackgroundParams {
        width,
        height,
        bands,
        materials,
        noise_std,
        cells_per_material,
        seed,
    } = *params;
    if width == 0 || height == 0 || bands == 0 {
        return Err(Error::Dimensions(format!(
            "scene must be non-empty, got {width}x{height}x{bands}"
        )));
    }
    if materials == 0 || cells_per_material == 0 {
        return Err(Error::InvalidParameter(
            "need at least one material and one cell per material".into(),
        ));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise_std must be non-negative, got {noise_std}"
        )));
    }
    let n = width * height;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let spectra: Vec<Vec<f64>> = (0..=materials)
        .map(|_| smooth_spectrum(bands, &mut rng))
        .collect();
    let endmembers = DMatrix::from_fn(bands, materials, |b, m| spectra[m][b]);

    let cells: Vec<(f64, f64, usize)> = (0..materials * cells_per_material)
        .map(|k| {
            (
                rng.gen_range(0.0..height as f64),
                rng.gen_range(0.0..width as f64),
                k % materials,
            )
        })
        .collect();
    let cell_scale = ((n as f64) / cells.len() as f64).sqrt();
    let falloff = 2.0 * (0.2 * cell_scale).powi(2);

    let noise = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut bip = vec![0.0; n * bands];
    let mut dominant = vec![0usize; n];
    for p in 0..n {
        let (r, c) = ((p / width) as f64 + 0.5, (p % width) as f64 + 0.5);
        let mut nearest = vec![f64::INFINITY; materials];
        for &(cr, cc, m) in &cells {
            let d2 = (r - cr).powi(2) + (c - cc).powi(2);
            nearest[m] = nearest[m].min(d2);
        }
        let dmin = nearest.iter().copied().fold(f64::INFINITY, f64::min);
        let mut weights: Vec<f64> = nearest
            .iter()
            .map(|&d2| (-(d2 - dmin) / falloff).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        dominant[p] = (0..materials)
            .max_by(|&a, &b| weights[a].total_cmp(&weights[b]).then(b.cmp(&a)))
            .unwrap_or(0);
        for b in 0..bands {
            let mut v: f64 = (0..materials).map(|m| weights[m] * spectra[m][b]).sum();
            if noise_std > 0.0 {
                v += noise.sample(&mut rng);
            }
            bip[p * bands + b] = f64::from(v as f32);
        }
    }
    let cube = HsiCube::from_bip(width, height, bands, &bip)?;

    let bg_mean = bip.iter().sum::<f64>() / bip.len() as f64;
    let held_out = &spectra[materials];
    let t_mean = held_out.iter().sum::<f64>() / bands as f64;
    let target = held_out
        .iter()
        .map(|&v| f64::from((v * bg_mean / t_mean) as f32))
        .collect();

    Ok(Background {
        cube,
        dominant,
        endmembers,
        target,
    })
}

/// One row of target panels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    /// Row of the panel grid, 1-based.
    pub row_block: usize,
    /// Side length of each panel in pixels.
    pub panel_size: usize,
    /// Target abundance of each panel in the row, left to right.
    pub abundances: Vec<f64>,
}

/// The five panel rows of the LCVF layout.
pub fn table_panels() -> Vec<PanelSpec> {
    (1..=5)
        .map(|row_block| PanelSpec {
            row_block,
            panel_size: if row_block <= 2 { 2 } else { 1 },
            abundances: TABLE_ABUNDANCES.to_vec(),
        })
        .collect()
}

/// Placement of the panel grid: top-left corner of the first panel and the
/// pitch between panel origins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelLayout {
    pub origin_row: usize,
    pub origin_col: usize,
    pub row_spacing: usize,
    pub col_spacing: usize,
}

impl PanelLayout {
    /// Centers a `rows x cols` panel grid in a `width x height` image.
    pub fn centered(width: usize, height: usize, rows: usize, cols: usize) -> Self {
        let row_spacing = (height / (rows + 1)).max(3);
        let col_spacing = (width / (cols + 1)).max(3);
        Self {
            origin_row: row_spacing.saturating_sub(1),
            origin_col: col_spacing.saturating_sub(1),
            row_spacing,
            col_spacing,
        }
    }
}

/// Where a panel landed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedPanel {
    pub row: usize,
    pub col: usize,
    pub size: usize,
    pub abundance: f64,
}

/// Implants target panels into `base`; returns the new cube, the mask of
/// modified pixels and the panel placements.
pub fn implant_panels(
    base: &HsiCube,
    target: &[f64],
    panels: &[PanelSpec],
    layout: &PanelLayout,
) -> Result<(HsiCube, GroundTruthMask, Vec<PlacedPanel>)> {
    if target.len() != base.bands() {
        return Err(Error::Mismatch(format!(
            "target has {} bands, cube has {}",
            target.len(),
            base.bands()
        )));
    }
    let (w, h) = (base.width(), base.height());
    let mut cube = base.clone();
    let mut mask = GroundTruthMask::empty(w, h);
    let mut placed = Vec::new();
    for spec in panels {
        if spec.row_block == 0 || spec.panel_size == 0 {
            return Err(Error::InvalidParameter(
                "panel rows are 1-based and sizes positive".into(),
            ));
        }
        let top = layout.origin_row + (spec.row_block - 1) * layout.row_spacing;
        for (k, &f) in spec.abundances.iter().enumerate() {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "abundance {f} outside (0, 1]"
                )));
            }
            let left = layout.origin_col + k * layout.col_spacing;
            if top + spec.panel_size > h || left + spec.panel_size > w {
                return Err(Error::InvalidParameter(format!(
                    "panel at ({top}, {left}) of size {} exceeds {w}x{h}",
                    spec.panel_size
                )));
            }
            for r in top..top + spec.panel_size {
                for c in left..left + spec.panel_size {
                    let p = r * w + c;
                    if mask.labels()[p] {
                        return Err(Error::InvalidParameter(format!(
                            "panels overlap at ({r}, {c})"
                        )));
                    }
                    let b = base.spectrum_at(p);
                    let mixed: Vec<f64> = if f == 1.0 {
                        target.to_vec()
                    } else {
                        b.iter()
                            .zip(target)
                            .map(|(&bv, &tv)| f * tv + (1.0 - f) * bv)
                            .collect()
                    };
                    cube.set_spectrum_at(p, &mixed)?;
                    mask.set(p, true);
                }
            }
            placed.push(PlacedPanel {
                row: top,
                col: left,
                size: spec.panel_size,
                abundance: f,
            });
        }
    }
    cube.quantize_f32();
    Ok((cube, mask, placed))
}

/// Parameters of a complete synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub background: BackgroundParams,
    pub panels: Vec<PanelSpec>,
    /// Panel grid placement; centered when absent.
    pub layout: Option<PanelLayout>,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            background: BackgroundParams::default(),
            panels: table_panels(),
            layout: None,
        }
    }
}

/// Provenance sidecar written next to a generated scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneProvenance {
    pub seed: u64,
    pub background: BackgroundParams,
    pub mixture_model: String,
    pub target_spectrum: Vec<f64>,
    pub abundances: Vec<f64>,
    pub panels: Vec<PlacedPanel>,
    pub anomalous_pixels: usize,
}

/// A generated scene ready for detection.
#[derive(Debug, Clone)]
pub struct Scene {
    pub cube: HsiCube,
    pub mask: GroundTruthMask,
    pub provenance: SceneProvenance,
}

/// Generates a background and implants the configured panels.
pub fn generate_scene(params: &SceneParams) -> Result<Scene> {
    let bg = generate_background(&params.background)?;
    let cols = params
        .panels
        .iter()
        .map(|p| p.abundances.len())
        .max()
        .unwrap_or(0);
    let rows = params
        .panels
        .iter()
        .map(|p| p.row_block)
        .max()
        .unwrap_or(0);
    let layout = params.layout.unwrap_or_else(|| {
        PanelLayout::centered(params.background.width, params.background.height, rows, cols)
    });
    let (cube, mask, placed) = implant_panels(&bg.cube, &bg.target, &params.panels, &layout)?;
    let provenance = SceneProvenance {
        seed: params.background.seed,
        background: params.background.clone(),
        mixture_model: "linear: x = f*t + (1-f)*b".into(),
        target_spectrum: bg.target.clone(),
        abundances: placed.iter().map(|p| p.abundance).collect(),
        anomalous_pixels: mask.anomaly_count(),
        panels: placed,
    };
    Ok(Scene {
        cube,
        mask,
        provenance,
    })
}
