//! Union dictionary `D = [D_B D_A]`.
//!
//! Background atoms are density-peak representatives of every superpixel;
//! anomaly atoms are the pixels with the largest RX scores. Atoms are exact
//! copies of image pixels and keep their raw spectral scale.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{PixelMatrix, ScoreMap};
use crate::density::select_representatives;
use crate::error::{Error, Result};
use crate::segmentation::SuperpixelMap;

/// Where a dictionary atom came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum AtomSource {
    /// Density-peak representative `rank` of superpixel `superpixel`.
    Superpixel { superpixel: u32, rank: usize },
    /// The `rank`-th largest RX score (0 = largest).
    Rx { rank: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomProvenance {
    pub pixel_index: usize,
    #[serde(flatten)]
    pub source: AtomSource,
}

/// A set of atoms with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Atoms {
    pub matrix: DMatrix<f64>,
    pub provenance: Vec<AtomProvenance>,
}

impl Atoms {
    fn from_pixels(x: &DMatrix<f64>, provenance: Vec<AtomProvenance>) -> Self {
        let mut matrix = DMatrix::zeros(x.nrows(), provenance.len());
        for (k, p) in provenance.iter().enumerate() {
            matrix.set_column(k, &x.column(p.pixel_index));
        }
        Self { matrix, provenance }
    }

    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

/// The union dictionary with background atoms first.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionDictionary {
    atoms: DMatrix<f64>,
    k_background: usize,
    provenance: Vec<AtomProvenance>,
    dropped_background: usize,
}

impl UnionDictionary {
    /// Builds a dictionary directly from a matrix, treating the first
    /// `k_background` columns as background atoms.
    pub fn from_matrix(atoms: DMatrix<f64>, k_background: usize) -> Result<Self> {
        if atoms.ncols() == 0 || atoms.nrows() == 0 {
            return Err(Error::Dimensions("dictionary must have atoms".into()));
        }
        if k_background > atoms.ncols() {
            return Err(Error::InvalidParameter(format!(
                "{k_background} background atoms out of {}",
                atoms.ncols()
            )));
        }
        Ok(Self {
            atoms,
            k_background,
            provenance: Vec::new(),
            dropped_background: 0,
        })
    }

    /// `L x K` atom matrix.
    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn bands(&self) -> usize {
        self.atoms.nrows()
    }

    /// Total atom count `K`.
    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    pub fn k_background(&self) -> usize {
        self.k_background
    }

    pub fn k_anomaly(&self) -> usize {
        self.atoms.ncols() - self.k_background
    }

    /// Background sub-dictionary `D_B`.
    pub fn background(&self) -> DMatrix<f64> {
        self.atoms.columns(0, self.k_background).into_owned()
    }

    /// Per-atom provenance; empty for dictionaries built from a bare matrix.
    pub fn provenance(&self) -> &[AtomProvenance] {
        &self.provenance
    }

    /// Background candidates removed because the RX selection also took them.
    pub fn dropped_background(&self) -> usize {
        self.dropped_background
    }

    /// Keeps only the background atoms.
    pub fn background_only(&self) -> Result<Self> {
        if self.k_background == 0 {
            return Err(Error::Dimensions("no background atoms".into()));
        }
        Ok(Self {
            atoms: self.background(),
            k_background: self.k_background,
            provenance: self.provenance[..self.provenance.len().min(self.k_background)].to_vec(),
            dropped_background: self.dropped_background,
        })
    }
}

/// Density-peak representatives of every superpixel, `min(m, size)` each,
/// ordered by (superpixel, rank).
pub fn build_background(
    x: &PixelMatrix,
    superpixels: &SuperpixelMap,
    m_per_superpixel: usize,
    cutoff_quantile: f64,
) -> Result<Atoms> {
    if superpixels.width() != x.width() || superpixels.height() != x.height() {
        return Err(Error::Mismatch(
            "superpixel map does not match the image".into(),
        ));
    }
    if m_per_superpixel == 0 {
        return Err(Error::InvalidParameter(
            "need at least one sample per superpixel".into(),
        ));
    }
    let members = superpixels.members();
    let data = x.matrix();
    let picked: Vec<Vec<AtomProvenance>> = members
        .par_iter()
        .enumerate()
        .map(|(id, pixels)| {
            let points = DMatrix::from_fn(data.nrows(), pixels.len(), |b, k| data[(b, pixels[k])]);
            let m = m_per_superpixel.min(pixels.len());
            let reps = select_representatives(&points, m, cutoff_quantile)?;
            Ok(reps
                .into_iter()
                .enumerate()
                .map(|(rank, k)| AtomProvenance {
                    pixel_index: pixels[k],
                    source: AtomSource::Superpixel {
                        superpixel: id as u32,
                        rank,
                    },
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(Atoms::from_pixels(data, picked.into_iter().flatten().collect()))
}

/// The `p` pixels with the largest RX scores, descending (ties by index).
pub fn build_anomaly(x: &PixelMatrix, rx: &ScoreMap, p: usize) -> Result<Atoms> {
    let n = x.pixel_count();
    if rx.len() != n {
        return Err(Error::Mismatch(format!(
            "{} RX scores for {n} pixels",
            rx.len()
        )));
    }
    if p > n {
        return Err(Error::InvalidParameter(format!(
            "cannot take {p} anomaly atoms from {n} pixels"
        )));
    }
    let s = rx.scores();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    let provenance = order
        .into_iter()
        .take(p)
        .enumerate()
        .map(|(rank, pixel_index)| AtomProvenance {
            pixel_index,
            source: AtomSource::Rx { rank },
        })
        .collect();
    Ok(Atoms::from_pixels(x.matrix(), provenance))
}

/// Concatenates background and anomaly atoms. A pixel chosen by both is kept
/// only on the anomaly side.
pub fn union(background: &Atoms, anomaly: &Atoms) -> Result<UnionDictionary> {
    let bands = if background.is_empty() {
        anomaly.matrix.nrows()
    } else {
        background.matrix.nrows()
    };
    if !anomaly.is_empty() && anomaly.matrix.nrows() != bands {
        return Err(Error::Mismatch(format!(
            "background atoms have {} bands, anomaly atoms {}",
            background.matrix.nrows(),
            anomaly.matrix.nrows()
        )));
    }
    let anomalous: std::collections::HashSet<usize> =
        anomaly.provenance.iter().map(|p| p.pixel_index).collect();
    let kept: Vec<usize> = (0..background.len())
        .filter(|&k| !anomalous.contains(&background.provenance[k].pixel_index))
        .collect();
    let k_background = kept.len();
    let total = k_background + anomaly.len();
    if total == 0 {
        return Err(Error::Dimensions("union dictionary would be empty".into()));
    }
    let mut atoms = DMatrix::zeros(bands, total);
    let mut provenance = Vec::with_capacity(total);
    for (col, &k) in kept.iter().enumerate() {
        atoms.set_column(col, &background.matrix.column(k));
        provenance.push(background.provenance[k]);
    }
    for k in 0..anomaly.len() {
        atoms.set_column(k_background + k, &anomaly.matrix.column(k));
        provenance.push(anomaly.provenance[k]);
    }
    Ok(UnionDictionary {
        atoms,
        k_background,
        provenance,
        dropped_background: background.len() - k_background,
    })
}

/// Dictionary-construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DictionaryParams {
    /// Background samples per superpixel.
    pub m_per_superpixel: usize,
    /// Anomaly samples taken from the top of the RX ranking.
    pub p_anomaly: usize,
    /// Density cutoff quantile within each superpixel.
    pub cutoff_quantile: f64,
}

impl Default for DictionaryParams {
    fn default() -> Self {
        Self {
            m_per_superpixel: 5,
            p_anomaly: 50,
            cutoff_quantile: crate::density::DEFAULT_CUTOFF_QUANTILE,
        }
    }
}

/// Builds the full union dictionary.
pub fn build_dictionary(
    x: &PixelMatrix,
    superpixels: &SuperpixelMap,
    rx: &ScoreMap,
    params: &DictionaryParams,
) -> Result<UnionDictionary> {
    let bg = build_background(x, superpixels, params.m_per_superpixel, params.cutoff_quantile)?;
    let an = build_anomaly(x, rx, params.p_anomaly)?;
    union(&bg, &an)
}

/// Serializable dictionary sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryManifest {
    pub k_background: usize,
    pub k_anomaly: usize,
    pub dropped_background: usize,
    pub atoms: Vec<AtomProvenance>,
}

impl UnionDictionary {
    pub fn manifest(&self) -> DictionaryManifest {
        DictionaryManifest {
            k_background: self.k_background,
            k_anomaly: self.k_anomaly(),
            dropped_background: self.dropped_background,
            atoms: self.provenance.clone(),
        }
    }

    /// Rebuilds a dictionary from its atom matrix and manifest.
    pub fn from_manifest(atoms: DMatrix<f64>, manifest: DictionaryManifest) -> Result<Self> {
        if manifest.k_background + manifest.k_anomaly != atoms.ncols()
            || manifest.atoms.len() != atoms.ncols()
        {
            return Err(Error::Mismatch(format!(
                "manifest describes {} atoms, matrix has {}",
                manifest.atoms.len(),
                atoms.ncols()
            )));
        }
        let mut d = Self::from_matrix(atoms, manifest.k_background)?;
        d.provenance = manifest.atoms;
        d.dropped_background = manifest.dropped_background;
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_image(n: usize) -> PixelMatrix {
        PixelMatrix::from_columns(DMatrix::from_fn(2, n, |b, j| (j * (b + 1)) as f64)).unwrap()
    }

    #[test]
    fn single_superpixel_takes_everything() {
        let x = line_image(10);
        let sp = SuperpixelMap::new(10, 1, vec![0; 10]).unwrap();
        let bg = build_background(&x, &sp, 10, 0.02).unwrap();
        let mut idx: Vec<usize> = bg.provenance.iter().map(|p| p.pixel_index).collect();
        idx.sort_unstable();
        assert_eq!(idx, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn small_superpixels_contribute_all_pixels() {
        let x = line_image(5);
        let sp = SuperpixelMap::new(5, 1, vec![0, 0, 1, 1, 1]).unwrap();
        let bg = build_background(&x, &sp, 5, 0.02).unwrap();
        assert_eq!(bg.len(), 5);
        assert!(matches!(
            bg.provenance[0].source,
            AtomSource::Superpixel { superpixel: 0, rank: 0 }
        ));
    }

    #[test]
    fn anomaly_atoms_follow_rx_order() {
        let x = line_image(4);
        let rx = ScoreMap::new(4, 1, vec![1.0, 5.0, 5.0, 0.5]).unwrap();
        let an = build_anomaly(&x, &rx, 1).unwrap();
        assert_eq!(an.provenance[0].pixel_index, 1);
        let all = build_anomaly(&x, &rx, 4).unwrap();
        let order: Vec<usize> = all.provenance.iter().map(|p| p.pixel_index).collect();
        assert_eq!(order, vec![1, 2, 0, 3]);
        assert!(build_anomaly(&x, &rx, 5).is_err());
    }

    #[test]
    fn shared_pixel_lands_in_anomaly_side() {
        let x = line_image(4);
        let sp = SuperpixelMap::new(4, 1, vec![0; 4]).unwrap();
        let bg = build_background(&x, &sp, 4, 0.02).unwrap();
        let rx = ScoreMap::new(4, 1, vec![0.0, 0.0, 0.0, 9.0]).unwrap();
        let an = build_anomaly(&x, &rx, 1).unwrap();
        let d = union(&bg, &an).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.k_background(), 3);
        assert_eq!(d.k_anomaly(), 1);
        assert_eq!(d.dropped_background(), 1);
        let occurrences = d.provenance().iter().filter(|p| p.pixel_index == 3).count();
        assert_eq!(occurrences, 1);
        assert!(matches!(d.provenance()[3].source, AtomSource::Rx { rank: 0 }));
    }

    #[test]
    fn disjoint_sources_add_up() {
        let x = line_image(6);
        let sp = SuperpixelMap::new(6, 1, vec![0, 0, 0, 1, 1, 1]).unwrap();
        let bg = build_background(&x, &sp, 1, 0.02).unwrap();
        let taken: Vec<usize> = bg.provenance.iter().map(|p| p.pixel_index).collect();
        let scores: Vec<f64> = (0..6).map(|j| if taken.contains(&j) { 0.0 } else { j as f64 }).collect();
        let rx = ScoreMap::new(6, 1, scores).unwrap();
        let an = build_anomaly(&x, &rx, 2).unwrap();
        let d = union(&bg, &an).unwrap();
        assert_eq!(d.len(), bg.len() + an.len());
    }

    #[test]
    fn union_errors() {
        let empty = Atoms {
            matrix: DMatrix::zeros(2, 0),
            provenance: vec![],
        };
        assert!(union(&empty, &empty).is_err());
        let a = Atoms {
            matrix: DMatrix::zeros(3, 1),
            provenance: vec![AtomProvenance {
                pixel_index: 0,
                source: AtomSource::Rx { rank: 0 },
            }],
        };
        let b = Atoms {
            matrix: DMatrix::zeros(2, 1),
            provenance: vec![AtomProvenance {
                pixel_index: 1,
                source: AtomSource::Superpixel { superpixel: 0, rank: 0 },
            }],
        };
        assert!(union(&b, &a).is_err());
    }

    #[test]
    fn manifest_round_trip() {
        let x = line_image(4);
        let sp = SuperpixelMap::new(4, 1, vec![0, 0, 1, 1]).unwrap();
        let rx = ScoreMap::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let d = build_dictionary(
            &x,
            &sp,
            &rx,
            &DictionaryParams {
                m_per_superpixel: 1,
                p_anomaly: 1,
                ..DictionaryParams::default()
            },
        )
        .unwrap();
        let json = serde_json::to_string(&d.manifest()).unwrap();
        let back: DictionaryManifest = serde_json::from_str(&json).unwrap();
        let rebuilt = UnionDictionary::from_manifest(d.atoms().clone(), back).unwrap();
        assert_eq!(rebuilt, d);
    }
}
