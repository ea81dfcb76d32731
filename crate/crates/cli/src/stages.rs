//! File-to-file pipeline stages shared by the subcommands and `run`.

use std::path::{Path, PathBuf};

use njcr_core::dictionary::{build_dictionary, DictionaryManifest, DictionaryParams};
use njcr_core::pipeline::{detect_with, evaluate, Evaluation, Method};
use njcr_core::raster::{
    load_cube, load_labels, load_mask, load_scores, save_cube, save_labels, save_mask,
    save_scores, save_scores_csv,
};
use njcr_core::segmentation::{segment, SegmentParams};
use njcr_core::solver::{ConvergenceReport, SolverConfig};
use njcr_core::synthetic::{generate_scene, SceneParams, SceneProvenance};
use njcr_core::{rx_detect, HsiCube, PixelMatrix, ScoreMap, UnionDictionary};
use serde::Serialize;

use crate::error::{CliError, CliResult, StageContext};

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(path, e))?;
    }
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Stage {
        stage: "io",
        source: njcr_core::Error::Io {
            path: path.to_path_buf(),
            source,
        },
    }
}

/// Generates a synthetic scene and writes cube, mask and provenance.
pub fn synth(
    params: &SceneParams,
    cube: &Path,
    mask: &Path,
    provenance: &Path,
) -> CliResult<SceneProvenance> {
    let scene = generate_scene(params).stage("synth")?;
    save_cube(&scene.cube, cube).stage("synth")?;
    save_mask(&scene.mask, mask).stage("synth")?;
    write_json(provenance, &scene.provenance)?;
    Ok(scene.provenance)
}

/// Ridge actually applied by an RX fit.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RxInfo {
    pub ridge: f64,
}

/// RX scores of a cube, stored as f32.
pub fn rx(cube: &Path, ridge_eps: f64, scores: &Path) -> CliResult<RxInfo> {
    let cube = load_cube(cube).stage("rx")?;
    let (mut s, stats) = rx_detect(&cube.flatten(), ridge_eps).stage("rx")?;
    s.quantize_f32();
    save_scores(&s, scores).stage("rx")?;
    Ok(RxInfo {
        ridge: stats.ridge(),
    })
}

/// Superpixel labels, with an optional SVG boundary overlay.
pub fn segment_cube(
    cube: &Path,
    params: &SegmentParams,
    labels: &Path,
    svg: Option<&Path>,
) -> CliResult<usize> {
    let cube = load_cube(cube).stage("segment")?;
    let map = segment(&cube, params).stage("segment")?;
    save_labels(&map, labels).stage("segment")?;
    if let Some(svg) = svg {
        write_text(svg, &map.boundary_svg(4))?;
    }
    Ok(map.count())
}

/// Stores a dictionary as a `K x 1` cube of `L`-band atoms.
fn save_dictionary(d: &UnionDictionary, atoms: &Path, manifest: &Path) -> CliResult<()> {
    let cube = PixelMatrix::new(d.len(), 1, d.atoms().clone())
        .and_then(|m| m.unflatten())
        .stage("dict")?;
    save_cube(&cube, atoms).stage("dict")?;
    write_json(manifest, &d.manifest())
}

pub fn load_dictionary(atoms: &Path, manifest: &Path) -> CliResult<UnionDictionary> {
    let cube: HsiCube = load_cube(atoms).stage("dict")?;
    let manifest: DictionaryManifest = read_json(manifest)?;
    UnionDictionary::from_manifest(cube.flatten().into_matrix(), manifest).stage("dict")
}

/// Builds the union dictionary from a cube, its labels and its RX scores.
pub fn dict(
    cube: &Path,
    labels: &Path,
    rx_scores: &Path,
    params: &DictionaryParams,
    atoms: &Path,
    manifest: &Path,
) -> CliResult<DictionaryManifest> {
    let x = load_cube(cube).stage("dict")?.flatten();
    let labels = load_labels(labels).stage("dict")?;
    let rx = load_scores(rx_scores).stage("dict")?;
    let d = build_dictionary(&x, &labels, &rx, params).stage("dict")?;
    save_dictionary(&d, atoms, manifest)?;
    Ok(d.manifest())
}

/// Inputs and outputs of a detection.
pub struct DetectJob<'a> {
    pub cube: &'a Path,
    pub method: Method,
    /// Atom cube and manifest; required for the representation methods.
    pub dictionary: Option<(&'a Path, &'a Path)>,
    pub solver: &'a SolverConfig,
    pub background_only: bool,
    pub rx_ridge: f64,
    pub scores: &'a Path,
    pub csv: Option<&'a Path>,
    pub report: Option<&'a Path>,
}

/// Runs a detector and writes its score map.
pub fn detect(job: &DetectJob<'_>) -> CliResult<Option<ConvergenceReport>> {
    let cube = load_cube(job.cube).stage("detect")?;
    let x = cube.flatten();
    let (scores, report) = match job.method.model() {
        None => {
            let (mut s, _) = rx_detect(&x, job.rx_ridge).stage("detect")?;
            s.quantize_f32();
            (s, None)
        }
        Some(model) => {
            let (atoms, manifest) = job.dictionary.ok_or_else(|| {
                CliError::Config(format!("method {:?} needs a dictionary", job.method))
            })?;
            let mut d = load_dictionary(atoms, manifest)?;
            if job.background_only {
                d = d.background_only().stage("detect")?;
            }
            let (s, report) = detect_with(&x, &d, job.solver, model).stage("detect")?;
            (s, Some(report))
        }
    };
    save_scores(&scores, job.scores).stage("detect")?;
    if let Some(csv) = job.csv {
        save_scores_csv(&scores, csv).stage("detect")?;
    }
    if let (Some(path), Some(report)) = (job.report, &report) {
        write_json(path, report)?;
    }
    Ok(report)
}

/// Output files of an evaluation directory.
pub struct EvalFiles {
    pub roc_json: PathBuf,
    pub roc_csv: PathBuf,
    pub separability_csv: PathBuf,
    pub svg: PathBuf,
}

impl EvalFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            roc_json: dir.join("roc.json"),
            roc_csv: dir.join("roc.csv"),
            separability_csv: dir.join("separability.csv"),
            svg: dir.join("roc.svg"),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [
            &self.roc_json,
            &self.roc_csv,
            &self.separability_csv,
            &self.svg,
        ]
    }
}

/// Scores a map against ground truth and writes the report files.
pub fn eval(scores: &Path, mask: &Path, out: &EvalFiles) -> CliResult<Evaluation> {
    let scores: ScoreMap = load_scores(scores).stage("eval")?;
    let mask = load_mask(mask).stage("eval")?;
    let ev = evaluate(&scores, &mask).stage("eval")?;
    write_json(&out.roc_json, &ev.roc)?;
    write_text(&out.roc_csv, &ev.roc.to_csv())?;
    write_text(&out.separability_csv, &ev.separability.to_csv())?;
    write_text(
        &out.svg,
        &njcr_core::evaluation::report_svg(&ev.roc, &ev.separability),
    )?;
    Ok(ev)
}
