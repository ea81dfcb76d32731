//! The single-shot `run` command: every stage in order, with content-hash
//! caching so unchanged stages are skipped on re-runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use njcr_core::dictionary::DictionaryManifest;
use njcr_core::pipeline::{evaluate, Evaluation, Method};
use njcr_core::raster::{load_labels, load_mask, load_scores};
use njcr_core::solver::ConvergenceReport;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, StageContext};
use crate::stages::{self, read_json, write_json, DetectJob, EvalFiles};

/// File layout of a run directory.
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
    pub fn scene_cube(&self) -> PathBuf {
        self.file("scene.cube")
    }
    pub fn scene_mask(&self) -> PathBuf {
        self.file("scene.mask")
    }
    pub fn scene_json(&self) -> PathBuf {
        self.file("scene.json")
    }
    pub fn rx(&self) -> PathBuf {
        self.file("rx.scores")
    }
    pub fn labels(&self) -> PathBuf {
        self.file("superpixels.labels")
    }
    pub fn svg(&self) -> PathBuf {
        self.file("superpixels.svg")
    }
    pub fn atoms(&self) -> PathBuf {
        self.file("dictionary.cube")
    }
    pub fn manifest(&self) -> PathBuf {
        self.file("dictionary.json")
    }
    pub fn scores(&self) -> PathBuf {
        self.file("scores.scores")
    }
    pub fn scores_csv(&self) -> PathBuf {
        self.file("scores.csv")
    }
    pub fn convergence(&self) -> PathBuf {
        self.file("convergence.json")
    }
    pub fn eval(&self) -> EvalFiles {
        EvalFiles::in_dir(&self.dir.join("eval"))
    }
    pub fn summary(&self) -> PathBuf {
        self.file("summary.json")
    }
    pub fn failed(&self) -> PathBuf {
        self.file("FAILED.json")
    }
    fn cache(&self) -> PathBuf {
        self.file("cache.json")
    }
}

/// Stage keys of the previous run.
struct Cache {
    path: PathBuf,
    keys: BTreeMap<String, String>,
}

impl Cache {
    fn load(path: PathBuf) -> Self {
        let keys = std::fs::read_to_string(&path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        Self { path, keys }
    }

    fn save(&self) -> CliResult<()> {
        write_json(&self.path, &self.keys)
    }

    /// Runs `f` unless `stage` was last run with the same key and all its
    /// outputs still exist. Returns whether it ran.
    fn run(
        &mut self,
        stage: &str,
        key: String,
        outputs: &[&Path],
        f: impl FnOnce() -> CliResult<()>,
    ) -> CliResult<bool> {
        let fresh = self.keys.get(stage) == Some(&key) && outputs.iter().all(|p| p.exists());
        if fresh {
            return Ok(false);
        }
        self.keys.remove(stage);
        f()?;
        self.keys.insert(stage.to_string(), key);
        self.save()?;
        Ok(true)
    }
}

/// Hash of a stage's parameters and input file contents.
fn stage_key<P: Serialize>(stage: &str, params: &P, inputs: &[&Path]) -> CliResult<String> {
    let mut h = Sha256::new();
    h.update(stage.as_bytes());
    h.update(serde_json::to_vec(params).map_err(|e| CliError::Config(e.to_string()))?);
    for path in inputs {
        let bytes = std::fs::read(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl From<&ConvergenceReport> for ConvergenceSummary {
    fn from(r: &ConvergenceReport) -> Self {
        Self {
            iterations: r.iterations,
            converged: r.converged,
            primal_residual: r.primal_residual,
            dual_residual: r.dual_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub auc_pd_pf: f64,
    pub auc_pf_tau: f64,
    pub separation_gap: f64,
}

impl From<&Evaluation> for Scores {
    fn from(e: &Evaluation) -> Self {
        Self {
            auc_pd_pf: e.roc.auc_pd_pf,
            auc_pf_tau: e.roc.auc_pf_tau,
            separation_gap: e.separability.gap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionarySummary {
    pub k_background: usize,
    pub k_anomaly: usize,
    pub dropped_background: usize,
}

/// `summary.json`. Everything except `timings` is a deterministic function
/// of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub superpixels: Option<usize>,
    pub dictionary: Option<DictionarySummary>,
    pub convergence: Option<ConvergenceSummary>,
    pub evaluation: Option<Scores>,
    pub rx_baseline: Option<Scores>,
    /// Wall-clock seconds per stage in this invocation; skipped stages
    /// report the time of the cache check.
    pub timings: BTreeMap<String, f64>,
}

/// Runs the configured pipeline into `config.output_dir`. On failure a
/// `FAILED.json` naming the stage is left next to the partial outputs.
pub fn run(config: &PipelineConfig) -> CliResult<Summary> {
    config.validate()?;
    let layout = Layout {
        dir: config.output_dir.clone(),
    };
    std::fs::create_dir_all(&layout.dir).map_err(|e| CliError::Stage {
        stage: "run",
        source: njcr_core::Error::Io {
            path: layout.dir.clone(),
            source: e,
        },
    })?;
    let _ = std::fs::remove_file(layout.failed());
    match run_stages(config, &layout) {
        Ok(summary) => Ok(summary),
        Err(e) => {
            let stage = match &e {
                CliError::Stage { stage, .. } => *stage,
                CliError::NotConverged { .. } => "detect",
                _ => "run",
            };
            let note = serde_json::json!({ "stage": stage, "error": e.to_string() });
            let _ = write_json(&layout.failed(), &note);
            Err(e)
        }
    }
}

fn run_stages(config: &PipelineConfig, layout: &Layout) -> CliResult<Summary> {
    let p = &config.params;
    let mut cache = Cache::load(layout.cache());
    let mut timings = BTreeMap::new();
    let mut clock = |name: &str, start: Instant| {
        timings.insert(name.to_string(), start.elapsed().as_secs_f64());
    };

    let (cube, mask) = match (&config.cube, &config.synthetic) {
        (Some(cube), _) => (cube.clone(), config.mask.clone()),
        (None, Some(scene)) => {
            let start = Instant::now();
            let (c, m, j) = (layout.scene_cube(), layout.scene_mask(), layout.scene_json());
            let key = stage_key("synth", scene, &[])?;
            cache.run("synth", key, &[&c, &m, &j], || {
                stages::synth(scene, &c, &m, &j).map(|_| ())
            })?;
            clock("synth", start);
            (c, Some(config.mask.clone().unwrap_or(m)))
        }
        (None, None) => unreachable!("validated"),
    };

    let start = Instant::now();
    let rx_path = layout.rx();
    let key = stage_key("rx", &p.rx_ridge, &[&cube])?;
    cache.run("rx", key, &[&rx_path], || {
        stages::rx(&cube, p.rx_ridge, &rx_path).map(|_| ())
    })?;
    clock("rx", start);

    let mut superpixels = None;
    let mut dictionary = None;
    if p.method != Method::Rx {
        let start = Instant::now();
        let labels = layout.labels();
        let svg = layout.svg();
        let key = stage_key("segment", &p.segmentation, &[&cube])?;
        cache.run("segment", key, &[&labels, &svg], || {
            stages::segment_cube(&cube, &p.segmentation, &labels, Some(&svg)).map(|_| ())
        })?;
        superpixels = Some(load_labels(&labels).stage("segment")?.count());
        clock("segment", start);

        let start = Instant::now();
        let (atoms, manifest) = (layout.atoms(), layout.manifest());
        let key = stage_key("dict", &p.dictionary, &[&cube, &labels, &rx_path])?;
        cache.run("dict", key, &[&atoms, &manifest], || {
            stages::dict(&cube, &labels, &rx_path, &p.dictionary, &atoms, &manifest).map(|_| ())
        })?;
        let m: DictionaryManifest = read_json(&manifest)?;
        dictionary = Some(DictionarySummary {
            k_background: m.k_background,
            k_anomaly: m.k_anomaly,
            dropped_background: m.dropped_background,
        });
        clock("dict", start);
    }

    let start = Instant::now();
    let (scores, csv, report) = (layout.scores(), layout.scores_csv(), layout.convergence());
    let (atoms, manifest) = (layout.atoms(), layout.manifest());
    let detect_params = serde_json::json!({
        "method": p.method,
        "solver": p.solver,
        "background_only": p.background_only,
        "rx_ridge": p.rx_ridge,
    });
    let mut inputs: Vec<&Path> = vec![&cube];
    let mut outputs: Vec<&Path> = vec![&scores, &csv];
    if p.method != Method::Rx {
        inputs.extend([atoms.as_path(), manifest.as_path()]);
        outputs.push(&report);
    }
    let key = stage_key("detect", &detect_params, &inputs)?;
    cache.run("detect", key, &outputs, || {
        let job = DetectJob {
            cube: &cube,
            method: p.method,
            dictionary: (p.method != Method::Rx).then_some((atoms.as_path(), manifest.as_path())),
            solver: &p.solver,
            background_only: p.background_only,
            rx_ridge: p.rx_ridge,
            scores: &scores,
            csv: Some(&csv),
            report: Some(&report),
        };
        stages::detect(&job).map(|_| ())
    })?;
    let convergence = if p.method != Method::Rx {
        let r: ConvergenceReport = read_json(&report)?;
        Some(ConvergenceSummary::from(&r))
    } else {
        None
    };
    clock("detect", start);
    if let Some(c) = &convergence {
        if config.fail_on_nonconvergence && !c.converged {
            return Err(CliError::NotConverged {
                iterations: c.iterations,
            });
        }
    }

    let (mut evaluation, mut rx_baseline) = (None, None);
    if let Some(mask) = &mask {
        let start = Instant::now();
        let files = layout.eval();
        let key = stage_key("eval", &(), &[&scores, mask])?;
        cache.run("eval", key, &files.all(), || {
            stages::eval(&scores, mask, &files).map(|_| ())
        })?;
        let truth = load_mask(mask).stage("eval")?;
        let ev = evaluate(&load_scores(&scores).stage("eval")?, &truth).stage("eval")?;
        evaluation = Some(Scores::from(&ev));
        let rx_ev = evaluate(&load_scores(&rx_path).stage("eval")?, &truth).stage("eval")?;
        rx_baseline = Some(Scores::from(&rx_ev));
        clock("eval", start);
    }

    let summary = Summary {
        method: p.method,
        superpixels,
        dictionary,
        convergence,
        evaluation,
        rx_baseline,
        timings,
    };
    write_json(&layout.summary(), &summary)?;
    Ok(summary)
}
