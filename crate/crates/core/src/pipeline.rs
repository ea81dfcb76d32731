//! End-to-end detection on an in-memory cube.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{GroundTruthMask, HsiCube, PixelMatrix, ScoreMap};
use crate::dictionary::{build_dictionary, DictionaryParams, UnionDictionary};
use crate::error::Result;
use crate::evaluation::{roc, separability, RocReport, SeparabilityStats};
use crate::rx::{rx_detect, DEFAULT_RIDGE_EPS};
use crate::segmentation::{segment, SegmentParams, SuperpixelMap};
use crate::solver::{detect, ConvergenceReport, Model, SolverConfig};

/// Detector applied after (or instead of) dictionary construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rx,
    Njcr,
    Knjcr,
}

impl Method {
    pub fn model(self) -> Option<Model> {
        match self {
            Method::Rx => None,
            Method::Njcr => Some(Model::Njcr),
            Method::Knjcr => Some(Model::Knjcr),
        }
    }
}

/// Parameters of every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineParams {
    pub method: Method,
    pub segmentation: SegmentParams,
    pub dictionary: DictionaryParams,
    pub solver: SolverConfig,
    /// Relative ridge for the RX covariance.
    pub rx_ridge: f64,
    /// Drop the anomaly atoms before solving.
    pub background_only: bool,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            method: Method::Njcr,
            segmentation: SegmentParams::default(),
            dictionary: DictionaryParams::default(),
            solver: SolverConfig::default(),
            rx_ridge: DEFAULT_RIDGE_EPS,
            background_only: false,
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub rx: f64,
    pub segment: f64,
    pub dictionary: f64,
    pub detect: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub rx_scores: ScoreMap,
    pub superpixels: Option<SuperpixelMap>,
    pub dictionary: Option<UnionDictionary>,
    pub scores: ScoreMap,
    pub convergence: Option<ConvergenceReport>,
    pub timings: StageTimings,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Runs RX, and for the representation methods segmentation, dictionary
/// construction and the solver.
pub fn run_pipeline(cube: &HsiCube, params: &PipelineParams) -> Result<PipelineOutput> {
    params.solver.validate()?;
    let mut timings = StageTimings::default();
    let x = cube.flatten();
    let rx_scores = timed(&mut timings.rx, || {
        let (mut scores, _) = rx_detect(&x, params.rx_ridge)?;
        scores.quantize_f32();
        Ok(scores)
    })?;
    let Some(model) = params.method.model() else {
        return Ok(PipelineOutput {
            scores: rx_scores.clone(),
            rx_scores,
            superpixels: None,
            dictionary: None,
            convergence: None,
            timings,
        });
    };
    let superpixels = timed(&mut timings.segment, || segment(cube, &params.segmentation))?;
    let dictionary = timed(&mut timings.dictionary, || {
        let d = build_dictionary(&x, &superpixels, &rx_scores, &params.dictionary)?;
        if params.background_only {
            d.background_only()
        } else {
            Ok(d)
        }
    })?;
    let (scores, solution) = timed(&mut timings.detect, || {
        detect_with(&x, &dictionary, &params.solver, model)
    })?;
    Ok(PipelineOutput {
        rx_scores,
        superpixels: Some(superpixels),
        dictionary: Some(dictionary),
        scores,
        convergence: Some(solution),
        timings,
    })
}

/// Solves and scores, returning the f32-quantized score map stored on disk.
pub fn detect_with(
    x: &PixelMatrix,
    dictionary: &UnionDictionary,
    cfg: &SolverConfig,
    model: Model,
) -> Result<(ScoreMap, ConvergenceReport)> {
    let (mut scores, solution) = detect(x, dictionary, cfg, model)?;
    scores.quantize_f32();
    Ok((scores, solution.report))
}

/// ROC and separability of a score map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub roc: RocReport,
    pub separability: SeparabilityStats,
}

/// Evaluates raw scores: ROC on the scores, separability on their
/// normalized form.
pub fn evaluate(scores: &ScoreMap, truth: &GroundTruthMask) -> Result<Evaluation> {
    Ok(Evaluation {
        roc: roc(scores, truth)?,
        separability: separability(&scores.normalized(), truth)?,
    })
}
