//! Hyperspectral anomaly detection by nonnegative-constrained joint
//! collaborative representation over a union dictionary.
//!
//! The pipeline segments the image into superpixels by normalized cuts,
//! samples background atoms from each superpixel with density peaks, adds
//! the strongest RX responses as anomaly atoms, solves the constrained
//! representation with extended ADMM (linear or kernel form) and scores each
//! pixel by its residual against the background atoms.

pub mod data;
pub mod density;
pub mod dictionary;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod pipeline;
pub mod raster;
pub mod rx;
pub mod segmentation;
pub mod solver;
pub mod synthetic;

pub use data::{normalize_scores, GroundTruthMask, HsiCube, PixelMatrix, ScoreMap};
pub use dictionary::{DictionaryParams, UnionDictionary};
pub use error::{Error, Result};
pub use evaluation::{roc, separability, RocReport, SeparabilityStats};
pub use rx::{rx_detect, rx_scores, BackgroundStats};
pub use segmentation::{segment, Connectivity, PixelGraph, SegmentParams, SuperpixelMap};
pub use solver::{
    solve_knjcr, solve_njcr, AdmmState, CoefficientMatrix, ConvergenceReport, Kernel, KernelCache,
    Model, SolverConfig,
};
