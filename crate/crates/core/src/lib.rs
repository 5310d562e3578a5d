//! Anchor-contour face alignment toolkit (sans-CNN).
//!
//! The anchor-contour (AC) representation describes a face as a set of
//! well-localized point features (anchors: eye corners, mouth corners, ...)
//! plus true facial curves (contours: eyelids, lips, chin) stored as
//! sub-pixel polylines. This crate provides everything around that
//! representation that does not require a trained network:
//!
//! - ground-truth heatmap synthesis from anchors and contours,
//! - steerable-filter contourness scoring with closed-form orientation
//!   maximization,
//! - sub-pixel contour extraction (NMS along normals, parabola refinement,
//!   hysteresis tracing),
//! - the fully- and weakly-supervised loss functionals and their analytic
//!   gradients,
//! - NME / CED / AUC evaluation against dense ground-truth landmarks,
//! - a procedural scene generator producing face-like analytic curves with
//!   exact ground truth,
//! - byte-stable file formats for heatmap stacks, annotations, traces and
//!   reports.

pub mod contourness;
pub mod evaluation;
pub mod extraction;
pub mod geometry;
pub mod io;
pub mod losses;
pub mod raster;
pub mod synthscene;

pub use contourness::{ContournessFields, FilterBank};
pub use evaluation::{EvalReport, GroundTruthLandmarks, Prediction};
pub use extraction::{ContourTrace, ExtractionParams};
pub use geometry::{LandmarkChain, Point2, Polyline, Segment};
pub use losses::{FParams, LossWeights, WeakSupervision};
pub use raster::{Heatmap, HeatmapStack, SigmaParam};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid raster: {0}")]
    Raster(String),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("no anchor present in heatmap")]
    NoAnchor,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("scene does not fit: {0}")]
    SceneMargin(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("malformed file at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
