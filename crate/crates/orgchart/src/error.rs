//! Error and diagnostic types shared across the pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("unsupported channel count {0}, expected 1 or 3")]
    UnsupportedChannels(u8),

    #[error("raster buffer length {got} does not match {width}x{height}x{channels}")]
    RasterShape {
        width: u32,
        height: u32,
        channels: u8,
        got: usize,
    },

    #[error("empty histogram: no pixels to threshold")]
    EmptyHistogram,

    #[error("window must be odd and >= 3, got {0}")]
    BadWindow(u32),

    #[error("no junction points given: fall back to whole-image Otsu")]
    NoJunctionPoints,

    #[error("coordinate ({x},{y}) too close to the border for a {window}x{window} window")]
    OutOfBorder { x: u32, y: u32, window: u32 },

    #[error("invalid bounding box ({x1},{y1},{x2},{y2})")]
    InvalidBBox { x1: u32, y1: u32, x2: u32, y2: u32 },

    #[error("invalid corner parameters: {0}")]
    BadCornerParams(String),

    #[error("graph validation failed: {}", format_diagnostics(.0))]
    InvalidGraph(Vec<Diagnostic>),

    #[error("empty table: cannot build a graph from zero rows")]
    EmptyTable,

    #[error("no nodes detected")]
    NoNodes,

    #[error("text provider {provider} failed: {message}")]
    TextProvider { provider: String, message: String },

    #[error("corpus parse error at line {line}: {message}")]
    CorpusParse { line: usize, message: String },

    #[error("layout overflow: {dimension} needs {needed} px but canvas has {available}")]
    LayoutOverflow {
        dimension: &'static str,
        needed: u32,
        available: u32,
    },

    #[error("invalid generator spec: {0}")]
    BadGenSpec(String),

    #[error("negative noise sigma {0}")]
    NegativeSigma(f64),

    #[error("exact GED bound exceeded: {n1} + {n2} nodes > {bound}")]
    GedBound { n1: usize, n2: usize, bound: usize },

    #[error("node similarity undefined for an empty ground truth")]
    EmptyGroundTruth,

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A named invariant violation or warning. Diagnostics are reported, not
/// raised: callers decide which kinds are fatal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    /// Node ids involved, if any.
    pub nodes: Vec<u32>,
    pub message: String,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    DuplicateId,
    DanglingParent,
    SelfEdge,
    Cycle,
    MultiParent,
    LevelMismatch,
    EdgeParentMismatch,
    RootInvalid,
    Orphan,
    DroppedTextBox,
    NoCorpusMatch,
    DegenerateRefinement,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, nodes: Vec<u32>, message: impl Into<String>) -> Self {
        Self {
            kind,
            nodes,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.nodes.is_empty() {
            write!(f, "{:?}: {}", self.kind, self.message)
        } else {
            write!(f, "{:?} {:?}: {}", self.kind, self.nodes, self.message)
        }
    }
}
