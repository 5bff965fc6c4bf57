//! End-to-end extraction of hierarchy tables from raster org-chart images.
//!
//! The pipeline binarizes an input chart, detects node shapes, classifies
//! corner points into node and junction points, re-thresholds around the
//! junctions, walks the connector pixels from a corpus-selected root, and
//! emits a tabular hierarchy (node id, parent id, text, level). A seeded
//! synthetic generator and the matching evaluation metrics close the loop
//! so every stage is testable against exact ground truth.

pub mod error;
pub mod evalmetrics;
pub mod features;
pub mod imaging;
pub mod model;
pub mod structure;
pub mod synthgen;
pub mod textmap;

pub mod config;
pub mod pipeline;

pub use error::{Diagnostic, DiagnosticKind, Error, Result};
