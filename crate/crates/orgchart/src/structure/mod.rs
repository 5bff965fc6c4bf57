//! The extraction core: classical node detection, node/junction point
//! classification, root selection from a seniority corpus, and the
//! pixel-graph traversal that recovers the hierarchy.

mod corpus;
mod detect;
mod points;
mod traverse;

pub use corpus::{select_root, SeniorityCorpus};
pub use detect::{detect_nodes, DetectedNode, Shape};
pub use points::{classify_points, filter_junctions, ClassifiedPoint, JunctionKind, PointKind};
pub use traverse::{traverse, TraversalStats};
