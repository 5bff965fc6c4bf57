//! Graph model for org charts and their tabular serialization.
//!
//! An [`OrgGraph`] is a forest of positioned, labeled nodes with one
//! designated root. The tabular form ([`TableRow`]) round-trips losslessly
//! through a canonical JSON encoding and a CSV export.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};

/// Axis-aligned box in pixel coordinates, half-open: pixels with
/// `x1 <= x < x2` and `y1 <= y < y2` are inside, so `w = x2 - x1` and
/// `h = y2 - y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl BBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self> {
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::InvalidBBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }

    /// Center as floating-point coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x1) + f64::from(self.width()) / 2.0,
            f64::from(self.y1) + f64::from(self.height()) / 2.0,
        )
    }

    /// Chebyshev distance from (x, y) to the box perimeter; 0 on the
    /// perimeter, positive both inside and outside.
    pub fn perimeter_distance(&self, x: u32, y: u32) -> u32 {
        let x = i64::from(x);
        let y = i64::from(y);
        let (x1, y1) = (i64::from(self.x1), i64::from(self.y1));
        // Inclusive pixel edges of the box.
        let (x2, y2) = (i64::from(self.x2) - 1, i64::from(self.y2) - 1);
        if x >= x1 && x <= x2 && y >= y1 && y <= y2 {
            // Inside: distance to the nearest edge.
            let d = (x - x1).min(x2 - x).min(y - y1).min(y2 - y);
            d as u32
        } else {
            let dx = (x1 - x).max(x - x2).max(0);
            let dy = (y1 - y).max(y - y2).max(0);
            dx.max(dy) as u32
        }
    }
}

/// One position in the chart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgNode {
    pub id: u32,
    pub bbox: BBox,
    pub text: String,
    pub level: u32,
    pub parent_id: Option<u32>,
}

/// Directed hierarchy with a designated root. Extra connected components
/// are legal (their local roots are parentless, level-0 nodes) and are
/// surfaced by [`validate`] as orphan diagnostics rather than errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrgGraph {
    pub nodes: Vec<OrgNode>,
    pub edges: Vec<(u32, u32)>,
    pub root_id: u32,
}

impl OrgGraph {
    /// Builds a graph from nodes whose `parent_id` links are already set;
    /// the edge set is derived.
    pub fn from_nodes(nodes: Vec<OrgNode>, root_id: u32) -> Self {
        let mut edges: Vec<(u32, u32)> = nodes
            .iter()
            .filter_map(|n| n.parent_id.map(|p| (p, n.id)))
            .collect();
        edges.sort_unstable();
        Self {
            nodes,
            edges,
            root_id,
        }
    }

    pub fn node(&self, id: u32) -> Option<&OrgNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// One row of the tabular representation; bijective with the node set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub node_id: u32,
    pub parent_id: Option<u32>,
    pub text: String,
    pub level: u32,
    pub bbox: BBox,
}

/// Checks every graph invariant and returns one diagnostic per violation.
/// An empty list means the graph is sound. Orphan components (parentless
/// non-root nodes) are reported but do not make the graph unserializable.
pub fn validate(graph: &OrgGraph) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut ids = BTreeSet::new();
    for n in &graph.nodes {
        if !ids.insert(n.id) {
            diags.push(Diagnostic::new(
                DiagnosticKind::DuplicateId,
                vec![n.id],
                format!("node id {} appears more than once", n.id),
            ));
        }
    }

    match graph.node(graph.root_id) {
        None => diags.push(Diagnostic::new(
            DiagnosticKind::RootInvalid,
            vec![graph.root_id],
            format!("root id {} is not a node", graph.root_id),
        )),
        Some(root) => {
            if root.parent_id.is_some() {
                diags.push(Diagnostic::new(
                    DiagnosticKind::RootInvalid,
                    vec![root.id],
                    "root node has a parent".to_string(),
                ));
            }
            if root.level != 0 {
                diags.push(Diagnostic::new(
                    DiagnosticKind::RootInvalid,
                    vec![root.id],
                    format!("root node has level {}, expected 0", root.level),
                ));
            }
        }
    }

    // Parent links must resolve and satisfy the level law.
    for n in &graph.nodes {
        if let Some(p) = n.parent_id {
            if p == n.id {
                diags.push(Diagnostic::new(
                    DiagnosticKind::SelfEdge,
                    vec![n.id],
                    "node is its own parent".to_string(),
                ));
                continue;
            }
            match graph.node(p) {
                None => diags.push(Diagnostic::new(
                    DiagnosticKind::DanglingParent,
                    vec![n.id, p],
                    format!("node {} has missing parent {}", n.id, p),
                )),
                Some(parent) => {
                    if n.level != parent.level + 1 {
                        diags.push(Diagnostic::new(
                            DiagnosticKind::LevelMismatch,
                            vec![n.id, p],
                            format!(
                                "node {} has level {} under level-{} parent {}",
                                n.id, n.level, parent.level, p
                            ),
                        ));
                    }
                }
            }
        } else if n.id != graph.root_id {
            if n.level != 0 {
                diags.push(Diagnostic::new(
                    DiagnosticKind::LevelMismatch,
                    vec![n.id],
                    format!("parentless node {} has level {}, expected 0", n.id, n.level),
                ));
            }
            diags.push(Diagnostic::new(
                DiagnosticKind::Orphan,
                vec![n.id],
                format!("node {} is a local root not reachable from the root", n.id),
            ));
        }
    }

    // Edge set must mirror the parent links exactly.
    let mut inbound: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(p, c) in &graph.edges {
        if p == c {
            diags.push(Diagnostic::new(
                DiagnosticKind::SelfEdge,
                vec![p],
                "self edge".to_string(),
            ));
            continue;
        }
        inbound.entry(c).or_default().push(p);
        match graph.node(c) {
            Some(child) if child.parent_id == Some(p) => {}
            _ => diags.push(Diagnostic::new(
                DiagnosticKind::EdgeParentMismatch,
                vec![p, c],
                format!("edge ({p},{c}) has no matching parent link"),
            )),
        }
    }
    for (c, parents) in &inbound {
        if parents.len() > 1 {
            diags.push(Diagnostic::new(
                DiagnosticKind::MultiParent,
                vec![*c],
                format!("node {} has {} inbound edges", c, parents.len()),
            ));
        }
    }
    for n in &graph.nodes {
        if let Some(p) = n.parent_id {
            if !graph.edges.contains(&(p, n.id)) {
                diags.push(Diagnostic::new(
                    DiagnosticKind::EdgeParentMismatch,
                    vec![p, n.id],
                    format!("parent link {}->{} has no matching edge", p, n.id),
                ));
            }
        }
    }

    // Cycle check over parent links.
    for n in &graph.nodes {
        let mut seen = BTreeSet::new();
        let mut cur = n.id;
        seen.insert(cur);
        while let Some(p) = graph.node(cur).and_then(|x| x.parent_id) {
            if !seen.insert(p) {
                if p == n.id {
                    diags.push(Diagnostic::new(
                        DiagnosticKind::Cycle,
                        vec![n.id],
                        format!("node {} lies on a parent cycle", n.id),
                    ));
                }
                break;
            }
            cur = p;
        }
    }

    diags.sort();
    diags.dedup();
    diags
}

/// True for diagnostics that make the graph structurally unusable (as
/// opposed to informational ones like orphan components).
fn is_fatal(d: &Diagnostic) -> bool {
    !matches!(d.kind, DiagnosticKind::Orphan)
}

/// Flattens a graph to rows sorted by `(level, node_id)`.
pub fn to_table(graph: &OrgGraph) -> Result<Vec<TableRow>> {
    let fatal: Vec<Diagnostic> = validate(graph).into_iter().filter(is_fatal).collect();
    if !fatal.is_empty() {
        return Err(Error::InvalidGraph(fatal));
    }
    let mut rows: Vec<TableRow> = graph
        .nodes
        .iter()
        .map(|n| TableRow {
            node_id: n.id,
            parent_id: n.parent_id,
            text: n.text.clone(),
            level: n.level,
            bbox: n.bbox,
        })
        .collect();
    rows.sort_by_key(|r| (r.level, r.node_id));
    Ok(rows)
}

/// Rebuilds a graph from rows. The root is the unique parentless row with
/// level 0; when several exist (orphan components) the one with the
/// smallest id wins, matching [`to_table`] output for such graphs.
pub fn from_table(rows: &[TableRow]) -> Result<OrgGraph> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    let nodes: Vec<OrgNode> = rows
        .iter()
        .map(|r| OrgNode {
            id: r.node_id,
            bbox: r.bbox,
            text: r.text.clone(),
            level: r.level,
            parent_id: r.parent_id,
        })
        .collect();
    let root_id = nodes
        .iter()
        .filter(|n| n.parent_id.is_none())
        .map(|n| n.id)
        .min()
        .ok_or_else(|| {
            Error::InvalidGraph(vec![Diagnostic::new(
                DiagnosticKind::RootInvalid,
                vec![],
                "no parentless row to act as root".to_string(),
            )])
        })?;
    let graph = OrgGraph::from_nodes(nodes, root_id);
    let fatal: Vec<Diagnostic> = validate(&graph).into_iter().filter(is_fatal).collect();
    if !fatal.is_empty() {
        return Err(Error::InvalidGraph(fatal));
    }
    Ok(graph)
}

#[derive(Serialize, Deserialize)]
struct JsonNode {
    id: u32,
    parent_id: Option<u32>,
    text: String,
    level: u32,
    bbox: [u32; 4],
}

#[derive(Serialize, Deserialize)]
struct JsonGraph {
    root_id: u32,
    nodes: Vec<JsonNode>,
}

/// Canonical JSON encoding: keys sorted, two-space indent, LF line
/// endings, trailing newline. Identical graphs produce identical bytes.
pub fn table_to_json(graph: &OrgGraph) -> Result<String> {
    let rows = to_table(graph)?;
    let doc = JsonGraph {
        root_id: graph.root_id,
        nodes: rows
            .iter()
            .map(|r| JsonNode {
                id: r.node_id,
                parent_id: r.parent_id,
                text: r.text.clone(),
                level: r.level,
                bbox: [r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2],
            })
            .collect(),
    };
    // Round-tripping through Value sorts object keys.
    let value = serde_json::to_value(&doc)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

pub fn graph_from_json(s: &str) -> Result<OrgGraph> {
    let doc: JsonGraph = serde_json::from_str(s)?;
    let nodes: Vec<OrgNode> = doc
        .nodes
        .into_iter()
        .map(|n| {
            Ok(OrgNode {
                id: n.id,
                bbox: BBox::new(n.bbox[0], n.bbox[1], n.bbox[2], n.bbox[3])?,
                text: n.text,
                level: n.level,
                parent_id: n.parent_id,
            })
        })
        .collect::<Result<_>>()?;
    if nodes.is_empty() {
        return Err(Error::EmptyTable);
    }
    let graph = OrgGraph::from_nodes(nodes, doc.root_id);
    let fatal: Vec<Diagnostic> = validate(&graph).into_iter().filter(is_fatal).collect();
    if !fatal.is_empty() {
        return Err(Error::InvalidGraph(fatal));
    }
    Ok(graph)
}

/// CSV export with the fixed column order
/// `node_id,parent_id,text,level,x1,y1,x2,y2` and RFC-4180 quoting.
pub fn table_to_csv(graph: &OrgGraph) -> Result<String> {
    let rows = to_table(graph)?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["node_id", "parent_id", "text", "level", "x1", "y1", "x2", "y2"])?;
    for r in &rows {
        let parent = r.parent_id.map(|p| p.to_string()).unwrap_or_default();
        w.write_record([
            r.node_id.to_string(),
            parent,
            r.text.clone(),
            r.level.to_string(),
            r.bbox.x1.to_string(),
            r.bbox.y1.to_string(),
            r.bbox.x2.to_string(),
            r.bbox.y2.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
