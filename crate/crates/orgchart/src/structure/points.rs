//! Classification of detected corners into node points (node boundary
//! meets a connector), junction points (connector intersections: cross,
//! T, L), and invalid points (text corners, stray responses, straight
//! runs).

use serde::{Deserialize, Serialize};

use crate::features::CornerPoint;
use crate::imaging::BinaryMask;
use crate::structure::DetectedNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    NodePoint,
    JunctionPoint,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JunctionKind {
    Cross,
    T,
    L,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedPoint {
    pub x: u32,
    pub y: u32,
    pub kind: PointKind,
    pub junction_kind: JunctionKind,
    /// Index into the detected-node list; set for node points only.
    pub owner_node: Option<usize>,
}

/// How close to a bbox perimeter a corner must sit to count as touching it.
const PERIMETER_TOLERANCE: u32 = 2;
/// Corners deeper inside a node than this are text artifacts.
const INTERIOR_DEPTH: u32 = 3;
/// Search radius for the connector stub that must leave the node.
const STUB_RADIUS: i64 = 3;

/// Sorts corners into node points, junction candidates, and invalid
/// points, then runs [`filter_junctions`] over the candidates. A corner is
/// a node point when it touches a node's bbox perimeter and a foreground
/// pixel just outside that bbox shows a connector leaving; corners in a
/// node's interior are invalid (text corners).
pub fn classify_points(
    corners: &[CornerPoint],
    nodes: &[DetectedNode],
    mask: &BinaryMask,
    window: u32,
) -> Vec<ClassifiedPoint> {
    let mut out = Vec::with_capacity(corners.len());
    let mut candidates = Vec::new();
    for c in corners {
        let mut best: Option<(usize, u32)> = None;
        let mut interior = false;
        for (i, n) in nodes.iter().enumerate() {
            let d = n.bbox.perimeter_distance(c.x, c.y);
            if n.bbox.contains(c.x, c.y) && d >= INTERIOR_DEPTH {
                interior = true;
                break;
            }
            if d <= PERIMETER_TOLERANCE {
                let better = match best {
                    None => true,
                    Some((bi, bd)) => {
                        d < bd || (d == bd && n.bbox.area() < nodes[bi].bbox.area())
                    }
                };
                if better {
                    best = Some((i, d));
                }
            }
        }
        if interior {
            out.push(ClassifiedPoint {
                x: c.x,
                y: c.y,
                kind: PointKind::Invalid,
                junction_kind: JunctionKind::None,
                owner_node: None,
            });
            continue;
        }
        if let Some((i, _)) = best {
            if stub_leaves_node(mask, c.x, c.y, &nodes[i]) {
                out.push(ClassifiedPoint {
                    x: c.x,
                    y: c.y,
                    kind: PointKind::NodePoint,
                    junction_kind: JunctionKind::None,
                    owner_node: Some(i),
                });
                continue;
            }
        }
        candidates.push(ClassifiedPoint {
            x: c.x,
            y: c.y,
            kind: PointKind::JunctionPoint,
            junction_kind: JunctionKind::None,
            owner_node: None,
        });
    }
    out.extend(filter_junctions(&candidates, mask, window));
    out
}

/// Foreground pixel near the corner but strictly outside the node bbox:
/// the trace of a connector leaving the node.
fn stub_leaves_node(mask: &BinaryMask, cx: u32, cy: u32, node: &DetectedNode) -> bool {
    for dy in -STUB_RADIUS..=STUB_RADIUS {
        for dx in -STUB_RADIUS..=STUB_RADIUS {
            let x = i64::from(cx) + dx;
            let y = i64::from(cy) + dy;
            if x < 0 || y < 0 || x >= i64::from(mask.width()) || y >= i64::from(mask.height()) {
                continue;
            }
            let (x, y) = (x as u32, y as u32);
            if !node.bbox.contains(x, y) && mask.is_foreground(x, y) {
                return true;
            }
        }
    }
    false
}

/// Validates junction candidates by counting foreground arms that cross
/// the window border and connect back to the center: 4 arms form a cross,
/// 3 a T, and 2 arms meeting at roughly a right angle (60..120 degrees)
/// an L. Anything else, including collinear pairs from straight runs, is
/// invalid.
pub fn filter_junctions(
    candidates: &[ClassifiedPoint],
    mask: &BinaryMask,
    window: u32,
) -> Vec<ClassifiedPoint> {
    let half = i64::from(window / 2);
    candidates
        .iter()
        .map(|c| {
            let kind = junction_kind_at(mask, c.x, c.y, half);
            match kind {
                JunctionKind::None => ClassifiedPoint {
                    kind: PointKind::Invalid,
                    junction_kind: JunctionKind::None,
                    ..*c
                },
                k => ClassifiedPoint {
                    kind: PointKind::JunctionPoint,
                    junction_kind: k,
                    ..*c
                },
            }
        })
        .collect()
}

fn junction_kind_at(mask: &BinaryMask, cx: u32, cy: u32, half: i64) -> JunctionKind {
    let Some((sx, sy)) = snap_to_foreground(mask, cx, cy, 2) else {
        return JunctionKind::None;
    };
    let w = i64::from(mask.width());
    let h = i64::from(mask.height());
    let side = 2 * half + 1;
    let fg_at = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w && y < h && mask.is_foreground(x as u32, y as u32)
    };

    // Flood the window box from the snapped center.
    let idx = |x: i64, y: i64| ((y - (sy - half)) * side + (x - (sx - half))) as usize;
    let in_box = |x: i64, y: i64| (x - sx).abs() <= half && (y - sy).abs() <= half;
    let mut reached = vec![false; (side * side) as usize];
    let mut stack = vec![(sx, sy)];
    reached[idx(sx, sy)] = true;
    while let Some((x, y)) = stack.pop() {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = x + dx;
                let ny = y + dy;
                if in_box(nx, ny) && fg_at(nx, ny) && !reached[idx(nx, ny)] {
                    reached[idx(nx, ny)] = true;
                    stack.push((nx, ny));
                }
            }
        }
    }

    // Ring cells in circular order, starting at the top-left corner.
    let mut ring = Vec::with_capacity((8 * half) as usize);
    for x in (sx - half)..=(sx + half) {
        ring.push((x, sy - half));
    }
    for y in (sy - half + 1)..=(sy + half) {
        ring.push((sx + half, y));
    }
    for x in ((sx - half)..(sx + half)).rev() {
        ring.push((x, sy + half));
    }
    for y in ((sy - half + 1)..(sy + half)).rev() {
        ring.push((sx - half, y));
    }
    let active: Vec<bool> = ring
        .iter()
        .map(|&(x, y)| fg_at(x, y) && reached[idx(x, y)])
        .collect();

    // Maximal circular runs of active ring cells are the arms.
    let n = active.len();
    if active.iter().all(|&a| a) {
        return JunctionKind::None;
    }
    let mut arms: Vec<(f64, f64)> = Vec::new();
    let mut i = 0;
    while i < n {
        if active[i] && (i == 0 && !active[n - 1] || i > 0 && !active[i - 1]) {
            let mut j = i;
            while active[(j + 1) % n] && (j + 1) % n != i {
                j += 1;
            }
            // Midpoint cell of the run gives the arm direction.
            let mid = ring[(i + (j - i) / 2) % n];
            let dx = (mid.0 - sx) as f64;
            let dy = (mid.1 - sy) as f64;
            let len = (dx * dx + dy * dy).sqrt();
            if len > 0.0 {
                arms.push((dx / len, dy / len));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    // The wrap-around start cell was handled by the modular run scan; runs
    // that span the seam are counted once because the scan only starts at
    // run heads.
    match arms.len() {
        4 => JunctionKind::Cross,
        3 => JunctionKind::T,
        2 => {
            let dot = arms[0].0 * arms[1].0 + arms[0].1 * arms[1].1;
            let angle = dot.clamp(-1.0, 1.0).acos().to_degrees();
            if (60.0..=120.0).contains(&angle) {
                JunctionKind::L
            } else {
                JunctionKind::None
            }
        }
        _ => JunctionKind::None,
    }
}

/// Nearest foreground pixel within a small Chebyshev radius; corners can
/// land a pixel off the ink. Deterministic: nearest ring first, then
/// (y, x) order.
fn snap_to_foreground(mask: &BinaryMask, cx: u32, cy: u32, radius: i64) -> Option<(i64, i64)> {
    let w = i64::from(mask.width());
    let h = i64::from(mask.height());
    for r in 0..=radius {
        let mut cells: Vec<(i64, i64)> = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs().max(dy.abs()) == r {
                    cells.push((i64::from(cy) + dy, i64::from(cx) + dx));
                }
            }
        }
        cells.sort_unstable();
        for (y, x) in cells {
            if x >= 0 && y >= 0 && x < w && y < h && mask.is_foreground(x as u32, y as u32) {
                return Some((x, y));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::BinaryMask;
    use crate::model::BBox;
    use crate::structure::Shape;

    fn candidate(x: u32, y: u32) -> ClassifiedPoint {
        ClassifiedPoint {
            x,
            y,
            kind: PointKind::JunctionPoint,
            junction_kind: JunctionKind::None,
            owner_node: None,
        }
    }

    fn mask_with_cross(w: u32, h: u32, cx: u32, cy: u32) -> BinaryMask {
        let mut m = BinaryMask::new_background(w, h);
        for x in 0..w {
            m.set_foreground(x, cy, true);
        }
        for y in 0..h {
            m.set_foreground(cx, y, true);
        }
        m
    }

    #[test]
    fn cross_junction_detected() {
        let m = mask_with_cross(40, 40, 20, 20);
        let got = filter_junctions(&[candidate(20, 20)], &m, 15);
        assert_eq!(got[0].kind, PointKind::JunctionPoint);
        assert_eq!(got[0].junction_kind, JunctionKind::Cross);
    }

    #[test]
    fn straight_run_is_invalid() {
        let mut m = BinaryMask::new_background(40, 40);
        for x in 0..40 {
            m.set_foreground(x, 20, true);
        }
        let got = filter_junctions(&[candidate(20, 20)], &m, 15);
        assert_eq!(got[0].kind, PointKind::Invalid);
    }

    #[test]
    fn l_bend_detected() {
        let mut m = BinaryMask::new_background(40, 40);
        for x in 20..40 {
            m.set_foreground(x, 20, true);
        }
        for y in 20..40 {
            m.set_foreground(20, y, true);
        }
        let got = filter_junctions(&[candidate(20, 20)], &m, 15);
        assert_eq!(got[0].junction_kind, JunctionKind::L);
    }

    #[test]
    fn t_junction_detected() {
        let mut m = BinaryMask::new_background(40, 40);
        for x in 0..40 {
            m.set_foreground(x, 20, true);
        }
        for y in 20..40 {
            m.set_foreground(20, y, true);
        }
        let got = filter_junctions(&[candidate(20, 20)], &m, 15);
        assert_eq!(got[0].junction_kind, JunctionKind::T);
    }

    #[test]
    fn blank_region_is_invalid() {
        let m = BinaryMask::new_background(40, 40);
        let got = filter_junctions(&[candidate(20, 20)], &m, 15);
        assert_eq!(got[0].kind, PointKind::Invalid);
    }

    fn rect_node(x1: u32, y1: u32, x2: u32, y2: u32) -> DetectedNode {
        DetectedNode {
            bbox: BBox::new(x1, y1, x2, y2).unwrap(),
            shape: Shape::Rectangle,
            fill_ratio: 0.1,
        }
    }

    fn draw_rect(m: &mut BinaryMask, x1: u32, y1: u32, x2: u32, y2: u32) {
        for x in x1..x2 {
            m.set_foreground(x, y1, true);
            m.set_foreground(x, y2 - 1, true);
        }
        for y in y1..y2 {
            m.set_foreground(x1, y, true);
            m.set_foreground(x2 - 1, y, true);
        }
    }

    #[test]
    fn node_point_at_connector_departure() {
        let mut m = BinaryMask::new_background(120, 120);
        draw_rect(&mut m, 20, 20, 80, 60);
        // Connector leaving the bottom border midpoint, one blank pixel gap.
        for y in 61..100 {
            m.set_foreground(50, y, true);
        }
        let nodes = vec![rect_node(20, 20, 80, 60)];
        let corners = vec![CornerPoint {
            x: 50,
            y: 59,
            response: 1.0,
        }];
        let got = classify_points(&corners, &nodes, &m, 15);
        assert_eq!(got[0].kind, PointKind::NodePoint);
        assert_eq!(got[0].owner_node, Some(0));
    }

    #[test]
    fn interior_text_corner_invalid() {
        let mut m = BinaryMask::new_background(120, 120);
        draw_rect(&mut m, 20, 20, 80, 60);
        let nodes = vec![rect_node(20, 20, 80, 60)];
        let corners = vec![CornerPoint {
            x: 50,
            y: 40,
            response: 1.0,
        }];
        let got = classify_points(&corners, &nodes, &m, 15);
        assert_eq!(got[0].kind, PointKind::Invalid);
    }

    #[test]
    fn far_crossing_is_junction() {
        let mut m = mask_with_cross(120, 120, 90, 90);
        draw_rect(&mut m, 10, 10, 50, 40);
        let nodes = vec![rect_node(10, 10, 50, 40)];
        let corners = vec![CornerPoint {
            x: 90,
            y: 90,
            response: 1.0,
        }];
        let got = classify_points(&corners, &nodes, &m, 15);
        assert_eq!(got[0].kind, PointKind::JunctionPoint);
        assert_eq!(got[0].junction_kind, JunctionKind::Cross);
    }
}
