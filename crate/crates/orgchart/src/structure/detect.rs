//! Node detection over a binary mask: 8-connected components whose
//! boundary encloses an interior hole, with a shape label fitted from the
//! component geometry. Connector polylines never enclose background, so
//! the hole gate excludes them without a separate thinness test.

use serde::{Deserialize, Serialize};

use crate::imaging::BinaryMask;
use crate::model::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangle,
    Square,
    Ellipse,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedNode {
    pub bbox: BBox,
    pub shape: Shape,
    /// Fraction of the bbox covered by foreground pixels (outline plus any
    /// text inside).
    pub fill_ratio: f64,
}

struct Component {
    pixels: Vec<(u32, u32)>,
    x1: u32,
    y1: u32,
    x2: u32,
    y2: u32,
}

fn components(mask: &BinaryMask) -> Vec<Component> {
    let w = mask.width();
    let h = mask.height();
    let mut labeled = vec![false; w as usize * h as usize];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            let idx = sy as usize * w as usize + sx as usize;
            if labeled[idx] || !mask.is_foreground(sx, sy) {
                continue;
            }
            let mut comp = Component {
                pixels: Vec::new(),
                x1: sx,
                y1: sy,
                x2: sx,
                y2: sy,
            };
            labeled[idx] = true;
            stack.push((sx, sy));
            while let Some((x, y)) = stack.pop() {
                comp.pixels.push((x, y));
                comp.x1 = comp.x1.min(x);
                comp.y1 = comp.y1.min(y);
                comp.x2 = comp.x2.max(x);
                comp.y2 = comp.y2.max(y);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let nx = x as i64 + dx;
                        let ny = y as i64 + dy;
                        if nx < 0 || ny < 0 || nx >= i64::from(w) || ny >= i64::from(h) {
                            continue;
                        }
                        let nidx = ny as usize * w as usize + nx as usize;
                        if !labeled[nidx] && mask.is_foreground(nx as u32, ny as u32) {
                            labeled[nidx] = true;
                            stack.push((nx as u32, ny as u32));
                        }
                    }
                }
            }
            out.push(comp);
        }
    }
    out
}

/// True when the component encloses background: flood background from
/// outside the padded bbox and look for unreached non-component cells.
/// Dilating by `max_fill_gap` first lets outlines with small breaks still
/// count as closed.
fn has_interior_hole(comp: &Component, max_fill_gap: u32) -> bool {
    let pad = max_fill_gap as i64 + 1;
    let gw = (i64::from(comp.x2 - comp.x1) + 1 + 2 * pad) as usize;
    let gh = (i64::from(comp.y2 - comp.y1) + 1 + 2 * pad) as usize;
    let mut blocked = vec![false; gw * gh];
    let g = max_fill_gap as i64;
    for &(x, y) in &comp.pixels {
        let cx = i64::from(x - comp.x1) + pad;
        let cy = i64::from(y - comp.y1) + pad;
        for dy in -g..=g {
            for dx in -g..=g {
                let nx = cx + dx;
                let ny = cy + dy;
                if nx >= 0 && ny >= 0 && (nx as usize) < gw && (ny as usize) < gh {
                    blocked[ny as usize * gw + nx as usize] = true;
                }
            }
        }
    }
    // 4-connected flood over free cells from the outer ring.
    let mut reached = vec![false; gw * gh];
    let mut stack = vec![(0usize, 0usize)];
    reached[0] = true;
    while let Some((x, y)) = stack.pop() {
        let neighbors = [
            (x.wrapping_sub(1), y),
            (x + 1, y),
            (x, y.wrapping_sub(1)),
            (x, y + 1),
        ];
        for (nx, ny) in neighbors {
            if nx >= gw || ny >= gh {
                continue;
            }
            let idx = ny * gw + nx;
            if !reached[idx] && !blocked[idx] {
                reached[idx] = true;
                stack.push((nx, ny));
            }
        }
    }
    (0..gw * gh).any(|i| !blocked[i] && !reached[i])
}

fn classify_shape(comp: &Component, bbox: &BBox) -> Shape {
    let w = bbox.width();
    let h = bbox.height();
    // A corner "exists" when a component pixel sits within 1 px of the
    // bbox corner. Rectangles have all four; ellipses none.
    let corners = [
        (bbox.x1, bbox.y1),
        (bbox.x2 - 1, bbox.y1),
        (bbox.x1, bbox.y2 - 1),
        (bbox.x2 - 1, bbox.y2 - 1),
    ];
    let corner_count = corners
        .iter()
        .filter(|&&(cx, cy)| {
            comp.pixels.iter().any(|&(px, py)| {
                (i64::from(px) - i64::from(cx)).abs() <= 1
                    && (i64::from(py) - i64::from(cy)).abs() <= 1
            })
        })
        .count();

    let bbox_perimeter = 2.0 * (f64::from(w) + f64::from(h));
    let perimeter_ratio = comp.pixels.len() as f64 / bbox_perimeter;

    if perimeter_ratio >= 0.9 && corner_count == 4 {
        let diff = (i64::from(w) - i64::from(h)).unsigned_abs() as f64;
        if diff <= 0.1 * f64::from(w.max(h)) {
            return Shape::Square;
        }
        return Shape::Rectangle;
    }

    // Ellipse fit: normalized radius of each pixel against the inscribed
    // ellipse of the bbox must stay within 10% of 1.
    let a = f64::from(w) / 2.0;
    let b = f64::from(h) / 2.0;
    let (cx, cy) = bbox.center();
    let within = comp
        .pixels
        .iter()
        .filter(|&&(px, py)| {
            let nx = (f64::from(px) + 0.5 - cx) / a;
            let ny = (f64::from(py) + 0.5 - cy) / b;
            ((nx * nx + ny * ny).sqrt() - 1.0).abs() <= 0.1
        })
        .count();
    if within as f64 >= 0.9 * comp.pixels.len() as f64 {
        return Shape::Ellipse;
    }
    Shape::Unknown
}

/// Finds closed-shape components at least `min_node_area` in bbox area.
/// Results are sorted by (y1, x1) so node ordering is deterministic.
pub fn detect_nodes(mask: &BinaryMask, min_node_area: u64, max_fill_gap: u32) -> Vec<DetectedNode> {
    let mut nodes = Vec::new();
    for comp in components(mask) {
        let bbox = BBox {
            x1: comp.x1,
            y1: comp.y1,
            x2: comp.x2 + 1,
            y2: comp.y2 + 1,
        };
        if bbox.area() < min_node_area {
            continue;
        }
        if !has_interior_hole(&comp, max_fill_gap) {
            continue;
        }
        let shape = classify_shape(&comp, &bbox);
        let mut fg_in_bbox = 0u64;
        for y in bbox.y1..bbox.y2 {
            for x in bbox.x1..bbox.x2 {
                if mask.is_foreground(x, y) {
                    fg_in_bbox += 1;
                }
            }
        }
        nodes.push(DetectedNode {
            bbox,
            shape,
            fill_ratio: fg_in_bbox as f64 / bbox.area() as f64,
        });
    }
    nodes.sort_by_key(|n| (n.bbox.y1, n.bbox.x1, n.bbox.x2, n.bbox.y2));
    nodes
}
