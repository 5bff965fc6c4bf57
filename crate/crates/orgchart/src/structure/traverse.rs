//! Depth-first walk over connector pixels. Node points act as vertices:
//! reaching another node's point assigns parentage and re-roots the walk
//! at that node, so levels fall out of the traversal order. Each pixel is
//! visited at most once, keeping the walk linear in the foreground size.

use std::collections::HashMap;

use crate::error::{Diagnostic, DiagnosticKind, Result};
use crate::imaging::BinaryMask;
use crate::model::{OrgGraph, OrgNode};
use crate::structure::{ClassifiedPoint, DetectedNode, PointKind};

/// Pixels this close (Chebyshev) to a node point trigger it. Bridges the
/// one-pixel standoff between connector ends and node outlines.
const TRIGGER_RADIUS: i64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraversalStats {
    /// Connector pixels visited; at most one visit per pixel.
    pub pixel_visits: usize,
    /// Foreground pixels in the input mask, the visit budget.
    pub foreground_pixels: usize,
}

struct TraversalState {
    visited: Vec<bool>,
    parent: Vec<Option<usize>>,
    level: Vec<u32>,
    edges: Vec<(usize, usize)>,
    visits: usize,
}

/// Walks the mask from the root's node points and returns the recovered
/// hierarchy. Nodes never reached stay parentless local roots and are
/// reported as orphans. Node ids are detection indices plus one.
pub fn traverse(
    mask: &BinaryMask,
    nodes: &[DetectedNode],
    texts: &[String],
    points: &[ClassifiedPoint],
    root: usize,
) -> Result<(OrgGraph, Vec<Diagnostic>, TraversalStats)> {
    assert_eq!(nodes.len(), texts.len(), "one text per node");
    assert!(root < nodes.len(), "root must be a detected node");
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let foreground_pixels = mask.foreground_count();

    // Connector-only view: foreground outside every node bbox, thinned to
    // centerlines so stroke width does not multiply the walk.
    let mut walkable = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            walkable[y * w + x] = mask.is_foreground(x as u32, y as u32);
        }
    }
    for n in nodes {
        for y in n.bbox.y1..n.bbox.y2 {
            for x in n.bbox.x1..n.bbox.x2 {
                walkable[y as usize * w + x as usize] = false;
            }
        }
    }
    thin(&mut walkable, w, h);

    // Trigger zones around node points; nearer point wins, ties to the
    // lower point index.
    let node_points: Vec<&ClassifiedPoint> = points
        .iter()
        .filter(|p| p.kind == PointKind::NodePoint && p.owner_node.is_some())
        .collect();
    let mut trigger: HashMap<(i64, i64), (i64, usize)> = HashMap::new();
    for (pi, p) in node_points.iter().enumerate() {
        for dy in -TRIGGER_RADIUS..=TRIGGER_RADIUS {
            for dx in -TRIGGER_RADIUS..=TRIGGER_RADIUS {
                let key = (i64::from(p.x) + dx, i64::from(p.y) + dy);
                let d = dx.abs().max(dy.abs());
                match trigger.get(&key) {
                    Some(&(bd, _)) if bd <= d => {}
                    _ => {
                        trigger.insert(key, (d, pi));
                    }
                }
            }
        }
    }

    let mut st = TraversalState {
        visited: vec![false; w * h],
        parent: vec![None; nodes.len()],
        level: vec![0; nodes.len()],
        edges: Vec::new(),
        visits: 0,
    };

    let mut stack: Vec<(usize, usize, usize)> = Vec::new(); // (x, y, current parent node)
    let seed_from = |node: usize, stack: &mut Vec<(usize, usize, usize)>| {
        for p in &node_points {
            if p.owner_node != Some(node) {
                continue;
            }
            for dy in -TRIGGER_RADIUS..=TRIGGER_RADIUS {
                for dx in -TRIGGER_RADIUS..=TRIGGER_RADIUS {
                    let x = i64::from(p.x) + dx;
                    let y = i64::from(p.y) + dy;
                    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                        continue;
                    }
                    if walkable[y as usize * w + x as usize] {
                        stack.push((x as usize, y as usize, node));
                    }
                }
            }
        }
    };
    seed_from(root, &mut stack);

    while let Some((x, y, cur)) = stack.pop() {
        let idx = y * w + x;
        if st.visited[idx] || !walkable[idx] {
            continue;
        }
        st.visited[idx] = true;
        st.visits += 1;

        let mut cur = cur;
        if let Some(&(_, pi)) = trigger.get(&(x as i64, y as i64)) {
            let owner = node_points[pi].owner_node.expect("filtered above");
            if owner != cur && owner != root && st.parent[owner].is_none() {
                st.parent[owner] = Some(cur);
                st.level[owner] = st.level[cur] + 1;
                st.edges.push((cur, owner));
                seed_from(owner, &mut stack);
                cur = owner;
            }
        }

        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let nidx = ny as usize * w + nx as usize;
                if walkable[nidx] && !st.visited[nidx] {
                    stack.push((nx as usize, ny as usize, cur));
                }
            }
        }
    }

    let mut diagnostics = Vec::new();
    let mut org_nodes = Vec::with_capacity(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        if i != root && st.parent[i].is_none() {
            diagnostics.push(Diagnostic::new(
                DiagnosticKind::Orphan,
                vec![i as u32 + 1],
                format!(
                    "node {} unreachable from the root; connector missing or broken",
                    i + 1
                ),
            ));
        }
        org_nodes.push(OrgNode {
            id: i as u32 + 1,
            bbox: n.bbox,
            text: texts[i].clone(),
            level: st.level[i],
            parent_id: st.parent[i].map(|p| p as u32 + 1),
        });
    }
    let graph = OrgGraph::from_nodes(org_nodes, root as u32 + 1);
    diagnostics.sort();

    Ok((
        graph,
        diagnostics,
        TraversalStats {
            pixel_visits: st.visits,
            foreground_pixels,
        },
    ))
}

/// Zhang-Suen thinning. One-pixel strokes already at their centerline are
/// left alone; wider runs erode to it.
fn thin(grid: &mut [bool], w: usize, h: usize) {
    let at = |g: &[bool], x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && g[y as usize * w + x as usize]
    };
    loop {
        let mut changed = false;
        for phase in 0..2 {
            let mut to_clear = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    if !grid[y * w + x] {
                        continue;
                    }
                    let (xi, yi) = (x as i64, y as i64);
                    // P2..P9 clockwise from north.
                    let p = [
                        at(grid, xi, yi - 1),
                        at(grid, xi + 1, yi - 1),
                        at(grid, xi + 1, yi),
                        at(grid, xi + 1, yi + 1),
                        at(grid, xi, yi + 1),
                        at(grid, xi - 1, yi + 1),
                        at(grid, xi - 1, yi),
                        at(grid, xi - 1, yi - 1),
                    ];
                    let b: u32 = p.iter().map(|&v| u32::from(v)).sum();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8)
                        .filter(|&i| !p[i] && p[(i + 1) % 8])
                        .count();
                    if a != 1 {
                        continue;
                    }
                    let (p2, p4, p6, p8) = (p[0], p[2], p[4], p[6]);
                    let ok = if phase == 0 {
                        !(p2 && p4 && p6) && !(p4 && p6 && p8)
                    } else {
                        !(p2 && p4 && p8) && !(p2 && p6 && p8)
                    };
                    if ok {
                        to_clear.push(y * w + x);
                    }
                }
            }
            if !to_clear.is_empty() {
                changed = true;
                for idx in to_clear {
                    grid[idx] = false;
                }
            }
        }
        if !changed {
            break;
        }
    }
}
