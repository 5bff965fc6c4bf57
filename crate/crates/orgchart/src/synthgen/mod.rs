//! Deterministic synthetic org-chart generator.
//!
//! Builds a seeded random tree, assigns titles so seniority strictly
//! decreases down every path, lays levels out as rows (or columns for
//! left-rooted charts), draws outlines and orthogonal trunk-and-branch
//! connectors, renders text with the built-in bitmap font, and returns
//! the raster together with exact ground truth: the hierarchy table,
//! every junction with its kind, and the ink-pixel count. The same spec
//! and seed always produce byte-identical output.
//!
//! Connectors stop one blank pixel short of node outlines so every node
//! stays its own connected component for the classical detector; the
//! traversal bridges the gap through its trigger zones.

pub mod font;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Raster;
use crate::model::{BBox, OrgGraph, OrgNode};
use crate::structure::{JunctionKind, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutKind {
    TopDown,
    LeftRooted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    None,
    Gaussian { sigma: f64 },
    /// Replaces background (intensity > 127) with a horizontal ramp
    /// lo..hi; ink pixels stay untouched.
    BackgroundGradient { lo: u8, hi: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub node_count: u32,
    pub max_depth: u32,
    pub max_children: u32,
    pub shapes: Vec<Shape>,
    pub canvas_width: u32,
    pub canvas_height: u32,
    pub stroke_width: u32,
    pub layout: LayoutKind,
    pub noise: Noise,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            node_count: 10,
            max_depth: 4,
            max_children: 3,
            shapes: vec![Shape::Rectangle, Shape::Square, Shape::Ellipse],
            canvas_width: 1024,
            canvas_height: 768,
            stroke_width: 1,
            layout: LayoutKind::TopDown,
            noise: Noise::None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionTruth {
    pub x: u32,
    pub y: u32,
    pub kind: JunctionKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub graph: OrgGraph,
    pub junctions: Vec<JunctionTruth>,
    /// Foreground pixel count of the clean drawing, before any noise.
    pub ink_pixels: u64,
}

/// Title pool per depth level. Every title appears in the bundled corpus
/// and each band's scores lie strictly below the band above, which makes
/// corpus root selection provably correct on generated charts.
const TITLE_BANDS: [&[&str]; 8] = [
    &[
        "chief executive officer",
        "board of directors",
        "president",
        "ceo",
        "chairman",
        "managing director",
    ],
    &[
        "chief operating officer",
        "chief financial officer",
        "chief technology officer",
        "chief marketing officer",
        "chief information officer",
        "executive vice president",
        "general counsel",
    ],
    &[
        "senior vice president",
        "vice president",
        "vp engineering",
        "vp sales",
        "vp marketing",
        "vp operations",
        "vp finance",
    ],
    &[
        "senior director",
        "director",
        "director of engineering",
        "director of sales",
        "director of operations",
        "director of marketing",
        "head of product",
        "head of design",
    ],
    &[
        "senior manager",
        "manager",
        "engineering manager",
        "sales manager",
        "product manager",
        "operations manager",
        "marketing manager",
        "office manager",
        "project manager",
        "account manager",
    ],
    &[
        "team lead",
        "tech lead",
        "senior engineer",
        "senior analyst",
        "supervisor",
        "senior consultant",
        "staff engineer",
    ],
    &[
        "engineer",
        "developer",
        "analyst",
        "specialist",
        "coordinator",
        "associate",
        "consultant",
        "technician",
        "representative",
    ],
    &["junior engineer", "junior analyst", "assistant", "intern"],
];

const MARGIN: u32 = 20;
const SIBLING_GAP: u32 = 14;
const LEVEL_GAP: u32 = 44;
const TEXT_PAD: u32 = 6;
const FONT_SCALE: u32 = 1;
/// Largest text-block to ellipse-axis ratio that keeps text clear of the
/// outline ring.
const ELLIPSE_FIT: f64 = 0.55;

struct ChartNode {
    parent: Option<usize>,
    level: u32,
    title: String,
    shape: Shape,
    lines: Vec<String>,
    text_h: u32,
    width: u32,
    height: u32,
    /// Position along the sibling-spread axis.
    cross: u32,
    /// Position along the level-flow axis.
    main: u32,
}

impl ChartNode {
    fn cross_extent(&self, layout: LayoutKind) -> u32 {
        match layout {
            LayoutKind::TopDown => self.width,
            LayoutKind::LeftRooted => self.height,
        }
    }

    fn main_extent(&self, layout: LayoutKind) -> u32 {
        match layout {
            LayoutKind::TopDown => self.height,
            LayoutKind::LeftRooted => self.width,
        }
    }

    fn bbox(&self, layout: LayoutKind) -> BBox {
        let (x1, y1) = match layout {
            LayoutKind::TopDown => (self.cross, self.main),
            LayoutKind::LeftRooted => (self.main, self.cross),
        };
        BBox {
            x1,
            y1,
            x2: x1 + self.width,
            y2: y1 + self.height,
        }
    }
}

fn validate_spec(spec: &GenSpec) -> Result<()> {
    if !(1..=50).contains(&spec.node_count) {
        return Err(Error::BadGenSpec(format!(
            "node_count {} outside 1..=50",
            spec.node_count
        )));
    }
    if spec.max_children == 0 {
        return Err(Error::BadGenSpec("max_children must be >= 1".into()));
    }
    if spec.node_count > 1 && spec.max_depth == 0 {
        return Err(Error::BadGenSpec(
            "max_depth 0 cannot hold more than one node".into(),
        ));
    }
    if spec.max_depth as usize >= TITLE_BANDS.len() {
        return Err(Error::BadGenSpec(format!(
            "max_depth {} exceeds the {} title bands",
            spec.max_depth,
            TITLE_BANDS.len()
        )));
    }
    if spec.shapes.is_empty() || spec.shapes.contains(&Shape::Unknown) {
        return Err(Error::BadGenSpec(
            "shapes must be a nonempty subset of rectangle/square/ellipse".into(),
        ));
    }
    if !(1..=3).contains(&spec.stroke_width) {
        return Err(Error::BadGenSpec(format!(
            "stroke_width {} outside 1..=3",
            spec.stroke_width
        )));
    }
    if spec.canvas_width < 64 || spec.canvas_height < 64 {
        return Err(Error::BadGenSpec("canvas must be at least 64x64".into()));
    }
    Ok(())
}

/// Generates one chart. Identical spec (including seed) gives
/// byte-identical raster and truth.
pub fn generate(spec: &GenSpec) -> Result<(Raster, GroundTruth)> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Random tree: attach each node to a capacity-free parent, weighted
    // toward deeper parents so wide charts stay plausible on the canvas.
    let n = spec.node_count as usize;
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut level: Vec<u32> = vec![0];
    let mut child_count: Vec<u32> = vec![0];
    for i in 1..n {
        let candidates: Vec<usize> = (0..i)
            .filter(|&j| level[j] < spec.max_depth && child_count[j] < spec.max_children)
            .collect();
        if candidates.is_empty() {
            return Err(Error::BadGenSpec(format!(
                "node {i} cannot attach: depth/children limits too tight"
            )));
        }
        let total: u64 = candidates.iter().map(|&j| 1u64 << level[j].min(20)).sum();
        let mut r = rng.gen_range(0..total);
        let mut pick = candidates[0];
        for &j in &candidates {
            let w = 1u64 << level[j].min(20);
            if r < w {
                pick = j;
                break;
            }
            r -= w;
        }
        parent.push(Some(pick));
        level.push(level[pick] + 1);
        child_count[pick] += 1;
        child_count.push(0);
    }

    // Titles: per-level pool in shuffled order, numeric suffix once a pool
    // cycles, so every title in the chart is unique.
    let max_level = *level.iter().max().expect("nonempty") as usize;
    let mut band_order: Vec<Vec<usize>> = Vec::new();
    let mut band_cursor = vec![0usize; max_level + 1];
    for l in 0..=max_level {
        let mut order: Vec<usize> = (0..TITLE_BANDS[l].len()).collect();
        order.shuffle(&mut rng);
        band_order.push(order);
    }
    let mut nodes: Vec<ChartNode> = Vec::with_capacity(n);
    for i in 0..n {
        let l = level[i] as usize;
        let band = TITLE_BANDS[l];
        let k = band_cursor[l];
        band_cursor[l] += 1;
        let base = band[band_order[l][k % band.len()]];
        let round = k / band.len();
        let title = if round == 0 {
            base.to_string()
        } else {
            format!("{base} {}", round + 1)
        };
        let shape = spec.shapes[rng.gen_range(0..spec.shapes.len())];
        let (lines, text_w, text_h) = wrap_title(&title);
        let (width, height) = node_dims(shape, text_w, text_h);
        nodes.push(ChartNode {
            parent: parent[i],
            level: level[i],
            title,
            shape,
            lines,
            text_h,
            width,
            height,
            cross: 0,
            main: 0,
        });
    }

    let children: Vec<Vec<usize>> = {
        let mut c = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                c[*p].push(i);
            }
        }
        c
    };

    // Level offsets along the main axis.
    let mut level_extent = vec![0u32; max_level + 1];
    for nd in &nodes {
        let e = nd.main_extent(spec.layout);
        let l = nd.level as usize;
        level_extent[l] = level_extent[l].max(e);
    }
    let mut level_offset = vec![0u32; max_level + 1];
    let mut acc = MARGIN;
    for l in 0..=max_level {
        level_offset[l] = acc;
        acc += level_extent[l] + LEVEL_GAP;
    }
    let total_main = acc - LEVEL_GAP + MARGIN;

    // Tidy layout along the cross axis.
    let mut cross = vec![0i64; n];
    let extent = place_subtree(0, i64::from(MARGIN), &children, &nodes, spec.layout, &mut cross);
    let total_cross = (extent + 2 * i64::from(MARGIN)) as u32;

    let (canvas_main, canvas_cross, main_dim, cross_dim) = match spec.layout {
        LayoutKind::TopDown => (spec.canvas_height, spec.canvas_width, "height", "width"),
        LayoutKind::LeftRooted => (spec.canvas_width, spec.canvas_height, "width", "height"),
    };
    if total_main > canvas_main {
        return Err(Error::LayoutOverflow {
            dimension: main_dim,
            needed: total_main,
            available: canvas_main,
        });
    }
    if total_cross > canvas_cross {
        return Err(Error::LayoutOverflow {
            dimension: cross_dim,
            needed: total_cross,
            available: canvas_cross,
        });
    }
    for i in 0..n {
        nodes[i].cross = cross[i] as u32;
        nodes[i].main = level_offset[nodes[i].level as usize];
    }

    // Draw.
    let mut img = Raster::filled(spec.canvas_width, spec.canvas_height, 255);
    for nd in &nodes {
        draw_node(&mut img, nd, spec.layout, spec.stroke_width);
    }
    let mut junctions = Vec::new();
    for (i, kids) in children.iter().enumerate() {
        if !kids.is_empty() {
            draw_connectors(
                &mut img,
                &nodes,
                i,
                kids,
                &level_offset,
                spec.layout,
                spec.stroke_width,
                &mut junctions,
            );
        }
    }
    junctions.sort_by_key(|j| (j.y, j.x));
    junctions.dedup();

    let ink_pixels = img.data().iter().filter(|&&v| v == 0).count() as u64;

    let org_nodes: Vec<OrgNode> = nodes
        .iter()
        .enumerate()
        .map(|(i, nd)| OrgNode {
            id: i as u32 + 1,
            bbox: nd.bbox(spec.layout),
            text: nd.title.clone(),
            level: nd.level,
            parent_id: nd.parent.map(|p| p as u32 + 1),
        })
        .collect();
    let graph = OrgGraph::from_nodes(org_nodes, 1);

    let img = perturb(&img, &spec.noise, spec.seed ^ 0x6e6f_6973_65u64)?;
    Ok((
        img,
        GroundTruth {
            graph,
            junctions,
            ink_pixels,
        },
    ))
}

/// Wraps a title into at most three lines; returns (lines, block width,
/// block height).
fn wrap_title(title: &str) -> (Vec<String>, u32, u32) {
    let words: Vec<&str> = title.split_whitespace().collect();
    let longest = words
        .iter()
        .map(|w| font::text_width(w, FONT_SCALE))
        .max()
        .unwrap_or(0);
    let mut target = longest.max(20);
    let lines = loop {
        let mut lines: Vec<String> = Vec::new();
        let mut cur = String::new();
        for w in &words {
            let cand = if cur.is_empty() {
                (*w).to_string()
            } else {
                format!("{cur} {w}")
            };
            if font::text_width(&cand, FONT_SCALE) <= target || cur.is_empty() {
                cur = cand;
            } else {
                lines.push(cur);
                cur = (*w).to_string();
            }
        }
        if !cur.is_empty() {
            lines.push(cur);
        }
        if lines.len() <= 3 {
            break lines;
        }
        target += 12 * FONT_SCALE;
    };
    let text_w = lines
        .iter()
        .map(|l| font::text_width(l, FONT_SCALE))
        .max()
        .unwrap_or(0);
    let line_h = font::text_height(FONT_SCALE) + 2 * FONT_SCALE;
    let text_h = lines.len() as u32 * line_h - 2 * FONT_SCALE;
    (lines, text_w, text_h)
}

fn node_dims(shape: Shape, text_w: u32, text_h: u32) -> (u32, u32) {
    match shape {
        Shape::Rectangle => ((text_w + 2 * TEXT_PAD).max(36), (text_h + 2 * TEXT_PAD).max(26)),
        Shape::Square => {
            let s = (text_w + 2 * TEXT_PAD).max(text_h + 2 * TEXT_PAD).max(36);
            (s, s)
        }
        Shape::Ellipse | Shape::Unknown => {
            let odd = |v: u32| if v % 2 == 0 { v + 1 } else { v };
            let w = odd(((f64::from(text_w) / ELLIPSE_FIT).ceil() as u32 + 2).max(41));
            let h = odd(((f64::from(text_h) / ELLIPSE_FIT).ceil() as u32 + 2).max(27));
            (w, h)
        }
    }
}

/// Recursive tidy placement along the cross axis. Parents center on their
/// middle child (odd counts) or the midpoint of the two outer children
/// (even counts); children shift right when the parent overhangs.
fn place_subtree(
    i: usize,
    origin: i64,
    children: &[Vec<usize>],
    nodes: &[ChartNode],
    layout: LayoutKind,
    cross: &mut [i64],
) -> i64 {
    let my_extent = i64::from(nodes[i].cross_extent(layout));
    if children[i].is_empty() {
        cross[i] = origin;
        return my_extent;
    }
    let mut cur = origin;
    for &c in &children[i] {
        let ext = place_subtree(c, cur, children, nodes, layout, cross);
        cur += ext + i64::from(SIBLING_GAP);
    }
    let span_end = cur - i64::from(SIBLING_GAP);
    let center_of = |c: usize| cross[c] + i64::from(nodes[c].cross_extent(layout)) / 2;
    let kids = &children[i];
    let center = if kids.len() % 2 == 1 {
        center_of(kids[kids.len() / 2])
    } else {
        (center_of(kids[0]) + center_of(kids[kids.len() - 1])) / 2
    };
    let mut desired = center - my_extent / 2;
    let mut span_end = span_end;
    if desired < origin {
        let delta = origin - desired;
        for &c in kids {
            shift_subtree(c, delta, children, cross);
        }
        span_end += delta;
        desired = origin;
    }
    cross[i] = desired;
    (span_end.max(desired + my_extent)) - origin
}

fn shift_subtree(i: usize, delta: i64, children: &[Vec<usize>], cross: &mut [i64]) {
    cross[i] += delta;
    for &c in &children[i] {
        shift_subtree(c, delta, children, cross);
    }
}

fn set_ink(img: &mut Raster, x: i64, y: i64) {
    if x >= 0 && y >= 0 && x < i64::from(img.width()) && y < i64::from(img.height()) {
        img.set_gray(x as u32, y as u32, 0);
    }
}

/// Line along the main axis at a fixed cross coordinate.
fn line_main(img: &mut Raster, layout: LayoutKind, cross: i64, m0: i64, m1: i64, stroke: u32) {
    let r = i64::from(stroke / 2);
    for m in m0.min(m1)..=m0.max(m1) {
        for d in -r..=r {
            match layout {
                LayoutKind::TopDown => set_ink(img, cross + d, m),
                LayoutKind::LeftRooted => set_ink(img, m, cross + d),
            }
        }
    }
}

/// Line along the cross axis at a fixed main coordinate.
fn line_cross(img: &mut Raster, layout: LayoutKind, main: i64, c0: i64, c1: i64, stroke: u32) {
    let r = i64::from(stroke / 2);
    for c in c0.min(c1)..=c0.max(c1) {
        for d in -r..=r {
            match layout {
                LayoutKind::TopDown => set_ink(img, c, main + d),
                LayoutKind::LeftRooted => set_ink(img, main + d, c),
            }
        }
    }
}

fn draw_node(img: &mut Raster, nd: &ChartNode, layout: LayoutKind, stroke: u32) {
    let b = nd.bbox(layout);
    match nd.shape {
        Shape::Rectangle | Shape::Square | Shape::Unknown => {
            for t in 0..stroke {
                draw_rect_outline(img, &b, t);
            }
        }
        Shape::Ellipse => {
            let a = i64::from(b.width() - 1) / 2;
            let bb = i64::from(b.height() - 1) / 2;
            let cx = i64::from(b.x1) + a;
            let cy = i64::from(b.y1) + bb;
            for t in 0..i64::from(stroke) {
                draw_ellipse_outline(img, cx, cy, a - t, bb - t);
            }
        }
    }
    // Text block centered, each line centered individually.
    let line_h = font::text_height(FONT_SCALE) + 2 * FONT_SCALE;
    let top = b.y1 + (b.height() - nd.text_h) / 2;
    for (li, line) in nd.lines.iter().enumerate() {
        let lw = font::text_width(line, FONT_SCALE);
        let lx = b.x1 + (b.width() - lw) / 2;
        let ly = top + li as u32 * line_h;
        let mut set = |x: u32, y: u32| img.set_gray(x, y, 0);
        font::draw_text(&mut set, lx, ly, line, FONT_SCALE);
    }
}

fn draw_rect_outline(img: &mut Raster, b: &BBox, inset: u32) {
    let x1 = i64::from(b.x1 + inset);
    let y1 = i64::from(b.y1 + inset);
    let x2 = i64::from(b.x2 - 1 - inset);
    let y2 = i64::from(b.y2 - 1 - inset);
    for x in x1..=x2 {
        set_ink(img, x, y1);
        set_ink(img, x, y2);
    }
    for y in y1..=y2 {
        set_ink(img, x1, y);
        set_ink(img, x2, y);
    }
}

/// Midpoint ellipse, 8-connected closed outline.
fn draw_ellipse_outline(img: &mut Raster, cx: i64, cy: i64, a: i64, b: i64) {
    if a <= 0 || b <= 0 {
        return;
    }
    let (a2, b2) = ((a * a) as f64, (b * b) as f64);
    let mut plot4 = |x: i64, y: i64| {
        set_ink(img, cx + x, cy + y);
        set_ink(img, cx - x, cy + y);
        set_ink(img, cx + x, cy - y);
        set_ink(img, cx - x, cy - y);
    };
    let (mut x, mut y) = (0i64, b);
    let mut d1 = b2 - a2 * b as f64 + 0.25 * a2;
    let mut dx = 2.0 * b2 * x as f64;
    let mut dy = 2.0 * a2 * y as f64;
    while dx < dy {
        plot4(x, y);
        if d1 < 0.0 {
            x += 1;
            dx += 2.0 * b2;
            d1 += dx + b2;
        } else {
            x += 1;
            y -= 1;
            dx += 2.0 * b2;
            dy -= 2.0 * a2;
            d1 += dx - dy + b2;
        }
    }
    let mut d2 = b2 * (x as f64 + 0.5).powi(2) + a2 * (y as f64 - 1.0).powi(2) - a2 * b2;
    while y >= 0 {
        plot4(x, y);
        if d2 > 0.0 {
            y -= 1;
            dy -= 2.0 * a2;
            d2 += a2 - dy;
        } else {
            y -= 1;
            x += 1;
            dx += 2.0 * b2;
            dy -= 2.0 * a2;
            d2 += dx - dy + a2;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn draw_connectors(
    img: &mut Raster,
    nodes: &[ChartNode],
    parent: usize,
    kids: &[usize],
    level_offset: &[u32],
    layout: LayoutKind,
    stroke: u32,
    junctions: &mut Vec<JunctionTruth>,
) {
    let p = &nodes[parent];
    let child_level = (p.level + 1) as usize;
    let child_start = i64::from(level_offset[child_level]);
    let bar_m = child_start - i64::from(LEVEL_GAP) / 2;
    let parent_end = i64::from(p.main) + i64::from(p.main_extent(layout));
    let pc = i64::from(p.cross) + i64::from(p.cross_extent(layout)) / 2;
    let centers: Vec<i64> = kids
        .iter()
        .map(|&c| i64::from(nodes[c].cross) + i64::from(nodes[c].cross_extent(layout)) / 2)
        .collect();

    let to_xy = |c: i64, m: i64| -> (u32, u32) {
        match layout {
            LayoutKind::TopDown => (c as u32, m as u32),
            LayoutKind::LeftRooted => (m as u32, c as u32),
        }
    };
    let mut push_junction = |c: i64, m: i64, kind: JunctionKind| {
        let (x, y) = to_xy(c, m);
        junctions.push(JunctionTruth { x, y, kind });
    };

    if kids.len() == 1 && centers[0] == pc {
        // Straight shot, no junctions.
        line_main(img, layout, pc, parent_end + 1, child_start - 2, stroke);
        return;
    }

    let bar_lo = *centers.iter().min().expect("nonempty").min(&pc);
    let bar_hi = *centers.iter().max().expect("nonempty").max(&pc);
    line_main(img, layout, pc, parent_end + 1, bar_m, stroke);
    line_cross(img, layout, bar_m, bar_lo, bar_hi, stroke);
    for &c in centers.iter() {
        line_main(img, layout, c, bar_m, child_start - 2, stroke);
    }

    // Junction kinds fall out of the arm count at each joint.
    let trunk_arms = 1 // the trunk itself
        + usize::from(centers.contains(&pc))
        + usize::from(bar_lo < pc)
        + usize::from(bar_hi > pc);
    let kind = match trunk_arms {
        4 => JunctionKind::Cross,
        3 => JunctionKind::T,
        _ => JunctionKind::L,
    };
    push_junction(pc, bar_m, kind);
    for &c in centers.iter() {
        if c == pc {
            continue; // covered by the trunk joint
        }
        let arms = 1 + usize::from(bar_lo < c) + usize::from(bar_hi > c);
        let kind = match arms {
            3 => JunctionKind::T,
            _ => JunctionKind::L,
        };
        push_junction(c, bar_m, kind);
    }
}

/// Applies noise deterministically. `Noise::None` and sigma 0 return the
/// input unchanged.
pub fn perturb(img: &Raster, noise: &Noise, seed: u64) -> Result<Raster> {
    match *noise {
        Noise::None => Ok(img.clone()),
        Noise::Gaussian { sigma } => {
            if sigma < 0.0 {
                return Err(Error::NegativeSigma(sigma));
            }
            if sigma == 0.0 {
                return Ok(img.clone());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = rand_distr::Normal::new(0.0f64, sigma)
                .map_err(|_| Error::NegativeSigma(sigma))?;
            let data: Vec<u8> = img
                .data()
                .iter()
                .map(|&v| {
                    let n: f64 = rng.sample(normal);
                    (f64::from(v) + n).round().clamp(0.0, 255.0) as u8
                })
                .collect();
            Raster::new(img.width(), img.height(), img.channels(), data)
        }
        Noise::BackgroundGradient { lo, hi } => {
            if img.channels() != 1 {
                return Err(Error::UnsupportedChannels(img.channels()));
            }
            let w = img.width();
            let span = f64::from(hi) - f64::from(lo);
            let mut out = img.clone();
            for y in 0..img.height() {
                for x in 0..w {
                    let v = img.get(x, y);
                    if v > 127 {
                        let ramp = f64::from(lo)
                            + span * f64::from(x) / f64::from(w.saturating_sub(1).max(1));
                        out.set_gray(x, y, ramp.round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
            Ok(out)
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TruthNode {
    id: u32,
    parent_id: Option<u32>,
    text: String,
    level: u32,
    bbox: [u32; 4],
}

#[derive(Serialize, Deserialize)]
struct TruthDoc {
    root_id: u32,
    nodes: Vec<TruthNode>,
    junctions: Vec<JunctionTruth>,
    ink_pixels: u64,
}

/// Truth file encoding: the tabular graph schema extended with the
/// junction list and ink count. Canonical bytes: sorted keys, LF,
/// trailing newline.
pub fn truth_to_json(truth: &GroundTruth) -> Result<String> {
    let rows = crate::model::to_table(&truth.graph)?;
    let doc = TruthDoc {
        root_id: truth.graph.root_id,
        nodes: rows
            .iter()
            .map(|r| TruthNode {
                id: r.node_id,
                parent_id: r.parent_id,
                text: r.text.clone(),
                level: r.level,
                bbox: [r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2],
            })
            .collect(),
        junctions: truth.junctions.clone(),
        ink_pixels: truth.ink_pixels,
    };
    let value = serde_json::to_value(&doc)?;
    let mut out = serde_json::to_string_pretty(&value)?;
    out.push('\n');
    Ok(out)
}

pub fn truth_from_json(s: &str) -> Result<GroundTruth> {
    let doc: TruthDoc = serde_json::from_str(s)?;
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
    Ok(GroundTruth {
        graph: OrgGraph::from_nodes(nodes, doc.root_id),
        junctions: doc.junctions,
        ink_pixels: doc.ink_pixels,
    })
}

/// Writes `<prefix>.png`, `<prefix>.truth.json`, and `<prefix>.ink.png`
/// (the clean binary ink map, which threshold comparison scores against).
pub fn write_chart(prefix: &Path, img: &Raster, truth: &GroundTruth, clean: &Raster) -> Result<()> {
    let png = prefix.with_extension("png");
    let truth_path = prefix.with_extension("truth.json");
    let ink_path = prefix.with_extension("ink.png");
    img.save_png(&png)?;
    std::fs::write(&truth_path, truth_to_json(truth)?)?;
    let ink = crate::imaging::binarize(clean, 127)?;
    ink.save_png(&ink_path)?;
    Ok(())
}

/// Generates and writes a chart in one step, returning the paths written.
pub fn generate_files(spec: &GenSpec, prefix: &Path) -> Result<(Raster, GroundTruth)> {
    let clean_spec = GenSpec {
        noise: Noise::None,
        ..spec.clone()
    };
    let (clean, _) = generate(&clean_spec)?;
    let (img, truth) = generate(spec)?;
    write_chart(prefix, &img, &truth, &clean)?;
    Ok((img, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::SeniorityCorpus;

    #[test]
    fn single_node_chart() {
        let spec = GenSpec {
            node_count: 1,
            seed: 3,
            ..GenSpec::default()
        };
        let (img, truth) = generate(&spec).unwrap();
        assert_eq!(truth.graph.nodes.len(), 1);
        assert_eq!(truth.graph.nodes[0].level, 0);
        assert!(truth.junctions.is_empty());
        assert!(truth.ink_pixels > 0);
        assert_eq!(img.width(), 1024);
    }

    #[test]
    fn determinism_byte_identical() {
        let spec = GenSpec {
            node_count: 12,
            seed: 99,
            noise: Noise::Gaussian { sigma: 6.0 },
            ..GenSpec::default()
        };
        let (a_img, a_truth) = generate(&spec).unwrap();
        let (b_img, b_truth) = generate(&spec).unwrap();
        assert_eq!(a_img, b_img);
        assert_eq!(a_truth, b_truth);
        assert_eq!(
            truth_to_json(&a_truth).unwrap(),
            truth_to_json(&b_truth).unwrap()
        );
    }

    #[test]
    fn tree_shape_respects_limits() {
        let spec = GenSpec {
            node_count: 10,
            max_children: 3,
            max_depth: 4,
            seed: 5,
            ..GenSpec::default()
        };
        let (_, truth) = generate(&spec).unwrap();
        let g = &truth.graph;
        assert_eq!(g.nodes.len(), 10);
        assert_eq!(g.edges.len(), 9);
        assert!(g.nodes.iter().all(|n| n.level <= 4));
        for n in &g.nodes {
            let kids = g.edges.iter().filter(|&&(p, _)| p == n.id).count();
            assert!(kids <= 3);
        }
        assert!(crate::model::validate(g).is_empty());
    }

    #[test]
    fn titles_strictly_decrease_down_paths() {
        let corpus = SeniorityCorpus::builtin();
        for seed in 0..10u64 {
            let spec = GenSpec {
                node_count: 20,
                max_depth: 5,
                seed,
                ..GenSpec::default()
            };
            let (_, truth) = generate(&spec).unwrap();
            let g = &truth.graph;
            for n in &g.nodes {
                if let Some(pid) = n.parent_id {
                    let p = g.node(pid).unwrap();
                    let ns = corpus.score_title(&n.text).unwrap().0;
                    let ps = corpus.score_title(&p.text).unwrap().0;
                    assert!(
                        ps > ns,
                        "parent {:?} ({ps}) not above child {:?} ({ns})",
                        p.text,
                        n.text
                    );
                }
            }
        }
    }

    #[test]
    fn titles_unique_per_chart() {
        let spec = GenSpec {
            node_count: 50,
            max_depth: 6,
            max_children: 4,
            canvas_width: 4000,
            canvas_height: 2000,
            seed: 8,
            ..GenSpec::default()
        };
        let (_, truth) = generate(&spec).unwrap();
        let mut texts: Vec<&str> = truth.graph.nodes.iter().map(|n| n.text.as_str()).collect();
        texts.sort_unstable();
        let before = texts.len();
        texts.dedup();
        assert_eq!(before, texts.len());
    }

    #[test]
    fn band_scores_strictly_ordered_in_corpus() {
        let corpus = SeniorityCorpus::builtin();
        let mut prev_min = f64::INFINITY;
        for band in TITLE_BANDS {
            let scores: Vec<f64> = band
                .iter()
                .map(|t| {
                    corpus
                        .score_of(t)
                        .unwrap_or_else(|| panic!("{t} missing from corpus"))
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::MIN, f64::max);
            let min = scores.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                max < prev_min,
                "band max {max} not below previous band min {prev_min}"
            );
            prev_min = min;
        }
    }

    #[test]
    fn longest_corpus_match_is_own_title() {
        let corpus = SeniorityCorpus::builtin();
        for band in TITLE_BANDS {
            for t in band {
                let (score, entry) = corpus.score_title(t).unwrap();
                assert_eq!(entry, *t, "{t} resolved to {entry}");
                assert!((score - corpus.score_of(t).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn perturb_identity_cases() {
        let spec = GenSpec {
            node_count: 5,
            seed: 2,
            ..GenSpec::default()
        };
        let (img, _) = generate(&spec).unwrap();
        let same = perturb(&img, &Noise::Gaussian { sigma: 0.0 }, 1).unwrap();
        assert_eq!(img, same);
        let same = perturb(&img, &Noise::None, 1).unwrap();
        assert_eq!(img, same);
        assert!(matches!(
            perturb(&img, &Noise::Gaussian { sigma: -1.0 }, 1),
            Err(Error::NegativeSigma(_))
        ));
    }

    #[test]
    fn gradient_preserves_ink() {
        let spec = GenSpec {
            node_count: 8,
            seed: 4,
            ..GenSpec::default()
        };
        let (img, truth) = generate(&spec).unwrap();
        let noisy = perturb(&img, &Noise::BackgroundGradient { lo: 80, hi: 180 }, 1).unwrap();
        let ink_before: Vec<usize> = img
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0)
            .map(|(i, _)| i)
            .collect();
        let ink_after: Vec<usize> = noisy
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(ink_before, ink_after);
        assert_eq!(ink_before.len() as u64, truth.ink_pixels);
        // Background became the ramp.
        assert!(noisy.data().iter().all(|&v| v == 0 || (80..=180).contains(&v)));
    }

    #[test]
    fn gaussian_determinism() {
        let spec = GenSpec {
            node_count: 6,
            seed: 11,
            ..GenSpec::default()
        };
        let (img, _) = generate(&spec).unwrap();
        let a = perturb(&img, &Noise::Gaussian { sigma: 10.0 }, 7).unwrap();
        let b = perturb(&img, &Noise::Gaussian { sigma: 10.0 }, 7).unwrap();
        assert_eq!(a, b);
        let c = perturb(&img, &Noise::Gaussian { sigma: 10.0 }, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn truth_json_round_trip() {
        let spec = GenSpec {
            node_count: 9,
            seed: 21,
            ..GenSpec::default()
        };
        let (_, truth) = generate(&spec).unwrap();
        let json = truth_to_json(&truth).unwrap();
        let back = truth_from_json(&json).unwrap();
        assert_eq!(back, truth);
        // The table schema is embedded: the model parser reads it too.
        let graph = crate::model::graph_from_json(&json).unwrap();
        assert_eq!(graph, truth.graph);
    }

    #[test]
    fn layout_overflow_names_dimension() {
        let spec = GenSpec {
            node_count: 30,
            max_children: 6,
            max_depth: 2,
            canvas_width: 300,
            canvas_height: 768,
            seed: 1,
            ..GenSpec::default()
        };
        match generate(&spec) {
            Err(Error::LayoutOverflow { dimension, .. }) => assert_eq!(dimension, "width"),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn left_rooted_root_not_topmost() {
        let spec = GenSpec {
            node_count: 7,
            layout: LayoutKind::LeftRooted,
            seed: 13,
            shapes: vec![Shape::Rectangle],
            ..GenSpec::default()
        };
        let (_, truth) = generate(&spec).unwrap();
        let root = truth.graph.node(truth.graph.root_id).unwrap();
        let topmost = truth.graph.nodes.iter().map(|n| n.bbox.y1).min().unwrap();
        assert!(
            root.bbox.y1 > topmost,
            "root should sit mid-column, got y1={} topmost={topmost}",
            root.bbox.y1
        );
    }

    #[test]
    fn junction_kinds_present() {
        // Three children, middle one centered under the parent: cross at
        // the trunk, T at none (middle covered), L at the two ends.
        let spec = GenSpec {
            node_count: 4,
            max_children: 3,
            max_depth: 1,
            seed: 17,
            shapes: vec![Shape::Rectangle],
            ..GenSpec::default()
        };
        let (_, truth) = generate(&spec).unwrap();
        let kinds: Vec<JunctionKind> = truth.junctions.iter().map(|j| j.kind).collect();
        assert!(kinds.contains(&JunctionKind::Cross), "{kinds:?}");
        assert!(kinds.contains(&JunctionKind::L), "{kinds:?}");
    }
}
