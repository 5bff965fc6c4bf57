//! Orchestration of the extraction stages and the batch/compare drivers.
//!
//! Extraction runs two binarization passes: a provisional whole-image
//! Otsu mask localizes nodes and corner points, then the configured
//! strategy (junction-window Otsu by default) rebuilds the mask the
//! traversal actually walks. That resolves the circularity between
//! needing junction points for a good threshold and needing a mask to
//! find junction points.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, Thresholding};
use crate::error::{Diagnostic, Error, Result};
use crate::evalmetrics::{evaluate_graphs, EvalReport};
use crate::features::ResponseMap;
use crate::imaging::{
    adaptive_threshold, binarize, grayscale, junction_window_otsu, otsu_threshold, BinaryMask,
    Histogram, Raster,
};
use crate::model::{graph_from_json, table_to_csv, table_to_json, BBox, OrgGraph};
use crate::structure::{
    classify_points, detect_nodes, select_root, traverse, ClassifiedPoint, DetectedNode,
    PointKind, SeniorityCorpus, Shape, TraversalStats,
};
use crate::textmap::{assign_text, recognize, TextBox};

#[derive(Debug)]
pub struct ExtractOutput {
    pub graph: OrgGraph,
    pub diagnostics: Vec<Diagnostic>,
    pub stats: TraversalStats,
    /// Threshold of the provisional whole-image Otsu pass.
    pub provisional_threshold: u8,
    /// Threshold the final mask was built with (None for adaptive).
    pub final_threshold: Option<u8>,
}

fn load_corpus(cfg: &PipelineConfig) -> Result<SeniorityCorpus> {
    match &cfg.corpus_path {
        Some(p) => SeniorityCorpus::load(p),
        None => Ok(SeniorityCorpus::builtin()),
    }
}

fn injected_nodes(path: &Path, mask: &BinaryMask) -> Result<Vec<DetectedNode>> {
    let raw = std::fs::read_to_string(path)?;
    let boxes: Vec<[u32; 4]> = serde_json::from_str(&raw)?;
    let mut nodes = Vec::with_capacity(boxes.len());
    for b in boxes {
        let bbox = BBox::new(b[0], b[1], b[2], b[3])?;
        let mut fg = 0u64;
        for y in bbox.y1..bbox.y2.min(mask.height()) {
            for x in bbox.x1..bbox.x2.min(mask.width()) {
                if mask.is_foreground(x, y) {
                    fg += 1;
                }
            }
        }
        nodes.push(DetectedNode {
            bbox,
            shape: Shape::Unknown,
            fill_ratio: fg as f64 / bbox.area() as f64,
        });
    }
    nodes.sort_by_key(|n| (n.bbox.y1, n.bbox.x1, n.bbox.x2, n.bbox.y2));
    Ok(nodes)
}

/// Runs the full extraction on an image file.
pub fn extract_image(image: &Path, cfg: &PipelineConfig) -> Result<ExtractOutput> {
    let raster = Raster::load_png(image)?;
    let boxes = recognize(image, &cfg.text_provider)?;
    extract_raster(&raster, &boxes, cfg)
}

/// Extraction core over an in-memory raster and pre-recognized text
/// boxes; `extract_image` and the tests share it.
pub fn extract_raster(
    raster: &Raster,
    text_boxes: &[TextBox],
    cfg: &PipelineConfig,
) -> Result<ExtractOutput> {
    let gray = grayscale(raster)?;
    let corpus = load_corpus(cfg)?;
    let mut diagnostics: Vec<Diagnostic> = Vec::new();

    // Provisional pass: whole-image Otsu for node and corner detection.
    let provisional = otsu_threshold(&Histogram::from_gray(&gray)?)?;
    let mask0 = binarize(&gray, provisional.t)?;

    let mut nodes = match &cfg.nodes_file {
        Some(p) => injected_nodes(p, &mask0)?,
        None => detect_nodes(&mask0, cfg.min_node_area, cfg.max_fill_gap),
    };
    if nodes.is_empty() {
        return Err(Error::NoNodes);
    }

    let params = cfg.corner_params();
    let map = ResponseMap::compute(&gray, &params, cfg.detector)?;
    let corners = map.good_features(&params);

    if cfg.refine_bboxes {
        for n in &mut nodes {
            let (refined, warn) = map.refine_bbox(n.bbox, cfg.roi_radius, params.quality);
            n.bbox = refined;
            diagnostics.extend(warn);
        }
    }

    let points = classify_points(&corners, &nodes, &mask0, cfg.junction_filter_window);

    // Final mask for the traversal.
    let (mask, final_threshold) = match cfg.thresholding {
        Thresholding::Global => (
            binarize(&gray, cfg.global_threshold)?,
            Some(cfg.global_threshold),
        ),
        Thresholding::Adaptive => (
            adaptive_threshold(&gray, cfg.adaptive_window, cfg.adaptive_c, cfg.adaptive_mode)?,
            None,
        ),
        Thresholding::Otsu => (mask0.clone(), Some(provisional.t)),
        Thresholding::JunctionOtsu => {
            let junctions: Vec<(u32, u32)> = points
                .iter()
                .filter(|p| p.kind == PointKind::JunctionPoint)
                .map(|p| (p.x, p.y))
                .collect();
            match junction_window_otsu(&gray, &junctions, cfg.junction_otsu_window) {
                Ok(r) => (binarize(&gray, r.t)?, Some(r.t)),
                Err(Error::NoJunctionPoints) => (mask0.clone(), Some(provisional.t)),
                Err(e) => return Err(e),
            }
        }
    };

    let (texts, text_diags) = assign_text(text_boxes, &nodes);
    diagnostics.extend(text_diags);

    let boxes: Vec<BBox> = nodes.iter().map(|n| n.bbox).collect();
    let (root, root_diag) = select_root(&boxes, &texts, &corpus)?;
    diagnostics.extend(root_diag);

    let (graph, orphan_diags, stats) = traverse(&mask, &nodes, &texts, &points, root)?;
    diagnostics.extend(orphan_diags);
    diagnostics.sort();
    diagnostics.dedup();

    Ok(ExtractOutput {
        graph,
        diagnostics,
        stats,
        provisional_threshold: provisional.t,
        final_threshold,
    })
}

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct DiagnosticsDoc<'a> {
    diagnostics: &'a [Diagnostic],
}

/// File set produced for one extracted image.
pub struct ExtractFiles {
    pub table_json: PathBuf,
    pub table_csv: PathBuf,
    pub diagnostics_json: PathBuf,
}

/// Extracts and writes `<stem>.table.json`, `<stem>.table.csv`, and
/// `<stem>.diagnostics.json` under `out_dir` (image directory when None).
pub fn extract_to_files(image: &Path, cfg: &PipelineConfig) -> Result<(ExtractOutput, ExtractFiles)> {
    let out = extract_image(image, cfg)?;
    let stem = image
        .file_stem()
        .ok_or_else(|| Error::Config(format!("no file stem in {}", image.display())))?
        .to_string_lossy()
        .into_owned();
    let dir = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| image.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir)?;
    let files = ExtractFiles {
        table_json: dir.join(format!("{stem}.table.json")),
        table_csv: dir.join(format!("{stem}.table.csv")),
        diagnostics_json: dir.join(format!("{stem}.diagnostics.json")),
    };
    write_atomic(&files.table_json, table_to_json(&out.graph)?.as_bytes())?;
    write_atomic(&files.table_csv, table_to_csv(&out.graph)?.as_bytes())?;
    let diag_doc = serde_json::to_value(DiagnosticsDoc {
        diagnostics: &out.diagnostics,
    })?;
    let mut diag_json = serde_json::to_string_pretty(&diag_doc)?;
    diag_json.push('\n');
    write_atomic(&files.diagnostics_json, diag_json.as_bytes())?;
    Ok((out, files))
}

/// Loads two table JSON files and evaluates prediction against truth.
pub fn evaluate_files(gt: &Path, pred: &Path, with_ged: bool) -> Result<EvalReport> {
    let gt_graph = graph_from_json(&std::fs::read_to_string(gt)?)?;
    let pred_graph = graph_from_json(&std::fs::read_to_string(pred)?)?;
    evaluate_graphs(&gt_graph, &pred_graph, with_ged)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchRow {
    pub file: String,
    pub status: String,
    pub n: Option<usize>,
    pub node_similarity: Option<f64>,
    pub structural_accuracy: Option<f64>,
    pub total_score: Option<f64>,
}

pub struct BatchSummary {
    pub rows: Vec<BatchRow>,
    pub ok: usize,
    pub failed: usize,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Extracts and evaluates every `<name>.png` + `<name>.truth.json` pair
/// in the directory (parallel across images), then appends mean and
/// median aggregate rows.
pub fn batch(dir: &Path, cfg: &PipelineConfig) -> Result<BatchSummary> {
    let mut images: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.extension().map(|e| e == "png").unwrap_or(false)
                && crate::textmap::sidecar_path(p).exists()
        })
        .collect();
    images.sort();
    if images.is_empty() {
        return Err(Error::Config(format!(
            "no image/truth pairs found in {}",
            dir.display()
        )));
    }

    let mut rows: Vec<BatchRow> = images
        .par_iter()
        .map(|img| {
            let file = img
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            let run = || -> Result<EvalReport> {
                let out = extract_image(img, cfg)?;
                let truth =
                    graph_from_json(&std::fs::read_to_string(crate::textmap::sidecar_path(img))?)?;
                evaluate_graphs(&truth, &out.graph, false)
            };
            match run() {
                Ok(r) => BatchRow {
                    file,
                    status: "ok".into(),
                    n: Some(r.n),
                    node_similarity: Some(r.node_similarity),
                    structural_accuracy: Some(r.structural_accuracy),
                    total_score: Some(r.total_score),
                },
                Err(e) => BatchRow {
                    file,
                    status: format!("error: {e}"),
                    n: None,
                    node_similarity: None,
                    structural_accuracy: None,
                    total_score: None,
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| a.file.cmp(&b.file));

    let ok_rows: Vec<&BatchRow> = rows.iter().filter(|r| r.status == "ok").collect();
    let ok = ok_rows.len();
    let failed = rows.len() - ok;
    if ok > 0 {
        let collect = |f: fn(&BatchRow) -> Option<f64>| -> Vec<f64> {
            ok_rows.iter().filter_map(|r| f(r)).collect()
        };
        let mut ns = collect(|r| r.node_similarity);
        let mut sa = collect(|r| r.structural_accuracy);
        let mut ts = collect(|r| r.total_score);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        rows.push(BatchRow {
            file: "mean".into(),
            status: "aggregate".into(),
            n: None,
            node_similarity: Some(mean(&ns)),
            structural_accuracy: Some(mean(&sa)),
            total_score: Some(mean(&ts)),
        });
        rows.push(BatchRow {
            file: "median".into(),
            status: "aggregate".into(),
            n: None,
            node_similarity: Some(median(&mut ns)),
            structural_accuracy: Some(median(&mut sa)),
            total_score: Some(median(&mut ts)),
        });
    }
    Ok(BatchSummary { rows, ok, failed })
}

pub fn batch_csv(summary: &BatchSummary) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["file", "status", "n", "n_s", "s_a", "t_s"])?;
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in &summary.rows {
        w.write_record([
            r.file.clone(),
            r.status.clone(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            fmt(r.node_similarity),
            fmt(r.structural_accuracy),
            fmt(r.total_score),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Foreground precision/recall/F1 of a mask against an ink map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn score_mask(mask: &BinaryMask, ink: &BinaryMask) -> MaskScore {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            let pred = mask.is_foreground(x, y);
            let truth = ink.is_foreground(x, y);
            match (pred, truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    MaskScore {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub threshold: Option<u8>,
    pub foreground_pixels: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<MaskScore>,
}

pub struct CompareOutput {
    pub reports: Vec<StrategyReport>,
    pub masks: Vec<(String, BinaryMask)>,
}

/// Builds the four §-style comparison masks: fixed 128, adaptive mean,
/// whole-image Otsu, and junction-window Otsu. Scores each against the
/// ink map when one is given.
pub fn compare_thresholds(
    raster: &Raster,
    cfg: &PipelineConfig,
    ink: Option<&BinaryMask>,
) -> Result<CompareOutput> {
    let gray = grayscale(raster)?;

    let fixed = binarize(&gray, 128)?;
    let adaptive = adaptive_threshold(&gray, cfg.adaptive_window, cfg.adaptive_c, cfg.adaptive_mode)?;
    let global = otsu_threshold(&Histogram::from_gray(&gray)?)?;
    let otsu_mask = binarize(&gray, global.t)?;

    // Junction points via the provisional pipeline stages.
    let mask0 = binarize(&gray, global.t)?;
    let nodes = detect_nodes(&mask0, cfg.min_node_area, cfg.max_fill_gap);
    let params = cfg.corner_params();
    let corners = crate::features::good_features(&gray, &params, cfg.detector)?;
    let points = classify_points(&corners, &nodes, &mask0, cfg.junction_filter_window);
    let junctions: Vec<(u32, u32)> = points
        .iter()
        .filter(|p| p.kind == PointKind::JunctionPoint)
        .map(|p| (p.x, p.y))
        .collect();
    let (junction_mask, junction_t) =
        match junction_window_otsu(&gray, &junctions, cfg.junction_otsu_window) {
            Ok(r) => (binarize(&gray, r.t)?, r.t),
            Err(Error::NoJunctionPoints) => (otsu_mask.clone(), global.t),
            Err(e) => return Err(e),
        };

    let entries = [
        ("fixed128".to_string(), fixed, Some(128u8)),
        ("adaptive".to_string(), adaptive, None),
        ("otsu".to_string(), otsu_mask, Some(global.t)),
        ("junction_otsu".to_string(), junction_mask, Some(junction_t)),
    ];
    let mut reports = Vec::new();
    let mut masks = Vec::new();
    for (name, mask, threshold) in entries {
        reports.push(StrategyReport {
            strategy: name.clone(),
            threshold,
            foreground_pixels: mask.foreground_count(),
            score: ink.map(|i| score_mask(&mask, i)),
        });
        masks.push((name, mask));
    }
    Ok(CompareOutput { reports, masks })
}

/// Classified point list for an already-binarized image; exposed for the
/// junction-accuracy checks.
pub fn classify_on_mask(
    gray: &Raster,
    mask: &BinaryMask,
    cfg: &PipelineConfig,
) -> Result<(Vec<DetectedNode>, Vec<ClassifiedPoint>)> {
    let nodes = detect_nodes(mask, cfg.min_node_area, cfg.max_fill_gap);
    let params = cfg.corner_params();
    let corners = crate::features::good_features(gray, &params, cfg.detector)?;
    let points = classify_points(&corners, &nodes, mask, cfg.junction_filter_window);
    Ok((nodes, points))
}
