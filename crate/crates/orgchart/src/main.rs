//! Command-line front end: generate / extract / evaluate / batch /
//! compare-thresholds. Exit codes: 0 success, 1 i/o or usage errors,
//! 2 validation or extraction failures.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use orgchart::config::{parse_text_provider, PipelineConfig};
use orgchart::error::Error;
use orgchart::evalmetrics::report_to_json;
use orgchart::imaging::{BinaryMask, Raster};
use orgchart::pipeline;
use orgchart::structure::Shape;
use orgchart::synthgen::{self, GenSpec, LayoutKind, Noise};

#[derive(Parser)]
#[command(
    name = "orgchart",
    version,
    about = "Extract tabular hierarchies from org-chart images; generate and evaluate synthetic charts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Pipeline config file (falls back to $ORGCHART_CONFIG).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (defaults next to the input).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seniority corpus file, "title<TAB>score" per line.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Text provider: sidecar | external:<cmd>.
    #[arg(long)]
    text_provider: Option<String>,
    /// Extra config overrides, key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic chart: <prefix>.png, <prefix>.truth.json,
    /// <prefix>.ink.png.
    Generate {
        /// Output path prefix (extension ignored).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        nodes: u32,
        #[arg(long, default_value_t = 4)]
        max_depth: u32,
        #[arg(long, default_value_t = 3)]
        max_children: u32,
        /// top_down | left_rooted
        #[arg(long, default_value = "top_down")]
        layout: String,
        /// Comma-separated subset of rectangle,square,ellipse.
        #[arg(long, default_value = "rectangle,square,ellipse")]
        shapes: String,
        #[arg(long, default_value_t = 1)]
        stroke: u32,
        /// Canvas as WxH.
        #[arg(long, default_value = "1024x768")]
        canvas: String,
        /// none | gaussian:<sigma> | gradient:<lo>,<hi>
        #[arg(long, default_value = "none")]
        noise: String,
    },
    /// Extract a hierarchy table from a chart image.
    Extract {
        image: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate a predicted table against ground truth.
    Evaluate {
        gt: PathBuf,
        pred: PathBuf,
        /// Also compute the exact graph edit distance (small graphs only).
        #[arg(long)]
        ged: bool,
        /// Report path (default: <pred>.eval.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract and evaluate every image/truth pair in a directory.
    Batch {
        dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Produce the four threshold-strategy masks and score them against
    /// the ink map when available.
    CompareThresholds {
        image: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn build_config(common: &CommonOpts) -> anyhow::Result<PipelineConfig> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os("ORGCHART_CONFIG").map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => PipelineConfig::from_file(&p)
            .with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(c) = &common.corpus {
        cfg.corpus_path = Some(c.clone());
    }
    if let Some(tp) = &common.text_provider {
        cfg.text_provider = parse_text_provider(tp)?;
    }
    if let Some(d) = &common.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects key=value, got {kv:?}"))?;
        cfg.apply(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

fn parse_layout(s: &str) -> anyhow::Result<LayoutKind> {
    match s.replace('-', "_").as_str() {
        "top_down" => Ok(LayoutKind::TopDown),
        "left_rooted" => Ok(LayoutKind::LeftRooted),
        other => anyhow::bail!("unknown layout {other:?}"),
    }
}

fn parse_shapes(s: &str) -> anyhow::Result<Vec<Shape>> {
    s.split(',')
        .map(|p| match p.trim() {
            "rectangle" | "rect" => Ok(Shape::Rectangle),
            "square" => Ok(Shape::Square),
            "ellipse" => Ok(Shape::Ellipse),
            other => anyhow::bail!("unknown shape {other:?}"),
        })
        .collect()
}

fn parse_canvas(s: &str) -> anyhow::Result<(u32, u32)> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| anyhow::anyhow!("canvas must be WxH, got {s:?}"))?;
    Ok((w.parse()?, h.parse()?))
}

fn parse_noise(s: &str) -> anyhow::Result<Noise> {
    if s == "none" {
        return Ok(Noise::None);
    }
    if let Some(sigma) = s.strip_prefix("gaussian:") {
        return Ok(Noise::Gaussian {
            sigma: sigma.parse()?,
        });
    }
    if let Some(range) = s.strip_prefix("gradient:") {
        let (lo, hi) = range
            .split_once(',')
            .ok_or_else(|| anyhow::anyhow!("gradient needs lo,hi"))?;
        return Ok(Noise::BackgroundGradient {
            lo: lo.parse()?,
            hi: hi.parse()?,
        });
    }
    anyhow::bail!("unknown noise spec {s:?}")
}

fn ink_map_for(image: &Path) -> Option<BinaryMask> {
    let ink_path = image.with_extension("ink.png");
    if !ink_path.exists() {
        return None;
    }
    let raster = Raster::load_png(&ink_path).ok()?;
    let gray = orgchart::imaging::grayscale(&raster).ok()?;
    orgchart::imaging::binarize(&gray, 127).ok()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate {
            out,
            seed,
            nodes,
            max_depth,
            max_children,
            layout,
            shapes,
            stroke,
            canvas,
            noise,
        } => {
            let (canvas_width, canvas_height) = parse_canvas(&canvas)?;
            let spec = GenSpec {
                node_count: nodes,
                max_depth,
                max_children,
                shapes: parse_shapes(&shapes)?,
                canvas_width,
                canvas_height,
                stroke_width: stroke,
                layout: parse_layout(&layout)?,
                noise: parse_noise(&noise)?,
                seed,
            };
            if let Some(dir) = out.parent() {
                if !dir.as_os_str().is_empty() {
                    std::fs::create_dir_all(dir)?;
                }
            }
            let (_, truth) = synthgen::generate_files(&spec, &out)?;
            println!(
                "wrote {}.png ({} nodes, {} junctions, {} ink px)",
                out.display(),
                truth.graph.nodes.len(),
                truth.junctions.len(),
                truth.ink_pixels
            );
        }
        Command::Extract { image, common } => {
            let cfg = build_config(&common)?;
            let (out, files) = pipeline::extract_to_files(&image, &cfg)?;
            println!(
                "extracted {} nodes, {} edges -> {}",
                out.graph.nodes.len(),
                out.graph.edges.len(),
                files.table_json.display()
            );
            if !out.diagnostics.is_empty() {
                eprintln!(
                    "{} diagnostic(s), see {}",
                    out.diagnostics.len(),
                    files.diagnostics_json.display()
                );
            }
        }
        Command::Evaluate { gt, pred, ged, out } => {
            let report = pipeline::evaluate_files(&gt, &pred, ged)?;
            let out_path = out.unwrap_or_else(|| pred.with_extension("eval.json"));
            pipeline::write_atomic(&out_path, report_to_json(&report)?.as_bytes())?;
            println!(
                "n={} N_S={:.6} S_A={:.6} T_S={:.6}",
                report.n, report.node_similarity, report.structural_accuracy, report.total_score
            );
        }
        Command::Batch { dir, common } => {
            let cfg = build_config(&common)?;
            let summary = pipeline::batch(&dir, &cfg)?;
            let out_dir = cfg.out_dir.clone().unwrap_or_else(|| dir.clone());
            std::fs::create_dir_all(&out_dir)?;
            let csv_path = out_dir.join("summary.csv");
            pipeline::write_atomic(&csv_path, pipeline::batch_csv(&summary)?.as_bytes())?;
            for row in summary.rows.iter().filter(|r| r.status == "aggregate") {
                println!(
                    "{}: N_S={:.6} S_A={:.6} T_S={:.6}",
                    row.file,
                    row.node_similarity.unwrap_or(0.0),
                    row.structural_accuracy.unwrap_or(0.0),
                    row.total_score.unwrap_or(0.0)
                );
            }
            println!(
                "{} ok, {} failed -> {}",
                summary.ok,
                summary.failed,
                csv_path.display()
            );
            if summary.ok == 0 {
                anyhow::bail!("every image in the batch failed");
            }
        }
        Command::CompareThresholds { image, common } => {
            let cfg = build_config(&common)?;
            let raster = Raster::load_png(&image)?;
            let ink = ink_map_for(&image);
            let cmp = pipeline::compare_thresholds(&raster, &cfg, ink.as_ref())?;
            let stem = image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            let dir = cfg
                .out_dir
                .clone()
                .unwrap_or_else(|| image.parent().unwrap_or(Path::new(".")).to_path_buf());
            std::fs::create_dir_all(&dir)?;
            for (name, mask) in &cmp.masks {
                mask.save_png(&dir.join(format!("{stem}.{name}.png")))?;
            }
            let value = serde_json::json!({ "strategies": cmp.reports });
            let value = serde_json::to_value(value)?;
            let mut json = serde_json::to_string_pretty(&value)?;
            json.push('\n');
            pipeline::write_atomic(&dir.join(format!("{stem}.thresholds.json")), json.as_bytes())?;
            for r in &cmp.reports {
                match r.score {
                    Some(s) => println!(
                        "{:>14}: t={:>3} fg={:>7} P={:.4} R={:.4} F1={:.4}",
                        r.strategy,
                        r.threshold.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
                        r.foreground_pixels,
                        s.precision,
                        s.recall,
                        s.f1
                    ),
                    None => println!(
                        "{:>14}: t={:>3} fg={:>7} (no ink map, metrics omitted)",
                        r.strategy,
                        r.threshold.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
                        r.foreground_pixels
                    ),
                }
            }
        }
    }
    Ok(())
}

/// Validation and extraction failures exit 2; plain i/o and usage exit 1.
fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::NoNodes
            | Error::InvalidGraph(_)
            | Error::EmptyTable
            | Error::EmptyGroundTruth
            | Error::TextProvider { .. }
            | Error::LayoutOverflow { .. }
            | Error::BadGenSpec(_)
            | Error::GedBound { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(exit_code(&e));
    }
}
