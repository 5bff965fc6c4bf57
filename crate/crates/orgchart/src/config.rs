//! Pipeline configuration: one flat key=value file plus per-key overrides.
//! Every field has a default; unknown keys are rejected so typos fail
//! loudly instead of silently running defaults.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::{CornerParams, Detector};
use crate::imaging::AdaptiveMode;
use crate::textmap::TextProvider;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Thresholding {
    /// Fixed global threshold (`global_threshold`).
    Global,
    Adaptive,
    /// Whole-image Otsu.
    Otsu,
    /// Otsu over windows pooled around detected junction points; falls
    /// back to whole-image Otsu when no junctions exist.
    JunctionOtsu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub thresholding: Thresholding,
    pub global_threshold: u8,
    pub adaptive_window: u32,
    pub adaptive_c: f64,
    pub adaptive_mode: AdaptiveMode,
    pub detector: Detector,
    pub harris_k: f64,
    pub corner_quality: f64,
    pub corner_min_distance: f64,
    pub corner_window: u32,
    pub corner_sigma: f64,
    pub junction_filter_window: u32,
    pub junction_otsu_window: u32,
    pub min_node_area: u64,
    pub max_fill_gap: u32,
    pub roi_radius: u32,
    pub refine_bboxes: bool,
    pub corpus_path: Option<PathBuf>,
    pub text_provider: TextProvider,
    pub out_dir: Option<PathBuf>,
    /// Detector injection: JSON list of bboxes replacing node detection.
    pub nodes_file: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            thresholding: Thresholding::JunctionOtsu,
            global_threshold: 128,
            adaptive_window: 11,
            adaptive_c: 5.0,
            adaptive_mode: AdaptiveMode::Mean,
            detector: Detector::ShiTomasi,
            harris_k: 0.04,
            corner_quality: 0.01,
            corner_min_distance: 7.0,
            corner_window: 5,
            corner_sigma: 1.0,
            junction_filter_window: 15,
            junction_otsu_window: 31,
            min_node_area: 400,
            max_fill_gap: 2,
            roi_radius: 5,
            refine_bboxes: true,
            corpus_path: None,
            text_provider: TextProvider::Sidecar,
            out_dir: None,
            nodes_file: None,
        }
    }
}

impl PipelineConfig {
    pub fn corner_params(&self) -> CornerParams {
        CornerParams {
            k: self.harris_k,
            quality: self.corner_quality,
            min_distance: self.corner_min_distance,
            window: self.corner_window,
            sigma: self.corner_sigma,
        }
    }

    /// Parses a flat config file: `key = value` lines, `#` comments.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let text = std::fs::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    /// Sets one field by key. Same keys as the config file.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse::<T>()
                .map_err(|e| Error::Config(format!("{key}: {e}")))
        }
        match key {
            "thresholding" => {
                self.thresholding = match value {
                    "global" => Thresholding::Global,
                    "adaptive" => Thresholding::Adaptive,
                    "otsu" => Thresholding::Otsu,
                    "junction_otsu" => Thresholding::JunctionOtsu,
                    other => {
                        return Err(Error::Config(format!(
                            "thresholding: unknown strategy {other:?}"
                        )))
                    }
                }
            }
            "global_threshold" => self.global_threshold = num(key, value)?,
            "adaptive_window" => self.adaptive_window = num(key, value)?,
            "adaptive_c" => self.adaptive_c = num(key, value)?,
            "adaptive_mode" => {
                self.adaptive_mode = match value {
                    "mean" => AdaptiveMode::Mean,
                    "gaussian" => AdaptiveMode::Gaussian,
                    other => {
                        return Err(Error::Config(format!("adaptive_mode: unknown {other:?}")))
                    }
                }
            }
            "detector" => {
                self.detector = match value {
                    "harris" => Detector::Harris,
                    "shi_tomasi" => Detector::ShiTomasi,
                    other => return Err(Error::Config(format!("detector: unknown {other:?}"))),
                }
            }
            "harris_k" => self.harris_k = num(key, value)?,
            "corner_quality" => self.corner_quality = num(key, value)?,
            "corner_min_distance" => self.corner_min_distance = num(key, value)?,
            "corner_window" => self.corner_window = num(key, value)?,
            "corner_sigma" => self.corner_sigma = num(key, value)?,
            "junction_filter_window" => self.junction_filter_window = num(key, value)?,
            "junction_otsu_window" => self.junction_otsu_window = num(key, value)?,
            "min_node_area" => self.min_node_area = num(key, value)?,
            "max_fill_gap" => self.max_fill_gap = num(key, value)?,
            "roi_radius" => self.roi_radius = num(key, value)?,
            "refine_bboxes" => {
                self.refine_bboxes = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => {
                        return Err(Error::Config(format!("refine_bboxes: not a bool {other:?}")))
                    }
                }
            }
            "corpus" | "corpus_path" => self.corpus_path = Some(PathBuf::from(value)),
            "text_provider" => self.text_provider = parse_text_provider(value)?,
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "nodes_file" => self.nodes_file = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

/// `sidecar` or `external:<command line>`.
pub fn parse_text_provider(value: &str) -> Result<TextProvider> {
    if value == "sidecar" {
        return Ok(TextProvider::Sidecar);
    }
    if let Some(cmd) = value.strip_prefix("external:") {
        let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
        if parts.is_empty() {
            return Err(Error::Config("external text provider needs a command".into()));
        }
        return Ok(TextProvider::ExternalCommand(parts));
    }
    Err(Error::Config(format!(
        "text_provider: expected sidecar or external:<cmd>, got {value:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_are_stable() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.thresholding, Thresholding::JunctionOtsu);
        assert_eq!(cfg.detector, Detector::ShiTomasi);
        assert_eq!(cfg.global_threshold, 128);
        assert_eq!(cfg.junction_otsu_window, 31);
    }

    #[test]
    fn file_round_trip_and_unknown_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.cfg");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment").unwrap();
        writeln!(f, "thresholding = otsu").unwrap();
        writeln!(f, "corner_quality = 0.02").unwrap();
        writeln!(f, "detector = harris").unwrap();
        drop(f);
        let cfg = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(cfg.thresholding, Thresholding::Otsu);
        assert_eq!(cfg.detector, Detector::Harris);
        assert!((cfg.corner_quality - 0.02).abs() < 1e-12);

        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "no_such_key = 1").unwrap();
        drop(f);
        assert!(matches!(
            PipelineConfig::from_file(&path),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn text_provider_parsing() {
        assert_eq!(parse_text_provider("sidecar").unwrap(), TextProvider::Sidecar);
        match parse_text_provider("external:ocr --fast").unwrap() {
            TextProvider::ExternalCommand(parts) => {
                assert_eq!(parts, vec!["ocr".to_string(), "--fast".to_string()])
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_text_provider("magic").is_err());
    }
}
