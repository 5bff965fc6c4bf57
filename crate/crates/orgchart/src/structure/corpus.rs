//! Position-title seniority corpus and corpus-driven root selection.
//!
//! Charts built from the left or right do not put the root on top, so the
//! root is picked by seniority score instead of position: each node's
//! text is scanned for the longest corpus title it contains and the
//! highest-scoring node wins.

use std::path::Path;

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::model::BBox;

/// Map from normalized position title to a seniority score in (0, 1],
/// where 1.0 is the most senior position.
#[derive(Debug, Clone, PartialEq)]
pub struct SeniorityCorpus {
    /// Sorted by descending title length, then descending score, then
    /// title, so the first containment hit is the longest match.
    entries: Vec<(String, f64)>,
}

impl SeniorityCorpus {
    /// Parses "title<TAB>score" lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (title, score) = line.split_once('\t').ok_or_else(|| Error::CorpusParse {
                line: i + 1,
                message: "expected \"title<TAB>score\"".to_string(),
            })?;
            let score: f64 = score.trim().parse().map_err(|e| Error::CorpusParse {
                line: i + 1,
                message: format!("bad score: {e}"),
            })?;
            if !(score > 0.0 && score <= 1.0) {
                return Err(Error::CorpusParse {
                    line: i + 1,
                    message: format!("score {score} outside (0, 1]"),
                });
            }
            let title = normalize(title);
            if title.is_empty() {
                return Err(Error::CorpusParse {
                    line: i + 1,
                    message: "empty title".to_string(),
                });
            }
            entries.push((title, score));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn from_entries(mut entries: Vec<(String, f64)>) -> Self {
        for (t, _) in &mut entries {
            *t = normalize(t);
        }
        entries.sort_by(|a, b| {
            b.0.len()
                .cmp(&a.0.len())
                .then(b.1.partial_cmp(&a.1).expect("finite scores"))
                .then(a.0.cmp(&b.0))
        });
        entries.dedup_by(|a, b| a.0 == b.0);
        Self { entries }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The corpus shipped with the crate (~60 common titles).
    pub fn builtin() -> Self {
        Self::parse(include_str!("../../assets/seniority_corpus.tsv"))
            .expect("bundled corpus parses")
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.entries.iter().map(|(t, s)| (t.as_str(), *s))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_of(&self, title: &str) -> Option<f64> {
        let t = normalize(title);
        self.entries.iter().find(|(e, _)| *e == t).map(|(_, s)| *s)
    }

    /// Score of the longest corpus title contained in the text, or None.
    pub fn score_title(&self, text: &str) -> Option<(f64, &str)> {
        let t = normalize(text);
        if t.is_empty() {
            return None;
        }
        self.entries
            .iter()
            .find(|(e, _)| t.contains(e.as_str()))
            .map(|(e, s)| (*s, e.as_str()))
    }

    /// Uniformly rescales all scores (clamped into (0, 1]). Root selection
    /// is invariant under this.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(t, s)| (t.clone(), (s * factor).min(1.0)))
                .collect(),
        }
    }
}

/// Lowercase, trim, collapse runs of whitespace to single spaces.
pub fn normalize(s: &str) -> String {
    s.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Picks the root: the node whose text matches the highest corpus score;
/// ties break to the topmost (smallest y1) then leftmost box. When no
/// title matches at all, falls back to the topmost node with a
/// diagnostic.
pub fn select_root(
    boxes: &[BBox],
    texts: &[String],
    corpus: &SeniorityCorpus,
) -> Result<(usize, Option<Diagnostic>)> {
    assert_eq!(boxes.len(), texts.len(), "one text per box");
    if boxes.is_empty() {
        return Err(Error::NoNodes);
    }
    let scores: Vec<f64> = texts
        .iter()
        .map(|t| corpus.score_title(t).map(|(s, _)| s).unwrap_or(0.0))
        .collect();
    let by_position =
        |i: usize, j: usize| (boxes[i].y1, boxes[i].x1).cmp(&(boxes[j].y1, boxes[j].x1));

    let best = (0..boxes.len())
        .max_by(|&i, &j| {
            scores[i]
                .partial_cmp(&scores[j])
                .expect("finite scores")
                .then(by_position(j, i)) // lower position wins on ties
        })
        .expect("nonempty");
    if scores[best] > 0.0 {
        return Ok((best, None));
    }
    let topmost = (0..boxes.len())
        .min_by(|&i, &j| by_position(i, j))
        .expect("nonempty");
    Ok((
        topmost,
        Some(Diagnostic::new(
            DiagnosticKind::NoCorpusMatch,
            vec![topmost as u32 + 1],
            "no node text matches the corpus; falling back to the topmost node",
        )),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox(x1: u32, y1: u32) -> BBox {
        BBox::new(x1, y1, x1 + 60, y1 + 40).unwrap()
    }

    fn small_corpus() -> SeniorityCorpus {
        SeniorityCorpus::from_entries(vec![
            ("ceo".into(), 0.95),
            ("vp".into(), 0.7),
            ("manager".into(), 0.5),
        ])
    }

    #[test]
    fn ceo_wins() {
        let boxes = vec![bbox(100, 10), bbox(40, 80), bbox(160, 80)];
        let texts = vec![
            "CEO".to_string(),
            "VP Engineering".to_string(),
            "Manager".to_string(),
        ];
        let (root, diag) = select_root(&boxes, &texts, &small_corpus()).unwrap();
        assert_eq!(root, 0);
        assert!(diag.is_none());
    }

    #[test]
    fn corpus_beats_position() {
        // Left-rooted: the root box is not topmost.
        let boxes = vec![bbox(10, 100), bbox(120, 20), bbox(120, 180)];
        let texts = vec![
            "ceo".to_string(),
            "vp sales".to_string(),
            "manager".to_string(),
        ];
        let (root, _) = select_root(&boxes, &texts, &small_corpus()).unwrap();
        assert_eq!(root, 0);
    }

    #[test]
    fn fallback_to_topmost_with_diagnostic() {
        let boxes = vec![bbox(10, 100), bbox(120, 20)];
        let texts = vec!["zzz".to_string(), "yyy".to_string()];
        let (root, diag) = select_root(&boxes, &texts, &small_corpus()).unwrap();
        assert_eq!(root, 1);
        assert_eq!(diag.unwrap().kind, DiagnosticKind::NoCorpusMatch);
    }

    #[test]
    fn longest_match_wins() {
        let corpus = SeniorityCorpus::from_entries(vec![
            ("president".into(), 0.93),
            ("vice president".into(), 0.73),
        ]);
        let (score, entry) = corpus.score_title("Senior Vice President").unwrap();
        assert_eq!(entry, "vice president");
        assert!((score - 0.73).abs() < 1e-12);
        let (score, entry) = corpus.score_title("president").unwrap();
        assert_eq!(entry, "president");
        assert!((score - 0.93).abs() < 1e-12);
    }

    #[test]
    fn scaling_invariance() {
        let boxes = vec![bbox(10, 10), bbox(10, 80), bbox(10, 150)];
        let texts = vec![
            "office manager".to_string(),
            "ceo".to_string(),
            "vp".to_string(),
        ];
        let corpus = small_corpus();
        let (a, _) = select_root(&boxes, &texts, &corpus).unwrap();
        for f in [0.5, 0.9, 0.1] {
            let (b, _) = select_root(&boxes, &texts, &corpus.scaled(f)).unwrap();
            assert_eq!(a, b);
        }
        assert_eq!(a, 1);
    }

    #[test]
    fn builtin_corpus_parses_and_is_large_enough() {
        let c = SeniorityCorpus::builtin();
        assert!(c.len() >= 60, "{}", c.len());
        assert!(c.entries().all(|(_, s)| s > 0.0 && s <= 1.0));
        assert_eq!(c.score_of("board of directors"), Some(1.0));
    }

    #[test]
    fn parse_rejects_bad_lines() {
        assert!(SeniorityCorpus::parse("ceo 0.9").is_err());
        assert!(SeniorityCorpus::parse("ceo\t1.5").is_err());
        assert!(SeniorityCorpus::parse("ceo\t0").is_err());
        assert!(SeniorityCorpus::parse("# comment\nceo\t0.9").is_ok());
    }
}
