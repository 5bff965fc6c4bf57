//! Pluggable text recognition and assignment of recognized boxes to nodes.
//!
//! Character recognition itself is out of scope: text comes either from
//! the sidecar ground-truth file written next to each generated image, or
//! from an external command speaking a small JSON contract. Either way the
//! rest of the pipeline sees the same [`TextBox`] list.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Diagnostic, DiagnosticKind, Error, Result};
use crate::model::BBox;
use crate::structure::DetectedNode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBox {
    pub bbox: BBox,
    pub text: String,
    pub confidence: f64,
}

/// Where recognized text comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TextProvider {
    /// Read `<image>.truth.json` next to the image; the ground truth
    /// doubles as a perfect recognizer on synthetic data.
    Sidecar,
    /// Invoke `cmd [args...] <image-path>`; the command must print a JSON
    /// array `[{"bbox":[x1,y1,x2,y2],"text":...,"confidence":...}]` on
    /// stdout and exit 0.
    ExternalCommand(Vec<String>),
}

impl TextProvider {
    pub fn name(&self) -> String {
        match self {
            TextProvider::Sidecar => "sidecar".to_string(),
            TextProvider::ExternalCommand(cmd) => format!("external:{}", cmd.join(" ")),
        }
    }
}

/// Path of the sidecar truth file for an image: `<stem>.truth.json`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("truth.json")
}

#[derive(Deserialize)]
struct SidecarNode {
    id: u32,
    text: String,
    bbox: [u32; 4],
}

#[derive(Deserialize)]
struct SidecarDoc {
    nodes: Vec<SidecarNode>,
}

/// Recognizes text boxes for an image through the configured provider.
pub fn recognize(image: &Path, provider: &TextProvider) -> Result<Vec<TextBox>> {
    match provider {
        TextProvider::Sidecar => {
            let path = sidecar_path(image);
            let raw = std::fs::read_to_string(&path).map_err(|e| Error::TextProvider {
                provider: provider.name(),
                message: format!("cannot read sidecar {}: {e}", path.display()),
            })?;
            let doc: SidecarDoc =
                serde_json::from_str(&raw).map_err(|e| Error::TextProvider {
                    provider: provider.name(),
                    message: format!("bad sidecar {}: {e}", path.display()),
                })?;
            let mut nodes = doc.nodes;
            nodes.sort_by_key(|n| n.id);
            nodes
                .into_iter()
                .filter(|n| !n.text.is_empty())
                .map(|n| {
                    Ok(TextBox {
                        bbox: BBox::new(n.bbox[0], n.bbox[1], n.bbox[2], n.bbox[3])?,
                        text: n.text,
                        confidence: 1.0,
                    })
                })
                .collect()
        }
        TextProvider::ExternalCommand(cmd) => {
            let (program, args) = cmd.split_first().ok_or_else(|| Error::TextProvider {
                provider: provider.name(),
                message: "empty external command".to_string(),
            })?;
            let output = Command::new(program)
                .args(args)
                .arg(image)
                .output()
                .map_err(|e| Error::TextProvider {
                    provider: provider.name(),
                    message: format!("failed to launch: {e}"),
                })?;
            if !output.status.success() {
                return Err(Error::TextProvider {
                    provider: provider.name(),
                    message: format!(
                        "exit {:?}: {}",
                        output.status.code(),
                        String::from_utf8_lossy(&output.stderr).trim()
                    ),
                });
            }
            let boxes: Vec<TextBox> =
                serde_json::from_slice(&output.stdout).map_err(|e| Error::TextProvider {
                    provider: provider.name(),
                    message: format!("malformed output: {e}"),
                })?;
            Ok(boxes)
        }
    }
}

/// Assigns each box to the node whose bbox contains its center
/// (overlapping nodes resolve to the smaller box) and merges a node's
/// boxes in reading order, top-to-bottom then left-to-right, joined by
/// single spaces. Returns one text per node, empty when nothing landed
/// inside, plus diagnostics for dropped boxes.
pub fn assign_text(
    boxes: &[TextBox],
    nodes: &[DetectedNode],
) -> (Vec<String>, Vec<Diagnostic>) {
    let mut per_node: Vec<Vec<&TextBox>> = vec![Vec::new(); nodes.len()];
    let mut diagnostics = Vec::new();
    for b in boxes {
        let (cx, cy) = b.bbox.center();
        let owner = nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                cx >= f64::from(n.bbox.x1)
                    && cx < f64::from(n.bbox.x2)
                    && cy >= f64::from(n.bbox.y1)
                    && cy < f64::from(n.bbox.y2)
            })
            .min_by_key(|(_, n)| n.bbox.area());
        match owner {
            Some((i, _)) => per_node[i].push(b),
            None => diagnostics.push(Diagnostic::new(
                DiagnosticKind::DroppedTextBox,
                vec![],
                format!("text box {:?} at {:?} lies in no node", b.text, b.bbox),
            )),
        }
    }
    let texts = per_node
        .into_iter()
        .map(|mut bs| {
            bs.sort_by(|a, b| {
                let (ax, ay) = a.bbox.center();
                let (bx, by) = b.bbox.center();
                ay.partial_cmp(&by)
                    .expect("finite")
                    .then(ax.partial_cmp(&bx).expect("finite"))
                    .then(a.text.cmp(&b.text))
            });
            bs.iter()
                .map(|b| b.text.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    (texts, diagnostics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Shape;

    fn node(x1: u32, y1: u32, x2: u32, y2: u32) -> DetectedNode {
        DetectedNode {
            bbox: BBox::new(x1, y1, x2, y2).unwrap(),
            shape: Shape::Rectangle,
            fill_ratio: 0.1,
        }
    }

    fn text_box(x1: u32, y1: u32, x2: u32, y2: u32, text: &str) -> TextBox {
        TextBox {
            bbox: BBox::new(x1, y1, x2, y2).unwrap(),
            text: text.to_string(),
            confidence: 1.0,
        }
    }

    #[test]
    fn stacked_boxes_merge_in_reading_order() {
        let nodes = vec![node(10, 10, 110, 70)];
        let boxes = vec![
            text_box(20, 40, 60, 50, "CEO"),
            text_box(20, 20, 90, 30, "John Smith"),
        ];
        let (texts, diags) = assign_text(&boxes, &nodes);
        assert_eq!(texts[0], "John Smith CEO");
        assert!(diags.is_empty());
    }

    #[test]
    fn merge_is_order_independent() {
        let nodes = vec![node(10, 10, 110, 70)];
        let a = vec![
            text_box(20, 20, 40, 30, "a"),
            text_box(50, 20, 70, 30, "b"),
            text_box(20, 40, 70, 50, "c"),
        ];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(assign_text(&a, &nodes).0, assign_text(&b, &nodes).0);
        assert_eq!(assign_text(&a, &nodes).0[0], "a b c");
    }

    #[test]
    fn outside_box_dropped_with_diagnostic() {
        let nodes = vec![node(10, 10, 110, 70)];
        let boxes = vec![text_box(200, 200, 240, 220, "stray")];
        let (texts, diags) = assign_text(&boxes, &nodes);
        assert_eq!(texts[0], "");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].kind, DiagnosticKind::DroppedTextBox);
    }

    #[test]
    fn empty_boxes_give_empty_texts() {
        let nodes = vec![node(10, 10, 110, 70), node(10, 100, 110, 160)];
        let (texts, diags) = assign_text(&[], &nodes);
        assert_eq!(texts, vec!["".to_string(), "".to_string()]);
        assert!(diags.is_empty());
    }

    #[test]
    fn overlap_resolves_to_smaller_node() {
        let nodes = vec![node(10, 10, 200, 200), node(50, 50, 120, 100)];
        let boxes = vec![text_box(60, 60, 100, 80, "inner")];
        let (texts, _) = assign_text(&boxes, &nodes);
        assert_eq!(texts[0], "");
        assert_eq!(texts[1], "inner");
    }

    #[test]
    fn external_command_round_trip() {
        use std::io::Write;
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("fake_ocr.sh");
        let mut f = std::fs::File::create(&script).unwrap();
        writeln!(f, "#!/bin/sh").unwrap();
        writeln!(
            f,
            "printf '[{{\"bbox\":[1,2,30,12],\"text\":\"hello\",\"confidence\":0.9}}]'"
        )
        .unwrap();
        drop(f);
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let provider =
            TextProvider::ExternalCommand(vec![script.to_string_lossy().into_owned()]);
        let boxes = recognize(Path::new("unused.png"), &provider).unwrap();
        assert_eq!(boxes.len(), 1);
        assert_eq!(boxes[0].text, "hello");
    }

    #[test]
    fn external_command_failure_captured() {
        use std::io::Write;
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("bad_ocr.sh");
        let mut f = std::fs::File::create(&script).unwrap();
        writeln!(f, "#!/bin/sh").unwrap();
        writeln!(f, "echo 'boom' >&2; exit 1").unwrap();
        drop(f);
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let provider =
            TextProvider::ExternalCommand(vec![script.to_string_lossy().into_owned()]);
        let err = recognize(Path::new("unused.png"), &provider).unwrap_err();
        match err {
            Error::TextProvider { message, .. } => assert!(message.contains("boom")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_sidecar_is_an_error() {
        let err = recognize(Path::new("/nonexistent/img.png"), &TextProvider::Sidecar)
            .unwrap_err();
        assert!(matches!(err, Error::TextProvider { .. }));
    }
}
