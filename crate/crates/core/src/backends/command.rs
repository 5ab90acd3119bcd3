//! Subprocess adapter for real models.
//!
//! Each call spawns the configured program, writes one JSON request to its
//! stdin and reads one JSON response from its stdout. Images are exchanged
//! as PNG files in a private temporary directory.
//!
//! Requests:
//!
//! ```text
//! {"op": "detect",  "image": "<png>", "vocabulary": [["roof", 1], ...]}
//! {"op": "score",   "image": "<png>", "candidates": ["The satellite view of ...", ...]}
//! {"op": "segment", "image": "<png>", "point": [x, y], "mask_out": "<png>"}
//! ```
//!
//! Responses are `{"detections": [{"bbox": [x0, y0, x1, y1], "label": "...",
//! "confidence": 0.9}]}`, `{"scores": [...]}` and `{"ok": true}` (the mask is
//! written to `mask_out`, nonzero = foreground). Any response may instead be
//! `{"error": "..."}`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use serde::Deserialize;
use serde_json::json;

use super::{check_point, Detector, ImageTextScorer, PixelCoord, PointSegmenter, RawDetection};
use crate::error::BackendError;
use crate::geometry::ClassId;
use crate::mask::BinaryMask;
use crate::raster::Image;

pub struct CommandBackend {
    program: PathBuf,
    args: Vec<String>,
    scratch: tempfile::TempDir,
    calls: u64,
}

#[derive(Deserialize)]
struct Reply {
    error: Option<String>,
    detections: Option<Vec<RawDetection>>,
    scores: Option<Vec<f64>>,
}

impl CommandBackend {
    pub fn new(program: impl Into<PathBuf>, args: Vec<String>) -> Result<Self, BackendError> {
        let scratch = tempfile::tempdir()
            .map_err(|e| BackendError::Failure(format!("scratch directory: {e}")))?;
        Ok(Self {
            program: program.into(),
            args,
            scratch,
            calls: 0,
        })
    }

    fn next_path(&mut self, tag: &str) -> PathBuf {
        self.calls += 1;
        self.scratch
            .path()
            .join(format!("{tag}_{}.png", self.calls))
    }

    fn write_image(&mut self, img: &Image) -> Result<PathBuf, BackendError> {
        let path = self.next_path("in");
        img.save_png(&path)
            .map_err(|e| BackendError::Failure(e.to_string()))?;
        Ok(path)
    }

    fn call(&self, request: serde_json::Value) -> Result<Reply, BackendError> {
        let fail = |m: String| BackendError::Failure(format!("{}: {m}", self.program.display()));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("spawn failed: {e}")))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin
                .write_all(request.to_string().as_bytes())
                .map_err(|e| fail(format!("write failed: {e}")))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| fail(format!("wait failed: {e}")))?;
        if !out.status.success() {
            return Err(fail(format!(
                "exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let reply: Reply = serde_json::from_slice(&out.stdout)
            .map_err(|e| fail(format!("malformed response: {e}")))?;
        if let Some(err) = reply.error {
            return Err(fail(err));
        }
        Ok(reply)
    }
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

impl Detector for CommandBackend {
    fn detect(
        &mut self,
        img: &Image,
        vocabulary: &[(String, ClassId)],
    ) -> Result<Vec<RawDetection>, BackendError> {
        if vocabulary.is_empty() {
            return Err(BackendError::Precondition("empty vocabulary".into()));
        }
        let image = self.write_image(img)?;
        let reply = self.call(json!({
            "op": "detect",
            "image": path_str(&image),
            "vocabulary": vocabulary,
        }))?;
        let dets = reply
            .detections
            .ok_or_else(|| BackendError::Failure("response lacks `detections`".into()))?;
        for d in &dets {
            if !(0.0..=1.0).contains(&d.confidence) {
                return Err(BackendError::Failure(format!(
                    "confidence {} outside [0, 1]",
                    d.confidence
                )));
            }
            if !vocabulary.iter().any(|(t, _)| *t == d.label) {
                return Err(BackendError::Failure(format!(
                    "label `{}` is not in the vocabulary",
                    d.label
                )));
            }
        }
        Ok(dets)
    }
}

impl ImageTextScorer for CommandBackend {
    fn score(&mut self, patch: &Image, candidates: &[String]) -> Result<Vec<f64>, BackendError> {
        if candidates.is_empty() {
            return Err(BackendError::Precondition("no candidates".into()));
        }
        let image = self.write_image(patch)?;
        let reply = self.call(json!({
            "op": "score",
            "image": path_str(&image),
            "candidates": candidates,
        }))?;
        let scores = reply
            .scores
            .ok_or_else(|| BackendError::Failure("response lacks `scores`".into()))?;
        if scores.len() != candidates.len() {
            return Err(BackendError::Failure(format!(
                "{} scores for {} candidates",
                scores.len(),
                candidates.len()
            )));
        }
        Ok(scores)
    }
}

impl PointSegmenter for CommandBackend {
    fn segment(&mut self, img: &Image, point: PixelCoord) -> Result<BinaryMask, BackendError> {
        check_point(img, point)?;
        let image = self.write_image(img)?;
        let mask_out = self.next_path("mask");
        self.call(json!({
            "op": "segment",
            "image": path_str(&image),
            "point": [point.x, point.y],
            "mask_out": path_str(&mask_out),
        }))?;
        let mask = BinaryMask::load_png(&mask_out)
            .map_err(|e| BackendError::Failure(format!("mask: {e}")))?;
        if mask.width() != img.width() || mask.height() != img.height() {
            return Err(BackendError::Failure(format!(
                "mask is {}x{}, image is {}x{}",
                mask.width(),
                mask.height(),
                img.width(),
                img.height()
            )));
        }
        Ok(mask)
    }
}
