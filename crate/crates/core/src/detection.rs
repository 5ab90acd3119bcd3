//! Multi-scale text-prompted detection: rescaled views, per-view detection,
//! projection back to the original frame, canonicalization, oversized-box
//! pruning and per-class NMS.

use serde::{Deserialize, Serialize};

use crate::backends::Detector;
use crate::error::{BackendError, Error, Result};
use crate::geometry::{nms, project_to_original, remove_oversized, Detection};
use crate::prompts::{canonicalize, detector_vocabulary, PromptSet};
use crate::raster::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    pub scales: Vec<f64>,
    pub nms_overlap_threshold: f64,
    pub max_area_fraction: f64,
    pub min_confidence: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            scales: vec![0.5, 1.0],
            nms_overlap_threshold: 0.1,
            max_area_fraction: 0.9,
            min_confidence: 0.0,
        }
    }
}

impl DetectionConfig {
    /// Three-scale preset `[0.5, 1.0, 1.5]`.
    pub fn three_scale() -> Self {
        Self {
            scales: vec![0.5, 1.0, 1.5],
            ..Self::default()
        }
    }

    /// Single view at scale 1 with suppression and pruning disabled.
    pub fn passthrough() -> Self {
        Self {
            scales: vec![1.0],
            nms_overlap_threshold: 1.0,
            max_area_fraction: 1.0,
            min_confidence: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::Config(
                "at least one detection scale is required".into(),
            ));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Config(format!("scale {s} must be positive")));
        }
        for (name, v) in [
            ("nms_overlap_threshold", self.nms_overlap_threshold),
            ("min_confidence", self.min_confidence),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} {v} outside [0, 1]")));
            }
        }
        if !(self.max_area_fraction > 0.0 && self.max_area_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "max_area_fraction {} outside (0, 1]",
                self.max_area_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledView {
    pub scale: f64,
    pub image: Image,
}

/// One bilinear view per scale, sized `round(scale * W) x round(scale * H)`.
pub fn generate_scaled_views(img: &Image, scales: &[f64]) -> Result<Vec<ScaledView>> {
    scales
        .iter()
        .map(|&scale| {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "scale {scale} must be positive"
                )));
            }
            let w = (img.width() as f64 * scale).round();
            let h = (img.height() as f64 * scale).round();
            if w < 1.0 || h < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "scale {scale} shrinks {}x{} below one pixel",
                    img.width(),
                    img.height()
                )));
            }
            let image = if scale == 1.0 {
                img.clone()
            } else {
                img.resize_bilinear(w as u32, h as u32)?
            };
            Ok(ScaledView { scale, image })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCount {
    pub scale: f64,
    pub raw: usize,
}

/// Detection stage output with per-step counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutput {
    pub detections: Vec<Detection>,
    pub raw_per_scale: Vec<ScaleCount>,
    /// Detections surviving canonicalization, confidence gating and clipping.
    pub canonical: usize,
    pub post_oversized: usize,
}

impl DetectionOutput {
    pub fn raw_total(&self) -> usize {
        self.raw_per_scale.iter().map(|s| s.raw).sum()
    }
}

pub fn detect_multiscale(
    img: &Image,
    ps: &PromptSet,
    det: &mut dyn Detector,
    cfg: &DetectionConfig,
) -> Result<Vec<Detection>> {
    Ok(detect_multiscale_traced(img, ps, det, cfg)?.detections)
}

/// [`detect_multiscale`] keeping the intermediate counts.
///
/// Views are processed in ascending scale order, so the result does not
/// depend on the order of `cfg.scales`.
pub fn detect_multiscale_traced(
    img: &Image,
    ps: &PromptSet,
    det: &mut dyn Detector,
    cfg: &DetectionConfig,
) -> Result<DetectionOutput> {
    cfg.validate()?;
    let mut scales = cfg.scales.clone();
    scales.sort_by(f64::total_cmp);
    scales.dedup();

    let vocabulary = detector_vocabulary(ps);
    let views = generate_scaled_views(img, &scales)?;
    let (w, h) = (img.width(), img.height());

    let mut merged = Vec::new();
    let mut raw_per_scale = Vec::with_capacity(views.len());
    for view in &views {
        let raw = det
            .detect(&view.image, &vocabulary)
            .map_err(|source| Error::Backend {
                image: String::new(),
                source,
            })?;
        raw_per_scale.push(ScaleCount {
            scale: view.scale,
            raw: raw.len(),
        });
        for r in raw {
            if !(0.0..=1.0).contains(&r.confidence) {
                return Err(Error::Backend {
                    image: String::new(),
                    source: BackendError::Failure(format!(
                        "detector confidence {} outside [0, 1]",
                        r.confidence
                    )),
                });
            }
            let Some(class) = canonicalize(&r.label, ps) else {
                continue;
            };
            if r.confidence < cfg.min_confidence {
                continue;
            }
            let Some(bbox) = project_to_original(&r.bbox, view.scale)?.clip(w, h) else {
                continue;
            };
            merged.push(Detection::new(
                bbox,
                r.label,
                class,
                r.confidence,
                view.scale,
            )?);
        }
    }
    let canonical = merged.len();
    let pruned = remove_oversized(&merged, w, h, cfg.max_area_fraction);
    let post_oversized = pruned.len();
    let detections = nms(&pruned, cfg.nms_overlap_threshold);
    Ok(DetectionOutput {
        detections,
        raw_per_scale,
        canonical,
        post_oversized,
    })
}
