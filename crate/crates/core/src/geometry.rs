//! Axis-aligned box arithmetic shared by every pipeline stage.
//!
//! Coordinates are continuous pixel coordinates with the origin at the
//! top-left corner of the original image, x to the right and y downward.
//! Pixel `(px, py)` covers the unit square `[px, px + 1) x [py, py + 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Task class identifier. `0` is reserved for background.
pub type ClassId = u8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Axis-aligned box `(x_min, y_min, x_max, y_max)` with strictly positive extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let finite = [x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite());
        if !finite || x_min >= x_max || y_min >= y_max {
            return Err(Error::DegenerateBox {
                x_min,
                y_min,
                x_max,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// Intersection with another box, `None` when the overlap has no area.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        BBox::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
        .ok()
    }

    /// Clip to `[0, width] x [0, height]`. `None` if nothing visible remains.
    pub fn clip(&self, width: u32, height: u32) -> Option<BBox> {
        BBox::new(
            self.x_min.max(0.0),
            self.y_min.max(0.0),
            self.x_max.min(width as f64),
            self.y_max.min(height as f64),
        )
        .ok()
    }

    /// True when the box lies within `[0, width] x [0, height]`.
    pub fn is_within(&self, width: u32, height: u32) -> bool {
        self.x_min >= 0.0
            && self.y_min >= 0.0
            && self.x_max <= width as f64
            && self.y_max <= height as f64
    }

    /// Scale the box about its own center.
    pub fn scale_about_center(&self, factor: f64) -> Result<BBox> {
        let c = centroid(self);
        let hw = self.width() * factor / 2.0;
        let hh = self.height() * factor / 2.0;
        BBox::new(c.x - hw, c.y - hh, c.x + hw, c.y + hh)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.to_array()
    }
}

/// A detector hit mapped to a task class, in original-image coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub raw_label: String,
    pub canonical_class: ClassId,
    pub confidence: f64,
    pub source_scale: f64,
}

impl Detection {
    pub fn new(
        bbox: BBox,
        raw_label: impl Into<String>,
        canonical_class: ClassId,
        confidence: f64,
        source_scale: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidArgument(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        if canonical_class == 0 {
            return Err(Error::InvalidArgument(
                "canonical class 0 is reserved for background".into(),
            ));
        }
        if !(source_scale > 0.0 && source_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "source scale {source_scale} must be positive"
            )));
        }
        Ok(Self {
            bbox,
            raw_label: raw_label.into(),
            canonical_class,
            confidence,
            source_scale,
        })
    }
}

/// Intersection over union, `0` for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Greedy per-class non-maximum suppression.
///
/// Detections are visited by descending confidence (stable on input order).
/// Each visited detection is kept unless a previously kept detection of the
/// same `canonical_class` overlaps it with IoU strictly above
/// `overlap_threshold`. The result is in acceptance order.
pub fn nms(dets: &[Detection], overlap_threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    // sort_by is stable, so equal confidences keep input order
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));

    let mut kept: Vec<&Detection> = Vec::with_capacity(dets.len());
    for idx in order {
        let cand = &dets[idx];
        let suppressed = kept.iter().any(|k| {
            k.canonical_class == cand.canonical_class
                && iou(&k.bbox, &cand.bbox) > overlap_threshold
        });
        if !suppressed {
            kept.push(cand);
        }
    }
    kept.into_iter().cloned().collect()
}

/// Drop detections whose box area exceeds `max_area_fraction` of the image.
pub fn remove_oversized(
    dets: &[Detection],
    image_w: u32,
    image_h: u32,
    max_area_fraction: f64,
) -> Vec<Detection> {
    let limit = max_area_fraction * image_w as f64 * image_h as f64;
    dets.iter()
        .filter(|d| d.bbox.area() <= limit)
        .cloned()
        .collect()
}

pub fn centroid(bbox: &BBox) -> Point {
    Point {
        x: (bbox.x_min + bbox.x_max) / 2.0,
        y: (bbox.y_min + bbox.y_max) / 2.0,
    }
}

/// Map a box found in a view rescaled by `scale` back to original coordinates.
/// Clipping to the original image is left to the caller.
pub fn project_to_original(bbox: &BBox, scale: f64) -> Result<BBox> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale {scale} must be positive"
        )));
    }
    BBox::new(
        bbox.x_min / scale,
        bbox.y_min / scale,
        bbox.x_max / scale,
        bbox.y_max / scale,
    )
}

/// Inverse of [`project_to_original`]: express an original-frame box in a view rescaled by `scale`.
pub fn project_to_view(bbox: &BBox, scale: f64) -> Result<BBox> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "scale {scale} must be positive"
        )));
    }
    BBox::new(
        bbox.x_min * scale,
        bbox.y_min * scale,
        bbox.x_max * scale,
        bbox.y_max * scale,
    )
}
