//! Centroid point-prompting of the segmenter and label-map assembly.

use crate::backends::{PixelCoord, PointSegmenter};
use crate::error::{Error, Result};
use crate::geometry::{centroid, ClassId, Detection, Point};
use crate::mask::BinaryMask;
pub use crate::mask::LabelMask;
use crate::raster::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    pub mask: BinaryMask,
    pub detection: Detection,
    /// Position of the detection in the segmented list; breaks confidence ties.
    pub index: usize,
}

impl InstanceMask {
    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }
}

/// Round half away from zero, then clamp into the image.
pub fn prompt_pixel(p: Point, width: u32, height: u32) -> PixelCoord {
    let clamp = |v: f64, len: u32| (v.round().max(0.0) as u32).min(len - 1);
    PixelCoord {
        x: clamp(p.x, width),
        y: clamp(p.y, height),
    }
}

/// One segmenter call per detection, in order, prompted at the box centroid.
/// Empty masks are kept.
pub fn segment_all(
    img: &Image,
    dets: &[Detection],
    seg: &mut dyn PointSegmenter,
) -> Result<Vec<InstanceMask>> {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(dets.len());
    for (index, det) in dets.iter().enumerate() {
        if !det.bbox.is_within(w, h) {
            return Err(Error::Precondition(format!(
                "detection #{index} box {:?} outside the {w}x{h} image",
                det.bbox.to_array()
            )));
        }
        let point = prompt_pixel(centroid(&det.bbox), w, h);
        let mask = seg.segment(img, point).map_err(|source| Error::Segmenter {
            image: String::new(),
            detection: index,
            source,
        })?;
        if mask.width() != w || mask.height() != h {
            return Err(Error::Dimension(format!(
                "segmenter returned {}x{} mask for {w}x{h} image",
                mask.width(),
                mask.height()
            )));
        }
        out.push(InstanceMask {
            mask,
            detection: det.clone(),
            index,
        });
    }
    Ok(out)
}

/// Paint instances onto a background map; where masks overlap, the higher
/// confidence wins and equal confidences go to the lower index.
pub fn assemble_label_mask(
    instances: &[InstanceMask],
    height: u32,
    width: u32,
    class_number: ClassId,
) -> Result<LabelMask> {
    for inst in instances {
        if inst.mask.width() != width || inst.mask.height() != height {
            return Err(Error::Dimension(format!(
                "instance #{} mask is {}x{}, expected {width}x{height}",
                inst.index,
                inst.mask.width(),
                inst.mask.height()
            )));
        }
        let c = inst.detection.canonical_class;
        if c == 0 || c > class_number {
            return Err(Error::InvalidArgument(format!(
                "instance #{} class {c} outside 1..={class_number}",
                inst.index
            )));
        }
    }
    let mut order: Vec<&InstanceMask> = instances.iter().collect();
    order.sort_by(|a, b| {
        b.detection
            .confidence
            .total_cmp(&a.detection.confidence)
            .then(a.index.cmp(&b.index))
    });

    let mut labels = vec![0 as ClassId; width as usize * height as usize];
    let mut painted = vec![false; labels.len()];
    for inst in order {
        let class = inst.detection.canonical_class;
        for (i, &on) in inst.mask.data().iter().enumerate() {
            if on && !painted[i] {
                labels[i] = class;
                painted[i] = true;
            }
        }
    }
    LabelMask::from_vec(width, height, class_number, labels)
}
