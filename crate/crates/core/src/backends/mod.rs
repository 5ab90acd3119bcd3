//! Model backend contracts composed by the pipeline.
//!
//! A backend instance is used from one thread at a time (`&mut self`); run
//! images in parallel by giving each worker its own instances.

mod command;
pub mod mock;

use serde::{Deserialize, Serialize};

pub use command::CommandBackend;

use crate::error::BackendError;
use crate::geometry::{BBox, ClassId};
use crate::mask::BinaryMask;
use crate::raster::Image;

/// A detector hit in the coordinate frame of the image it was run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDetection {
    pub bbox: BBox,
    /// The vocabulary text the detector matched.
    pub label: String,
    pub confidence: f64,
}

/// Integer pixel prompt, `0 <= x < width`, `0 <= y < height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: u32,
    pub y: u32,
}

/// Text-prompted box detector.
pub trait Detector {
    fn detect(
        &mut self,
        img: &Image,
        vocabulary: &[(String, ClassId)],
    ) -> Result<Vec<RawDetection>, BackendError>;
}

/// Image-text similarity model. Scores are raw (unnormalized), one per candidate.
pub trait ImageTextScorer {
    fn score(&mut self, patch: &Image, candidates: &[String]) -> Result<Vec<f64>, BackendError>;
}

/// Point-prompted segmenter returning a single `H x W` mask.
pub trait PointSegmenter {
    fn segment(&mut self, img: &Image, point: PixelCoord) -> Result<BinaryMask, BackendError>;
}

impl<T: Detector + ?Sized> Detector for Box<T> {
    fn detect(
        &mut self,
        img: &Image,
        vocabulary: &[(String, ClassId)],
    ) -> Result<Vec<RawDetection>, BackendError> {
        (**self).detect(img, vocabulary)
    }
}

impl<T: ImageTextScorer + ?Sized> ImageTextScorer for Box<T> {
    fn score(&mut self, patch: &Image, candidates: &[String]) -> Result<Vec<f64>, BackendError> {
        (**self).score(patch, candidates)
    }
}

impl<T: PointSegmenter + ?Sized> PointSegmenter for Box<T> {
    fn segment(&mut self, img: &Image, point: PixelCoord) -> Result<BinaryMask, BackendError> {
        (**self).segment(img, point)
    }
}

/// One detector, scorer and segmenter bound to a single image.
pub struct BackendSet {
    pub detector: Box<dyn Detector>,
    pub scorer: Box<dyn ImageTextScorer>,
    pub segmenter: Box<dyn PointSegmenter>,
}

pub(crate) fn check_point(img: &Image, point: PixelCoord) -> Result<(), BackendError> {
    if point.x >= img.width() || point.y >= img.height() {
        return Err(BackendError::Precondition(format!(
            "point ({}, {}) outside {}x{} image",
            point.x,
            point.y,
            img.width(),
            img.height()
        )));
    }
    Ok(())
}
