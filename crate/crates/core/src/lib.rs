//! Training-free open-vocabulary segmentation of aerial and satellite imagery.
//!
//! A text-prompted detector proposes boxes over several image scales, a
//! visual-prompt image/text scorer rejects boxes whose content does not match
//! their label, and a point-prompted segmenter turns surviving boxes into
//! masks that are merged into a single label map.
//!
//! Model backends are traits ([`backends::Detector`],
//! [`backends::ImageTextScorer`], [`backends::PointSegmenter`]); the crate
//! ships deterministic scene-driven mocks and a subprocess adapter.

pub mod backends;
pub mod clip_filter;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod prompts;
pub mod raster;
pub mod runner;
pub mod segmentation;

pub use error::{BackendError, Error, Result};
pub use geometry::{iou, nms, BBox, ClassId, Detection, Point};
pub use mask::{BinaryMask, LabelMask};
pub use prompts::{ClassSpec, PromptSet};
pub use raster::Image;
