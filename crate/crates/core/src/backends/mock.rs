//! Deterministic mock backends driven by synthetic scene descriptions.
//!
//! A scene is a flat background with axis-aligned colored rectangles. Each
//! rectangle is either a task object (`class_id`) or a planted distractor
//! (no `class_id`) that the detector may mistake for a task class
//! (`detected_as`). The mocks behave as exact oracles:
//!
//! * [`MockDetector`] echoes the scene boxes scaled to the view it is given,
//!   with an optional noise model: every box emitted `duplicates` times, copy
//!   `j` carrying confidence `conf * 0.9^j` and, for `j >= 1`, coordinates
//!   jittered uniformly by at most `jitter_px` pixels. Objects whose extent in
//!   the view exceeds `max_view_extent` are missed in that view.
//! * [`MockScorer`] finds the red-circle stroke in the patch, takes the
//!   majority palette color inside it and scores `1.0` for the candidate
//!   naming that color's label.
//! * [`MockSegmenter`] returns the pixels of the smallest rectangle
//!   containing the prompt point, or an empty mask on background.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_point, Detector, ImageTextScorer, PixelCoord, PointSegmenter, RawDetection};
use crate::error::{BackendError, Error, Result};
use crate::geometry::{BBox, ClassId};
use crate::mask::{BinaryMask, LabelMask};
use crate::prompts::render_template;
use crate::raster::Image;

pub const PURE_RED: [u8; 3] = [255, 0, 0];
pub const DUPLICATE_DECAY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneShape {
    /// Integer rectangle `[x0, y0, x1, y1)` in pixels.
    pub rect: [u32; 4],
    pub color: [u8; 3],
    /// Name the scorer should recognise (class name or distractor name).
    pub label: String,
    /// Task class; `None` marks a planted distractor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<ClassId>,
    /// Class the detector reports a distractor as.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detected_as: Option<ClassId>,
    /// Preferred detector label; falls back to the first synonym of the class.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_label: Option<String>,
    pub confidence: f64,
}

impl SceneShape {
    pub fn is_distractor(&self) -> bool {
        self.class_id.is_none()
    }

    /// Class the detector attributes to this shape, if any.
    pub fn detector_class(&self) -> Option<ClassId> {
        self.class_id.or(self.detected_as)
    }

    pub fn bbox(&self) -> BBox {
        let [x0, y0, x1, y1] = self.rect;
        BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64).expect("validated scene rect")
    }

    pub fn area(&self) -> u64 {
        let [x0, y0, x1, y1] = self.rect;
        (x1 - x0) as u64 * (y1 - y0) as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        let [x0, y0, x1, y1] = self.rect;
        x >= x0 && x < x1 && y >= y0 && y < y1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedBox {
    pub class_id: ClassId,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub stem: String,
    pub width: u32,
    pub height: u32,
    pub background: [u8; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background_label: Option<String>,
    /// A whole-image box the detector reports in every view.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_image_false_positive: Option<PlantedBox>,
    #[serde(default)]
    pub shapes: Vec<SceneShape>,
}

impl SceneDescription {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| {
            Err(Error::InvalidArgument(format!(
                "scene `{}`: {m}",
                self.stem
            )))
        };
        if self.width == 0 || self.height == 0 {
            return bad("empty image".into());
        }
        if self.background == PURE_RED {
            return bad("pure red is reserved for visual prompts".into());
        }
        if let Some(p) = &self.full_image_false_positive {
            if p.class_id == 0 || !(0.0..=1.0).contains(&p.confidence) {
                return bad("invalid planted full-image box".into());
            }
        }
        for (i, s) in self.shapes.iter().enumerate() {
            let [x0, y0, x1, y1] = s.rect;
            if x0 >= x1 || y0 >= y1 || x1 > self.width || y1 > self.height {
                return bad(format!(
                    "shape #{i} rect {:?} invalid or outside image",
                    s.rect
                ));
            }
            if s.color == PURE_RED {
                return bad(format!("shape #{i} uses pure red"));
            }
            if s.class_id == Some(0) || s.detected_as == Some(0) {
                return bad(format!("shape #{i} uses class 0"));
            }
            if !(0.0..=1.0).contains(&s.confidence) {
                return bad(format!("shape #{i} confidence outside [0, 1]"));
            }
        }
        Ok(())
    }

    /// Index of the smallest shape containing the pixel (first on equal area).
    pub fn shape_at(&self, x: u32, y: u32) -> Option<usize> {
        self.shapes
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(x, y))
            .min_by_key(|(i, s)| (s.area(), *i))
            .map(|(i, _)| i)
    }

    /// Rasterize: background, then shapes from largest to smallest.
    pub fn render(&self) -> Image {
        let bg = self.background.map(|v| v as f32 / 255.0);
        let mut img = Image::filled(self.width, self.height, &bg).expect("validated size");
        let mut order: Vec<usize> = (0..self.shapes.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(self.shapes[i].area()), i));
        for i in order {
            let s = &self.shapes[i];
            let [x0, y0, x1, y1] = s.rect;
            for y in y0..y1 {
                for x in x0..x1 {
                    for c in 0..3 {
                        img.set(c, x, y, s.color[c as usize] as f32 / 255.0);
                    }
                }
            }
        }
        img
    }

    /// Ground-truth label map: class of the smallest containing shape,
    /// background for distractors and uncovered pixels.
    pub fn ground_truth(&self, class_number: ClassId) -> Result<LabelMask> {
        let mut labels = Vec::with_capacity(self.width as usize * self.height as usize);
        for y in 0..self.height {
            for x in 0..self.width {
                let l = self
                    .shape_at(x, y)
                    .and_then(|i| self.shapes[i].class_id)
                    .unwrap_or(0);
                labels.push(l);
            }
        }
        LabelMask::from_vec(self.width, self.height, class_number, labels)
    }

    pub fn distractors(&self) -> impl Iterator<Item = &SceneShape> {
        self.shapes.iter().filter(|s| s.is_distractor())
    }
}

/// All scenes of a mock run, keyed by image file stem.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneCorpus {
    #[serde(default)]
    pub scenes: Vec<SceneDescription>,
}

impl SceneCorpus {
    pub fn validate(&self) -> Result<()> {
        let mut stems = std::collections::HashSet::new();
        for s in &self.scenes {
            s.validate()?;
            if !stems.insert(s.stem.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate scene `{}`",
                    s.stem
                )));
            }
        }
        self.palette().map(|_| ())
    }

    pub fn get(&self, stem: &str) -> Option<&SceneDescription> {
        self.scenes.iter().find(|s| s.stem == stem)
    }

    /// Color to label mapping over every scene; one label per color.
    pub fn palette(&self) -> Result<Vec<([u8; 3], String)>> {
        let mut map: Vec<([u8; 3], String)> = Vec::new();
        let mut add = |color: [u8; 3], label: &str| -> Result<()> {
            match map.iter().find(|(c, _)| *c == color) {
                Some((_, l)) if !l.eq_ignore_ascii_case(label) => Err(Error::InvalidArgument(
                    format!("color {color:?} used for both `{l}` and `{label}`"),
                )),
                Some(_) => Ok(()),
                None => {
                    map.push((color, label.to_string()));
                    Ok(())
                }
            }
        };
        for scene in &self.scenes {
            if let Some(l) = &scene.background_label {
                add(scene.background, l)?;
            }
            for s in &scene.shapes {
                add(s.color, &s.label)?;
            }
        }
        Ok(map)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let corpus: SceneCorpus = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string_pretty(self).expect("scene corpus serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockNoise {
    /// Copies emitted per true box; `1` disables duplication.
    pub duplicates: u32,
    /// Maximum absolute jitter, in view pixels, applied to copies `j >= 1`.
    pub jitter_px: f64,
    /// Objects larger than this (in view pixels) are missed in that view.
    pub max_view_extent: Option<f64>,
}

impl Default for MockNoise {
    fn default() -> Self {
        Self {
            duplicates: 1,
            jitter_px: 2.0,
            max_view_extent: None,
        }
    }
}

impl MockNoise {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.duplicates == 0 {
            return Err(Error::Config("mock duplicates must be >= 1".into()));
        }
        if !(0.0..=2.0).contains(&self.jitter_px) {
            return Err(Error::Config("mock jitter must be within [0, 2] px".into()));
        }
        if matches!(self.max_view_extent, Some(e) if e.is_nan() || e <= 0.0) {
            return Err(Error::Config("max_view_extent must be positive".into()));
        }
        Ok(())
    }
}

/// FNV-1a, used to derive per-image seeds from file stems.
pub fn stable_hash(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub struct MockDetector {
    scene: SceneDescription,
    noise: MockNoise,
    seed: u64,
}

impl MockDetector {
    pub fn new(scene: SceneDescription, noise: MockNoise, seed: u64) -> Self {
        Self { scene, noise, seed }
    }

    fn label_for(
        &self,
        shape_label: Option<&str>,
        class: ClassId,
        vocab: &[(String, ClassId)],
    ) -> Option<String> {
        if let Some(pref) = shape_label {
            if let Some((t, _)) = vocab
                .iter()
                .find(|(t, c)| *c == class && t.eq_ignore_ascii_case(pref))
            {
                return Some(t.clone());
            }
        }
        vocab
            .iter()
            .find(|(_, c)| *c == class)
            .map(|(t, _)| t.clone())
    }
}

impl Detector for MockDetector {
    fn detect(
        &mut self,
        img: &Image,
        vocabulary: &[(String, ClassId)],
    ) -> Result<Vec<RawDetection>, BackendError> {
        if vocabulary.is_empty() {
            return Err(BackendError::Precondition("empty vocabulary".into()));
        }
        let (vw, vh) = (img.width(), img.height());
        let sx = vw as f64 / self.scene.width as f64;
        let sy = vh as f64 / self.scene.height as f64;
        // seed depends on the view, so results do not depend on call order
        let view_key = ((vw as u64) << 32) | vh as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(
            self.seed
                ^ stable_hash(&self.scene.stem)
                ^ view_key.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        );

        let mut out = Vec::new();
        for shape in &self.scene.shapes {
            let Some(class) = shape.detector_class() else {
                continue;
            };
            let Some(label) = self.label_for(shape.raw_label.as_deref(), class, vocabulary) else {
                continue;
            };
            let [x0, y0, x1, y1] = shape.rect.map(|v| v as f64);
            let view_box = [x0 * sx, y0 * sy, x1 * sx, y1 * sy];
            if let Some(limit) = self.noise.max_view_extent {
                let extent = (view_box[2] - view_box[0]).max(view_box[3] - view_box[1]);
                if extent > limit {
                    continue;
                }
            }
            for j in 0..self.noise.duplicates {
                let mut b = view_box;
                if j > 0 && self.noise.jitter_px > 0.0 {
                    let jit = self.noise.jitter_px;
                    for v in b.iter_mut() {
                        *v += rng.gen_range(-jit..=jit);
                    }
                }
                let clipped = BBox::new(b[0], b[1], b[2], b[3])
                    .ok()
                    .and_then(|bb| bb.clip(vw, vh));
                let Some(bbox) = clipped else { continue };
                out.push(RawDetection {
                    bbox,
                    label: label.clone(),
                    confidence: shape.confidence * DUPLICATE_DECAY.powi(j as i32),
                });
            }
        }
        if let Some(planted) = self.scene.full_image_false_positive {
            if let Some(label) = self.label_for(None, planted.class_id, vocabulary) {
                out.push(RawDetection {
                    bbox: BBox::new(0.0, 0.0, vw as f64, vh as f64).expect("non-empty view"),
                    label,
                    confidence: planted.confidence,
                });
            }
        }
        Ok(out)
    }
}

pub struct MockScorer {
    palette: Vec<([u8; 3], String)>,
    template: String,
    confusion: Option<f64>,
}

impl MockScorer {
    pub fn new(palette: Vec<([u8; 3], String)>, template: impl Into<String>) -> Self {
        Self {
            palette,
            template: template.into(),
            confusion: None,
        }
    }

    /// Move `epsilon` of the score mass from the true candidate to the next one.
    pub fn with_confusion(mut self, epsilon: f64) -> Self {
        self.confusion = Some(epsilon);
        self
    }

    /// Majority palette label inside the red-circle annotation.
    pub fn recognise(&self, patch: &Image) -> Result<Option<&str>, BackendError> {
        let q = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let rgb = |x: u32, y: u32| -> [u8; 3] {
            let c = patch.channels();
            [
                q(patch.get(0, x, y)),
                q(patch.get(1.min(c - 1), x, y)),
                q(patch.get(2.min(c - 1), x, y)),
            ]
        };
        let is_red = |p: [u8; 3]| p == PURE_RED;

        let (mut rx0, mut ry0, mut rx1, mut ry1) = (u32::MAX, u32::MAX, 0u32, 0u32);
        for y in 0..patch.height() {
            for x in 0..patch.width() {
                if is_red(rgb(x, y)) {
                    rx0 = rx0.min(x);
                    ry0 = ry0.min(y);
                    rx1 = rx1.max(x);
                    ry1 = ry1.max(y);
                }
            }
        }
        if rx0 == u32::MAX {
            return Err(BackendError::Precondition(
                "patch carries no red-circle annotation".into(),
            ));
        }
        let cx = (rx0 + rx1 + 1) as f64 / 2.0;
        let cy = (ry0 + ry1 + 1) as f64 / 2.0;
        let a = (rx1 + 1 - rx0) as f64 / 2.0;
        let b = (ry1 + 1 - ry0) as f64 / 2.0;

        let mut votes = vec![0usize; self.palette.len()];
        for y in ry0..=ry1 {
            for x in rx0..=rx1 {
                let dx = (x as f64 + 0.5 - cx) / a;
                let dy = (y as f64 + 0.5 - cy) / b;
                if dx * dx + dy * dy > 1.0 {
                    continue;
                }
                let p = rgb(x, y);
                if let Some(i) = self.palette.iter().position(|(c, _)| *c == p) {
                    votes[i] += 1;
                }
            }
        }
        let best = votes
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
            .map(|(i, _)| self.palette[i].1.as_str());
        Ok(best)
    }
}

impl ImageTextScorer for MockScorer {
    fn score(&mut self, patch: &Image, candidates: &[String]) -> Result<Vec<f64>, BackendError> {
        if candidates.is_empty() {
            return Err(BackendError::Precondition("no candidates".into()));
        }
        let mut scores = vec![0.0; candidates.len()];
        let Some(label) = self.recognise(patch)? else {
            return Ok(scores);
        };
        let wanted = render_template(&self.template, label);
        let Some(hit) = candidates
            .iter()
            .position(|c| c.eq_ignore_ascii_case(&wanted))
        else {
            return Ok(scores);
        };
        match self.confusion {
            Some(eps) if candidates.len() > 1 => {
                scores[hit] = 1.0 - eps;
                scores[(hit + 1) % candidates.len()] = eps;
            }
            _ => scores[hit] = 1.0,
        }
        Ok(scores)
    }
}

pub struct MockSegmenter {
    scene: SceneDescription,
}

impl MockSegmenter {
    pub fn new(scene: SceneDescription) -> Self {
        Self { scene }
    }
}

impl PointSegmenter for MockSegmenter {
    fn segment(&mut self, img: &Image, point: PixelCoord) -> Result<BinaryMask, BackendError> {
        check_point(img, point)?;
        if img.width() != self.scene.width || img.height() != self.scene.height {
            return Err(BackendError::Precondition(format!(
                "image {}x{} does not match scene `{}`",
                img.width(),
                img.height(),
                self.scene.stem
            )));
        }
        let (w, h) = (img.width(), img.height());
        Ok(match self.scene.shape_at(point.x, point.y) {
            Some(i) => {
                let [x0, y0, x1, y1] = self.scene.shapes[i].rect;
                BinaryMask::from_rect(w, h, x0, y0, x1, y1)
            }
            None => BinaryMask::empty(w, h),
        })
    }
}

/// Parameters for [`synthesize_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub width: u32,
    pub height: u32,
    /// `(class_id, name)` of the task classes objects are drawn from.
    pub classes: Vec<(ClassId, String)>,
    pub objects_per_scene: usize,
    pub distractors_per_scene: usize,
    pub distractor_labels: Vec<String>,
    /// Side range of ordinary objects.
    pub object_side: (u32, u32),
    /// Side range of the first object of every scene; `None` keeps it ordinary.
    pub large_object_side: Option<(u32, u32)>,
    pub plant_full_image_box: bool,
    pub background_label: Option<String>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            classes: vec![(1, "building".into()), (2, "lake".into())],
            objects_per_scene: 3,
            distractors_per_scene: 1,
            distractor_labels: vec!["car".into(), "basketball court".into()],
            object_side: (24, 64),
            large_object_side: None,
            plant_full_image_box: false,
            background_label: Some("ground".into()),
        }
    }
}

const BACKGROUND: [u8; 3] = [96, 84, 64];
const CLASS_COLORS: [[u8; 3]; 6] = [
    [200, 200, 210],
    [40, 90, 200],
    [30, 140, 60],
    [220, 200, 60],
    [150, 60, 160],
    [20, 200, 200],
];
const DISTRACTOR_COLORS: [[u8; 3]; 4] =
    [[240, 130, 20], [250, 250, 250], [10, 10, 10], [120, 40, 40]];

/// Random non-overlapping scenes. Every scene has `objects_per_scene` task
/// objects covering all classes (round robin) plus the distractors.
pub fn synthesize_corpus(count: usize, seed: u64, opts: &SynthOptions) -> Result<SceneCorpus> {
    if opts.classes.is_empty() || opts.classes.len() > CLASS_COLORS.len() {
        return Err(Error::InvalidArgument("1 to 6 classes supported".into()));
    }
    if opts.distractors_per_scene > 0
        && (opts.distractor_labels.is_empty()
            || opts.distractor_labels.len() > DISTRACTOR_COLORS.len())
    {
        return Err(Error::InvalidArgument(
            "1 to 4 distractor labels required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scenes = Vec::with_capacity(count);
    for n in 0..count {
        let mut shapes: Vec<SceneShape> = Vec::new();
        let total = opts.objects_per_scene + opts.distractors_per_scene;
        for k in 0..total {
            let side_range = match (k, opts.large_object_side) {
                (0, Some(r)) => r,
                _ => opts.object_side,
            };
            let rect = place(&mut rng, &shapes, opts.width, opts.height, side_range)?;
            let shape = if k < opts.objects_per_scene {
                let ci = k % opts.classes.len();
                let (id, name) = &opts.classes[ci];
                SceneShape {
                    rect,
                    color: CLASS_COLORS[ci],
                    label: name.clone(),
                    class_id: Some(*id),
                    detected_as: None,
                    raw_label: None,
                    confidence: rng.gen_range(0.55..0.95),
                }
            } else {
                let di = rng.gen_range(0..opts.distractor_labels.len());
                let (as_id, _) = &opts.classes[rng.gen_range(0..opts.classes.len())];
                SceneShape {
                    rect,
                    color: DISTRACTOR_COLORS[di],
                    label: opts.distractor_labels[di].clone(),
                    class_id: None,
                    detected_as: Some(*as_id),
                    raw_label: None,
                    confidence: rng.gen_range(0.55..0.95),
                }
            };
            shapes.push(shape);
        }
        scenes.push(SceneDescription {
            stem: format!("scene_{n:03}"),
            width: opts.width,
            height: opts.height,
            background: BACKGROUND,
            background_label: opts.background_label.clone(),
            full_image_false_positive: opts.plant_full_image_box.then_some(PlantedBox {
                class_id: opts.classes[0].0,
                confidence: 0.35,
            }),
            shapes,
        });
    }
    let corpus = SceneCorpus { scenes };
    corpus.validate()?;
    Ok(corpus)
}

fn place(
    rng: &mut ChaCha8Rng,
    existing: &[SceneShape],
    width: u32,
    height: u32,
    (lo, hi): (u32, u32),
) -> Result<[u32; 4]> {
    const GAP: u32 = 4;
    for _ in 0..10_000 {
        let w = rng.gen_range(lo..=hi);
        let h = rng.gen_range(lo..=hi);
        if w + 2 * GAP > width || h + 2 * GAP > height {
            break;
        }
        let x0 = rng.gen_range(GAP..=width - w - GAP);
        let y0 = rng.gen_range(GAP..=height - h - GAP);
        let r = [x0, y0, x0 + w, y0 + h];
        let clear = existing.iter().all(|s| {
            r[0] >= s.rect[2] + GAP
                || s.rect[0] >= r[2] + GAP
                || r[1] >= s.rect[3] + GAP
                || s.rect[1] >= r[3] + GAP
        });
        if clear {
            return Ok(r);
        }
    }
    Err(Error::InvalidArgument(
        "could not place shapes without overlap; enlarge the canvas".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::DEFAULT_TEMPLATE;

    fn shape(rect: [u32; 4], class_id: Option<ClassId>, label: &str, color: [u8; 3]) -> SceneShape {
        SceneShape {
            rect,
            color,
            label: label.into(),
            class_id,
            detected_as: None,
            raw_label: None,
            confidence: 0.8,
        }
    }

    fn scene() -> SceneDescription {
        SceneDescription {
            stem: "s".into(),
            width: 100,
            height: 80,
            background: BACKGROUND,
            background_label: Some("ground".into()),
            full_image_false_positive: None,
            shapes: vec![shape(
                [10, 10, 50, 50],
                Some(1),
                "building",
                CLASS_COLORS[0],
            )],
        }
    }

    fn vocab() -> Vec<(String, ClassId)> {
        vec![("roof".into(), 1), ("house".into(), 1)]
    }

    #[test]
    fn detector_echoes_scene() {
        let sc = scene();
        let img = sc.render();
        let mut d = MockDetector::new(sc, MockNoise::exact(), 0);
        let out = d.detect(&img, &vocab()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, BBox::new(10.0, 10.0, 50.0, 50.0).unwrap());
        assert_eq!(out[0].label, "roof");
        assert_eq!(out[0].confidence, 0.8);
    }

    #[test]
    fn detector_scales_to_view() {
        let sc = scene();
        let view = Image::filled(50, 40, &[0.0, 0.0, 0.0]).unwrap();
        let mut d = MockDetector::new(sc, MockNoise::exact(), 0);
        let out = d.detect(&view, &vocab()).unwrap();
        assert_eq!(out[0].bbox, BBox::new(5.0, 5.0, 25.0, 25.0).unwrap());
    }

    #[test]
    fn detector_needs_class_in_vocabulary() {
        let sc = scene();
        let img = sc.render();
        let mut d = MockDetector::new(sc, MockNoise::exact(), 0);
        assert!(d.detect(&img, &[("lake".into(), 2)]).unwrap().is_empty());
        assert!(d.detect(&img, &[]).is_err());
    }

    #[test]
    fn duplicate_noise_model() {
        let sc = scene();
        let img = sc.render();
        let noise = MockNoise {
            duplicates: 3,
            ..MockNoise::default()
        };
        let mut d = MockDetector::new(sc, noise, 7);
        let out = d.detect(&img, &vocab()).unwrap();
        assert_eq!(out.len(), 3);
        for (j, r) in out.iter().enumerate() {
            assert!((r.confidence - 0.8 * 0.9f64.powi(j as i32)).abs() < 1e-12);
            let truth = [10.0, 10.0, 50.0, 50.0];
            for (v, t) in r.bbox.to_array().iter().zip(truth) {
                assert!((v - t).abs() <= 2.0);
            }
        }
        // deterministic
        let again = MockDetector::new(scene(), noise, 7)
            .detect(&img, &vocab())
            .unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn max_view_extent_misses_large_objects() {
        let sc = scene();
        let noise = MockNoise {
            max_view_extent: Some(30.0),
            ..MockNoise::default()
        };
        let mut d = MockDetector::new(sc.clone(), noise, 0);
        assert!(d.detect(&sc.render(), &vocab()).unwrap().is_empty());
        let half = sc.render().resize_bilinear(50, 40).unwrap();
        assert_eq!(d.detect(&half, &vocab()).unwrap().len(), 1);
    }

    #[test]
    fn segmenter_oracle() {
        let mut sc = scene();
        sc.shapes
            .push(shape([20, 20, 30, 30], Some(2), "lake", CLASS_COLORS[1]));
        let img = sc.render();
        let mut s = MockSegmenter::new(sc);
        let outer = s.segment(&img, PixelCoord { x: 12, y: 12 }).unwrap();
        assert_eq!(outer, BinaryMask::from_rect(100, 80, 10, 10, 50, 50));
        // nested: smallest containing shape wins
        let inner = s.segment(&img, PixelCoord { x: 25, y: 25 }).unwrap();
        assert_eq!(inner, BinaryMask::from_rect(100, 80, 20, 20, 30, 30));
        assert!(s
            .segment(&img, PixelCoord { x: 80, y: 70 })
            .unwrap()
            .is_empty());
        assert!(s.segment(&img, PixelCoord { x: 100, y: 0 }).is_err());
    }

    fn annotated(sc: &SceneDescription, rect: [u32; 4]) -> Image {
        // hand-drawn ring around the rect interior
        let mut img = sc.render();
        let [x0, y0, x1, y1] = rect;
        for y in y0..y1 {
            for x in x0..x1 {
                if x == x0 || x == x1 - 1 || y == y0 || y == y1 - 1 {
                    img.set(0, x, y, 1.0);
                    img.set(1, x, y, 0.0);
                    img.set(2, x, y, 0.0);
                }
            }
        }
        img
    }

    #[test]
    fn scorer_reads_circled_color() {
        let mut sc = scene();
        sc.shapes
            .push(shape([60, 10, 90, 40], None, "car", DISTRACTOR_COLORS[0]));
        let corpus = SceneCorpus {
            scenes: vec![sc.clone()],
        };
        let mut scorer = MockScorer::new(corpus.palette().unwrap(), DEFAULT_TEMPLATE);
        let cands: Vec<String> = ["building", "lake", "car", "ground"]
            .iter()
            .map(|n| render_template(DEFAULT_TEMPLATE, n))
            .collect();
        let s = scorer
            .score(&annotated(&sc, [10, 10, 50, 50]), &cands)
            .unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0, 0.0]);
        let s = scorer
            .score(&annotated(&sc, [60, 10, 90, 40]), &cands)
            .unwrap();
        assert_eq!(s, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(scorer.score(&sc.render(), &cands).is_err());
    }

    #[test]
    fn scorer_confusion_keeps_argmax() {
        let sc = scene();
        let corpus = SceneCorpus {
            scenes: vec![sc.clone()],
        };
        let mut scorer =
            MockScorer::new(corpus.palette().unwrap(), DEFAULT_TEMPLATE).with_confusion(0.3);
        let cands: Vec<String> = ["building", "ground"]
            .iter()
            .map(|n| render_template(DEFAULT_TEMPLATE, n))
            .collect();
        let s = scorer
            .score(&annotated(&sc, [10, 10, 50, 50]), &cands)
            .unwrap();
        assert_eq!(s, vec![0.7, 0.3]);
    }

    #[test]
    fn ground_truth_ignores_distractors() {
        let mut sc = scene();
        sc.shapes
            .push(shape([60, 10, 90, 40], None, "car", DISTRACTOR_COLORS[0]));
        let gt = sc.ground_truth(2).unwrap();
        assert_eq!(gt.get(20, 20), 1);
        assert_eq!(gt.get(70, 20), 0);
        assert_eq!(gt.labels().iter().filter(|&&l| l == 1).count(), 1600);
    }

    #[test]
    fn synthesized_corpus_is_valid_and_deterministic() {
        let opts = SynthOptions::default();
        let a = synthesize_corpus(5, 3, &opts).unwrap();
        let b = synthesize_corpus(5, 3, &opts).unwrap();
        assert_eq!(a, b);
        for s in &a.scenes {
            assert_eq!(s.shapes.len(), 4);
            assert_eq!(s.distractors().count(), 1);
            let classes: std::collections::HashSet<_> =
                s.shapes.iter().filter_map(|x| x.class_id).collect();
            assert_eq!(classes.len(), 2);
        }
    }

    #[test]
    fn corpus_toml_round_trip() {
        let corpus = synthesize_corpus(2, 1, &SynthOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scenes.toml");
        corpus.save(&p).unwrap();
        assert_eq!(SceneCorpus::load(&p).unwrap(), corpus);
    }
}
