//! Visual-prompt filtering of detections.
//!
//! Each detection is cropped with context (the box scaled about its center by
//! a magnification factor), its original footprint is outlined by a red
//! ellipse, and the annotated patch is scored against the related and
//! unrelated candidate prompts. Softmax distributions from all
//! magnifications are averaged; the detection survives only when the winning
//! candidate is task-related and names the detection's own class.

use serde::{Deserialize, Serialize};

use crate::backends::ImageTextScorer;
use crate::error::{BackendError, Error, Result};
use crate::geometry::{centroid, BBox, ClassId, Detection, Point};
use crate::prompts::{
    scorer_candidates, validate_template, Candidate, PromptSet, DEFAULT_TEMPLATE,
};
use crate::raster::Image;

/// Axis-aligned ellipse, in patch pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Point,
    pub radius_x: f64,
    pub radius_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPatch {
    /// Magnified box clipped to the image, in original coordinates.
    pub crop: BBox,
    /// Top-left original-image pixel of `pixels`.
    pub origin: (u32, u32),
    pub magnification: f64,
    pub pixels: Image,
    /// Inscribed ellipse of the source box.
    pub ellipse: Ellipse,
    pub annotated: bool,
}

pub fn extend_patch(img: &Image, bbox: &BBox, magnification: f64) -> Result<ExtendedPatch> {
    if !(magnification >= 1.0 && magnification.is_finite()) {
        return Err(Error::Precondition(format!(
            "magnification {magnification} must be >= 1"
        )));
    }
    let (w, h) = (img.width(), img.height());
    if !bbox.is_within(w, h) {
        return Err(Error::Precondition(format!(
            "box {:?} lies outside the {w}x{h} image",
            bbox.to_array()
        )));
    }
    let crop = bbox
        .scale_about_center(magnification)?
        .clip(w, h)
        .expect("magnified box contains the source box");
    let px0 = crop.x_min().floor() as u32;
    let py0 = crop.y_min().floor() as u32;
    let px1 = (crop.x_max().ceil() as u32).min(w);
    let py1 = (crop.y_max().ceil() as u32).min(h);
    let pixels = img.crop(px0, py0, px1 - px0, py1 - py0)?;
    let c = centroid(bbox);
    Ok(ExtendedPatch {
        crop,
        origin: (px0, py0),
        magnification,
        pixels,
        ellipse: Ellipse {
            center: Point::new(c.x - px0 as f64, c.y - py0 as f64),
            radius_x: bbox.width() / 2.0,
            radius_y: bbox.height() / 2.0,
        },
        annotated: false,
    })
}

/// `max(2, round(0.02 * diagonal))` pixels.
pub fn stroke_width(width: u32, height: u32) -> u32 {
    let diag = (width as f64).hypot(height as f64);
    ((0.02 * diag).round() as u32).max(2)
}

/// Euclidean distance from `p` to the curve of `e`.
pub fn distance_to_ellipse(e: &Ellipse, p: Point) -> f64 {
    let y0 = (p.x - e.center.x).abs();
    let y1 = (p.y - e.center.y).abs();
    if e.radius_x >= e.radius_y {
        distance_first_quadrant(e.radius_x, e.radius_y, y0, y1)
    } else {
        distance_first_quadrant(e.radius_y, e.radius_x, y1, y0)
    }
}

// Eberly, "Distance from a Point to an Ellipse"; requires e0 >= e1 > 0, y0, y1 >= 0.
fn distance_first_quadrant(e0: f64, e1: f64, y0: f64, y1: f64) -> f64 {
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g == 0.0 {
                return 0.0;
            }
            let r0 = (e0 / e1) * (e0 / e1);
            let s = ellipse_root(r0, z0, z1, g);
            let x0 = r0 * y0 / (s + r0);
            let x1 = y1 / (s + 1.0);
            (x0 - y0).hypot(x1 - y1)
        } else {
            (y1 - e1).abs()
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let xde = numer / denom;
            let x0 = e0 * xde;
            let x1 = e1 * (1.0 - xde * xde).max(0.0).sqrt();
            (x0 - y0).hypot(x1)
        } else {
            (y0 - e0).abs()
        }
    }
}

fn ellipse_root(r0: f64, z0: f64, z1: f64, g: f64) -> f64 {
    let n0 = r0 * z0;
    let mut s0 = z1 - 1.0;
    let mut s1 = if g < 0.0 { 0.0 } else { n0.hypot(z1) - 1.0 };
    let mut s = 0.0;
    for _ in 0..1100 {
        s = (s0 + s1) / 2.0;
        if s == s0 || s == s1 {
            break;
        }
        let a = n0 / (s + r0);
        let b = z1 / (s + 1.0);
        let g = a * a + b * b - 1.0;
        if g > 0.0 {
            s0 = s;
        } else if g < 0.0 {
            s1 = s;
        } else {
            break;
        }
    }
    s
}

/// Paint the ellipse as a pure-red stroke onto a copy of the patch.
///
/// A pixel is on the stroke when its center lies within half the stroke
/// width of the ellipse curve.
pub fn draw_red_circle(patch: &ExtendedPatch) -> Result<ExtendedPatch> {
    if patch.annotated {
        return Err(Error::Precondition("patch is already annotated".into()));
    }
    let mut out = patch.clone();
    let (w, h) = (out.pixels.width(), out.pixels.height());
    let half = stroke_width(w, h) as f64 / 2.0;
    let e = out.ellipse;
    for y in 0..h {
        for x in 0..w {
            let p = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            if distance_to_ellipse(&e, p) <= half {
                out.pixels.set(0, x, y, 1.0);
                for c in 1..out.pixels.channels() {
                    out.pixels.set(c, x, y, 0.0);
                }
            }
        }
    }
    out.annotated = true;
    Ok(out)
}

/// Numerically stable softmax. Scores must be finite.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] >= *v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnificationScores {
    pub magnification: f64,
    pub raw_scores: Vec<f64>,
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    /// Softmax distribution, averaged over magnifications when there are several.
    pub probabilities: Vec<f64>,
    pub argmax: usize,
    pub matched_class: Option<ClassId>,
    pub per_magnification: Vec<MagnificationScores>,
}

pub fn score_patch(
    annotated: &ExtendedPatch,
    candidates: &[Candidate],
    scorer: &mut dyn ImageTextScorer,
) -> Result<SimilarityResult> {
    if !annotated.annotated {
        return Err(Error::Precondition("patch has no visual prompt".into()));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no scorer candidates".into()));
    }
    let texts: Vec<String> = candidates.iter().map(|c| c.text.clone()).collect();
    let backend = |source| Error::Backend {
        image: String::new(),
        source,
    };
    let raw = scorer.score(&annotated.pixels, &texts).map_err(backend)?;
    if raw.len() != candidates.len() {
        return Err(backend(BackendError::Failure(format!(
            "{} scores for {} candidates",
            raw.len(),
            candidates.len()
        ))));
    }
    let probabilities = softmax(&raw).map_err(|e| backend(BackendError::Failure(e.to_string())))?;
    let best = argmax(&probabilities).expect("non-empty");
    Ok(SimilarityResult {
        argmax: best,
        matched_class: candidates[best].class_id,
        per_magnification: vec![MagnificationScores {
            magnification: annotated.magnification,
            raw_scores: raw,
            probabilities: probabilities.clone(),
        }],
        probabilities,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub magnifications: Vec<f64>,
    pub template: String,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            magnifications: vec![1.2, 1.5],
            template: DEFAULT_TEMPLATE.to_string(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.magnifications.is_empty() {
            return Err(Error::Config(
                "at least one magnification is required".into(),
            ));
        }
        if let Some(m) = self
            .magnifications
            .iter()
            .find(|m| !(**m >= 1.0 && m.is_finite()))
        {
            return Err(Error::Config(format!("magnification {m} must be >= 1")));
        }
        validate_template(&self.template)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterDecision {
    pub detection: Detection,
    pub kept: bool,
    pub similarity: SimilarityResult,
    /// Annotated patches, one per magnification, when requested.
    pub patches: Vec<ExtendedPatch>,
}

pub fn filter_detections(
    dets: &[Detection],
    img: &Image,
    ps: &PromptSet,
    scorer: &mut dyn ImageTextScorer,
    cfg: &FilterConfig,
) -> Result<Vec<Detection>> {
    Ok(filter_traced(dets, img, ps, scorer, cfg, false)?
        .into_iter()
        .filter(|d| d.kept)
        .map(|d| d.detection)
        .collect())
}

/// Per-detection decisions in input order.
pub fn filter_traced(
    dets: &[Detection],
    img: &Image,
    ps: &PromptSet,
    scorer: &mut dyn ImageTextScorer,
    cfg: &FilterConfig,
    keep_patches: bool,
) -> Result<Vec<FilterDecision>> {
    cfg.validate()?;
    let candidates = scorer_candidates(ps, &cfg.template);
    let mut out = Vec::with_capacity(dets.len());
    for det in dets {
        let mut per_magnification = Vec::with_capacity(cfg.magnifications.len());
        let mut patches = Vec::new();
        let mut mean = vec![0.0; candidates.len()];
        for &m in &cfg.magnifications {
            let patch = draw_red_circle(&extend_patch(img, &det.bbox, m)?)?;
            let r = score_patch(&patch, &candidates, scorer)?;
            for (acc, p) in mean.iter_mut().zip(&r.probabilities) {
                *acc += p;
            }
            per_magnification.extend(r.per_magnification);
            if keep_patches {
                patches.push(patch);
            }
        }
        let n = cfg.magnifications.len() as f64;
        mean.iter_mut().for_each(|p| *p /= n);
        let best = argmax(&mean).expect("non-empty candidates");
        let matched_class = candidates[best].class_id;
        out.push(FilterDecision {
            detection: det.clone(),
            kept: matched_class == Some(det.canonical_class),
            similarity: SimilarityResult {
                probabilities: mean,
                argmax: best,
                matched_class,
                per_magnification,
            },
            patches,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::ClassSpec;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn gray(w: u32, h: u32) -> Image {
        Image::filled(w, h, &[0.4, 0.5, 0.6]).unwrap()
    }

    #[test]
    fn identity_magnification() {
        let img = gray(512, 512);
        let p = extend_patch(&img, &b(100.0, 100.0, 200.0, 200.0), 1.0).unwrap();
        assert_eq!(p.crop, b(100.0, 100.0, 200.0, 200.0));
        assert_eq!((p.pixels.width(), p.pixels.height()), (100, 100));
        assert_eq!(p.ellipse.center, Point::new(50.0, 50.0));
        assert_eq!((p.ellipse.radius_x, p.ellipse.radius_y), (50.0, 50.0));
        assert!(!p.annotated);
    }

    #[test]
    fn magnified_crop() {
        let img = gray(512, 512);
        let p = extend_patch(&img, &b(100.0, 100.0, 200.0, 200.0), 1.5).unwrap();
        assert_eq!(p.crop, b(75.0, 75.0, 225.0, 225.0));
        assert_eq!(p.origin, (75, 75));
        assert_eq!(p.ellipse.center, Point::new(75.0, 75.0));
    }

    #[test]
    fn crop_clipped_at_left_edge() {
        let img = gray(512, 512);
        // width 50 -> magnified 60, would start at x = -5
        let p = extend_patch(&img, &b(0.0, 100.0, 50.0, 150.0), 1.2).unwrap();
        assert_eq!(p.crop, b(0.0, 95.0, 55.0, 155.0));
        assert_eq!(p.origin, (0, 95));
        assert_eq!(p.ellipse.center, Point::new(25.0, 30.0));
        assert_eq!((p.ellipse.radius_x, p.ellipse.radius_y), (25.0, 25.0));
    }

    #[test]
    fn extend_patch_preconditions() {
        let img = gray(64, 64);
        assert!(extend_patch(&img, &b(0.0, 0.0, 10.0, 10.0), 0.9).is_err());
        assert!(extend_patch(&img, &b(60.0, 0.0, 70.0, 10.0), 1.2).is_err());
    }

    #[test]
    fn stroke_width_formula() {
        assert_eq!(stroke_width(100, 100), 3);
        assert_eq!(stroke_width(20, 20), 2);
        assert_eq!(stroke_width(300, 400), 10);
    }

    #[test]
    fn ellipse_distance_cases() {
        let circle = Ellipse {
            center: Point::new(0.0, 0.0),
            radius_x: 5.0,
            radius_y: 5.0,
        };
        assert!((distance_to_ellipse(&circle, Point::new(3.0, 4.0))).abs() < 1e-12);
        assert!((distance_to_ellipse(&circle, Point::new(0.0, 0.0)) - 5.0).abs() < 1e-12);
        assert!((distance_to_ellipse(&circle, Point::new(6.0, 8.0)) - 5.0).abs() < 1e-12);
        let e = Ellipse {
            center: Point::new(10.0, 10.0),
            radius_x: 4.0,
            radius_y: 2.0,
        };
        assert!((distance_to_ellipse(&e, Point::new(10.0, 15.0)) - 3.0).abs() < 1e-12);
        assert!((distance_to_ellipse(&e, Point::new(20.0, 10.0)) - 6.0).abs() < 1e-12);
        // tall ellipse exercises the axis swap
        let t = Ellipse {
            center: Point::new(0.0, 0.0),
            radius_x: 2.0,
            radius_y: 4.0,
        };
        assert!((distance_to_ellipse(&t, Point::new(0.0, 7.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn red_circle_copy_semantics() {
        let img = gray(64, 64);
        let p = extend_patch(&img, &b(10.0, 10.0, 40.0, 30.0), 1.2).unwrap();
        let a = draw_red_circle(&p).unwrap();
        assert!(a.annotated);
        assert_eq!(
            p.pixels,
            extend_patch(&img, &b(10.0, 10.0, 40.0, 30.0), 1.2)
                .unwrap()
                .pixels
        );
        let mut changed = 0;
        for y in 0..a.pixels.height() {
            for x in 0..a.pixels.width() {
                if a.pixels.pixel(x, y) != p.pixels.pixel(x, y) {
                    changed += 1;
                    assert_eq!(a.pixels.pixel(x, y), vec![1.0, 0.0, 0.0]);
                }
            }
        }
        assert!(changed > 0);
        assert!(draw_red_circle(&a).is_err());
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[2.0, 1.0, 1.0]).unwrap();
        let e = std::f64::consts::E;
        let z = e * e + 2.0 * e;
        assert!((p[0] - e * e / z).abs() < 1e-15);
        assert!((p[1] - e / z).abs() < 1e-15);
        assert_eq!(argmax(&p), Some(0));

        let flat = softmax(&[3.0; 5]).unwrap();
        assert!(flat.iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert_eq!(argmax(&flat), Some(0));

        let shifted = softmax(&[102.0, 101.0, 101.0]).unwrap();
        for (a, b) in p.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(softmax(&[]).is_err());
        assert!(softmax(&[f64::NAN]).is_err());
        let extreme = softmax(&[1e300, -1e300, 0.0]).unwrap();
        assert_eq!(extreme, vec![1.0, 0.0, 0.0]);
    }

    struct Fixed(Vec<Vec<f64>>, usize);
    impl ImageTextScorer for Fixed {
        fn score(
            &mut self,
            _: &Image,
            c: &[String],
        ) -> std::result::Result<Vec<f64>, BackendError> {
            let s = self.0[self.1 % self.0.len()].clone();
            self.1 += 1;
            assert_eq!(s.len(), c.len());
            Ok(s)
        }
    }

    fn two_class_prompts() -> PromptSet {
        PromptSet::new(
            vec![
                ClassSpec {
                    id: 1,
                    name: "building".into(),
                    synonyms: vec![],
                },
                ClassSpec {
                    id: 2,
                    name: "lake".into(),
                    synonyms: vec![],
                },
            ],
            vec!["ground".into()],
        )
        .unwrap()
    }

    fn det(class: ClassId) -> Detection {
        Detection::new(b(10.0, 10.0, 30.0, 30.0), "x", class, 0.9, 1.0).unwrap()
    }

    #[test]
    fn keep_rule_truth_table() {
        let img = gray(64, 64);
        let ps = two_class_prompts();
        let cfg = FilterConfig {
            magnifications: vec![1.2],
            ..Default::default()
        };
        // candidates: [building, lake, ground]
        let cases = [
            (vec![5.0, 0.0, 0.0], 1, true),
            (vec![5.0, 0.0, 0.0], 2, false),
            (vec![0.0, 5.0, 0.0], 2, true),
            (vec![0.0, 0.0, 5.0], 1, false),
            (vec![0.0, 0.0, 0.0], 1, true),
            (vec![0.0, 0.0, 0.0], 2, false),
        ];
        for (scores, class, keep) in cases {
            let mut s = Fixed(vec![scores.clone()], 0);
            let d = filter_traced(&[det(class)], &img, &ps, &mut s, &cfg, false).unwrap();
            assert_eq!(d[0].kept, keep, "{scores:?} class {class}");
        }
    }

    #[test]
    fn magnifications_are_averaged() {
        let img = gray(64, 64);
        let ps = two_class_prompts();
        // one patch favours lake strongly, the other building weakly
        let mut s = Fixed(vec![vec![1.0, 0.0, 0.0], vec![0.0, 4.0, 0.0]], 0);
        let d = filter_traced(
            &[det(2)],
            &img,
            &ps,
            &mut s,
            &FilterConfig::default(),
            false,
        )
        .unwrap();
        let r = &d[0].similarity;
        assert_eq!(r.per_magnification.len(), 2);
        assert!((r.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.argmax, 1);
        assert!(d[0].kept);
    }

    #[test]
    fn score_patch_requires_annotation() {
        let img = gray(64, 64);
        let p = extend_patch(&img, &b(10.0, 10.0, 30.0, 30.0), 1.0).unwrap();
        let c = scorer_candidates(&two_class_prompts(), DEFAULT_TEMPLATE);
        let mut s = Fixed(vec![vec![0.0; 3]], 0);
        assert!(score_patch(&p, &c, &mut s).is_err());
        let a = draw_red_circle(&p).unwrap();
        let r = score_patch(&a, &c, &mut s).unwrap();
        assert_eq!(r.argmax, 0);
        assert_eq!(r.matched_class, Some(1));
    }

    #[test]
    fn wrong_score_count_is_backend_error() {
        struct Short;
        impl ImageTextScorer for Short {
            fn score(
                &mut self,
                _: &Image,
                _: &[String],
            ) -> std::result::Result<Vec<f64>, BackendError> {
                Ok(vec![1.0])
            }
        }
        let img = gray(64, 64);
        let err = filter_detections(
            &[det(1)],
            &img,
            &two_class_prompts(),
            &mut Short,
            &FilterConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Backend { .. }));
    }
}
