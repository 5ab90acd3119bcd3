mod common;

use proptest::prelude::*;

use common::{bbox, compare_report, metrics_oracle, nms_oracle};
use promptseg::backends::mock::{synthesize_corpus, MockDetector, MockNoise, SynthOptions};
use promptseg::clip_filter::{argmax, softmax};
use promptseg::detection::{detect_multiscale, DetectionConfig};
use promptseg::geometry::{
    centroid, iou, nms, project_to_original, project_to_view, remove_oversized, BBox, Detection,
};
use promptseg::mask::BinaryMask;
use promptseg::metrics::{compute_report, ConfusionMatrix};
use promptseg::prompts::{canonicalize, detector_vocabulary, ClassSpec, PromptSet};
use promptseg::segmentation::{assemble_label_mask, InstanceMask};
use promptseg::LabelMask;

fn arb_box(max: f64) -> impl Strategy<Value = BBox> {
    (0.0..max - 1.0, 0.0..max - 1.0, 0.5..max, 0.5..max)
        .prop_map(move |(x, y, w, h)| bbox([x, y, (x + w).min(max), (y + h).min(max)]))
}

fn arb_dets(max_len: usize) -> impl Strategy<Value = Vec<Detection>> {
    prop::collection::vec(
        (
            arb_box(100.0),
            1u8..=3,
            prop_oneof![Just(0.5), Just(0.9), 0.0..=1.0f64],
        ),
        0..=max_len,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (b, c, conf))| Detection::new(b, format!("d{i}"), c, conf, 1.0).unwrap())
            .collect()
    })
}

fn ids(dets: &[Detection]) -> Vec<usize> {
    dets.iter()
        .map(|d| d.raw_label[1..].parse().unwrap())
        .collect()
}

fn prompt_set() -> PromptSet {
    PromptSet::new(
        vec![
            ClassSpec {
                id: 1,
                name: "building".into(),
                synonyms: vec!["building".into(), "roof".into(), "house".into()],
            },
            ClassSpec {
                id: 2,
                name: "lake".into(),
                synonyms: vec!["lake".into(), "pond".into()],
            },
        ],
        vec!["ground".into(), "car".into()],
    )
    .unwrap()
}

fn arb_label_pair(k: u8) -> impl Strategy<Value = (LabelMask, LabelMask)> {
    let n = 8 * 6;
    (
        prop::collection::vec(0..=k, n),
        prop::collection::vec(0..=k, n),
    )
        .prop_map(move |(p, g)| {
            (
                LabelMask::from_vec(8, 6, k, p).unwrap(),
                LabelMask::from_vec(8, 6, k, g).unwrap(),
            )
        })
}

proptest! {
    #[test]
    fn iou_symmetric_and_bounded(a in arb_box(100.0), b in arb_box(100.0)) {
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nms_matches_oracle(dets in arb_dets(12), thr in prop_oneof![Just(0.1), 0.0..1.0f64]) {
        let kept = nms(&dets, thr);
        prop_assert_eq!(ids(&kept), nms_oracle(&dets, thr));
    }

    #[test]
    fn nms_subset_and_idempotent(dets in arb_dets(20), thr in 0.0..1.0f64) {
        let once = nms(&dets, thr);
        prop_assert!(once.iter().all(|d| dets.contains(d)));
        prop_assert_eq!(nms(&once, thr), once.clone());
        for (i, a) in once.iter().enumerate() {
            for b in &once[i + 1..] {
                if a.canonical_class == b.canonical_class {
                    prop_assert!(iou(&a.bbox, &b.bbox) <= thr);
                }
            }
        }
    }

    #[test]
    fn nms_threshold_one_keeps_everything(dets in arb_dets(20)) {
        prop_assert_eq!(nms(&dets, 1.0).len(), dets.len());
    }

    #[test]
    fn centroid_commutes_with_projection(b in arb_box(100.0), s in 0.25..4.0f64) {
        let c = centroid(&project_to_original(&b, s).unwrap());
        let c0 = centroid(&b);
        prop_assert!((c.x - c0.x / s).abs() < 1e-9 && (c.y - c0.y / s).abs() < 1e-9);
        let back = project_to_original(&project_to_view(&b, s).unwrap(), s).unwrap();
        for (x, y) in back.to_array().iter().zip(b.to_array()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn remove_oversized_at_full_fraction_is_identity(dets in arb_dets(10)) {
        prop_assert_eq!(remove_oversized(&dets, 100, 100, 1.0), dets);
    }

    #[test]
    fn softmax_normalized_and_shift_invariant(
        s in prop::collection::vec(-1000i32..1000, 1..16),
        shift in -100_000i32..100_000,
    ) {
        let s: Vec<f64> = s.into_iter().map(|v| v as f64 / 8.0).collect();
        let p = softmax(&s).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let q = softmax(&s.iter().map(|v| v + shift as f64).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(argmax(&p), argmax(&q));
    }

    #[test]
    fn assembly_ignores_instance_order(
        rects in prop::collection::vec((0u32..10, 0u32..10, 1u32..=10, 1u32..=10, 1u8..=2, 0usize..4), 0..6),
        seed in any::<u64>(),
    ) {
        let confs = [0.2, 0.5, 0.5, 0.9];
        let instances: Vec<InstanceMask> = rects
            .iter()
            .enumerate()
            .map(|(index, &(x, y, w, h, c, ci))| InstanceMask {
                mask: BinaryMask::from_rect(10, 10, x, y, (x + w).min(10), (y + h).min(10)),
                detection: Detection::new(bbox([0.0, 0.0, 1.0, 1.0]), "x", c, confs[ci], 1.0).unwrap(),
                index,
            })
            .collect();
        let mut shuffled = instances.clone();
        // deterministic permutation from the seed
        let n = shuffled.len();
        for i in (1..n).rev() {
            shuffled.swap(i, (seed as usize).wrapping_mul(i + 7) % (i + 1));
        }
        prop_assert_eq!(
            assemble_label_mask(&instances, 10, 10, 2).unwrap(),
            assemble_label_mask(&shuffled, 10, 10, 2).unwrap()
        );
    }

    #[test]
    fn metrics_match_oracle((pred, gt) in arb_label_pair(3)) {
        let mut cm = ConfusionMatrix::new(3);
        cm.accumulate(&pred, &gt).unwrap();
        let r = compute_report(&cm).unwrap();
        let o = metrics_oracle(&[(pred, gt)], 3);
        prop_assert_eq!(compare_report(&r, &o, 1e-12), None);
        for c in &r.per_class {
            if let (Some(i), Some(d)) = (c.iou, c.dice) {
                prop_assert!((d - 2.0 * i / (1.0 + i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn metrics_invariant_under_foreground_relabeling((pred, gt) in arb_label_pair(3)) {
        let swap = |m: &LabelMask| {
            let l = m.labels().iter().map(|&v| match v { 1 => 3, 3 => 1, v => v }).collect();
            LabelMask::from_vec(m.width(), m.height(), 3, l).unwrap()
        };
        let report = |p: &LabelMask, g: &LabelMask| {
            let mut cm = ConfusionMatrix::new(3);
            cm.accumulate(p, g).unwrap();
            compute_report(&cm).unwrap()
        };
        let a = report(&pred, &gt);
        let b = report(&swap(&pred), &swap(&gt));
        for (x, y) in [(a.miou, b.miou), (a.dice, b.dice), (a.pixel_precision, b.pixel_precision)] {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                (x, y) => prop_assert_eq!(x, y),
            }
        }
        prop_assert_eq!(a.pixel_accuracy, b.pixel_accuracy);
    }

    #[test]
    fn accumulation_is_additive(pairs in prop::collection::vec(arb_label_pair(2), 1..5)) {
        let mut whole = ConfusionMatrix::new(2);
        let mut parts = ConfusionMatrix::new(2);
        for (i, (p, g)) in pairs.iter().enumerate() {
            whole.accumulate(p, g).unwrap();
            let mut one = ConfusionMatrix::new(2);
            one.accumulate(p, g).unwrap();
            if i == 0 { parts = one } else { parts.merge(&one).unwrap() }
        }
        prop_assert_eq!(whole, parts);
    }

    #[test]
    fn canonicalize_covers_vocabulary(upper in any::<bool>()) {
        let ps = prompt_set();
        for (text, class) in detector_vocabulary(&ps) {
            let t = if upper { text.to_uppercase() } else { text.clone() };
            prop_assert_eq!(canonicalize(&t, &ps), Some(class));
        }
        prop_assert_eq!(canonicalize("car", &ps), None);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn detection_ignores_scale_order(seed in any::<u64>()) {
        let ps = prompt_set();
        let opts = SynthOptions { large_object_side: Some((90, 110)), ..SynthOptions::default() };
        let scene = synthesize_corpus(1, seed, &opts).unwrap().scenes.remove(0);
        let img = scene.render();
        let noise = MockNoise { duplicates: 3, jitter_px: 2.0, max_view_extent: Some(80.0) };
        let mut det = MockDetector::new(scene.clone(), noise, seed);

        let fwd = DetectionConfig { scales: vec![0.5, 1.0, 1.5], ..DetectionConfig::default() };
        let rev = DetectionConfig { scales: vec![1.5, 1.0, 0.5], ..DetectionConfig::default() };
        let a = detect_multiscale(&img, &ps, &mut det, &fwd).unwrap();
        prop_assert_eq!(&a, &detect_multiscale(&img, &ps, &mut det, &rev).unwrap());
    }

    #[test]
    fn passthrough_detection_keeps_all_raw_boxes(seed in any::<u64>()) {
        let ps = prompt_set();
        let scene = synthesize_corpus(1, seed, &SynthOptions::default()).unwrap().scenes.remove(0);
        let img = scene.render();
        let noise = MockNoise { duplicates: 2, jitter_px: 1.0, max_view_extent: None };
        let mut det = MockDetector::new(scene.clone(), noise, seed);
        let out = detect_multiscale(&img, &ps, &mut det, &DetectionConfig::passthrough()).unwrap();
        // every shape reported by the detector, including distractors, twice
        prop_assert_eq!(out.len(), 2 * scene.shapes.len());
    }
}
