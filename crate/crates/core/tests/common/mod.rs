//! Reference implementations written independently of the library, used as
//! test oracles.

#![allow(dead_code)]

use std::collections::HashSet;

use promptseg::clip_filter::Ellipse;
use promptseg::geometry::{BBox, Detection};
use promptseg::mask::LabelMask;
use promptseg::metrics::EvalReport;

pub fn box_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix0 = if a[0] > b[0] { a[0] } else { b[0] };
    let iy0 = if a[1] > b[1] { a[1] } else { b[1] };
    let ix1 = if a[2] < b[2] { a[2] } else { b[2] };
    let iy1 = if a[3] < b[3] { a[3] } else { b[3] };
    if ix1 <= ix0 || iy1 <= iy0 {
        return 0.0;
    }
    let inter = (ix1 - ix0) * (iy1 - iy0);
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    (inter / (area(a) + area(b) - inter)).clamp(0.0, 1.0)
}

/// Greedy suppression by repeated selection: take the most confident
/// remaining detection (lowest index on ties), drop every remaining
/// same-class detection overlapping it above the threshold, repeat.
pub fn nms_oracle(dets: &[Detection], thr: f64) -> Vec<usize> {
    let mut alive: Vec<bool> = vec![true; dets.len()];
    let mut kept = Vec::new();
    loop {
        let mut pick: Option<usize> = None;
        for i in 0..dets.len() {
            if !alive[i] {
                continue;
            }
            pick = match pick {
                Some(p) if dets[p].confidence >= dets[i].confidence => Some(p),
                _ => Some(i),
            };
        }
        let Some(p) = pick else { break };
        alive[p] = false;
        kept.push(p);
        for j in 0..dets.len() {
            if alive[j]
                && dets[j].canonical_class == dets[p].canonical_class
                && box_iou(dets[p].bbox.to_array(), dets[j].bbox.to_array()) > thr
            {
                alive[j] = false;
            }
        }
    }
    kept
}

pub struct OracleClass {
    pub iou: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub dice: Option<f64>,
}

pub struct OracleReport {
    pub miou: Option<f64>,
    pub pixel_accuracy: f64,
    pub pixel_precision: Option<f64>,
    pub pixel_recall: Option<f64>,
    pub dice: Option<f64>,
    pub classes: Vec<OracleClass>,
}

fn frac(n: usize, d: usize) -> Option<f64> {
    if d == 0 {
        None
    } else {
        Some(n as f64 / d as f64)
    }
}

fn avg(v: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = v.iter().filter_map(|x| *x).collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Per-class scores from pixel index sets over all `(pred, gt)` pairs.
pub fn metrics_oracle(pairs: &[(LabelMask, LabelMask)], class_number: u8) -> OracleReport {
    let mut classes = Vec::new();
    let mut correct = 0usize;
    let mut total = 0usize;
    for (pred, gt) in pairs {
        total += gt.labels().len();
        correct += pred
            .labels()
            .iter()
            .zip(gt.labels())
            .filter(|(p, g)| p == g)
            .count();
    }
    for c in 1..=class_number {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (img, (pred, gt)) in pairs.iter().enumerate() {
            let p: HashSet<(usize, usize)> = pred
                .labels()
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == c)
                .map(|(i, _)| (img, i))
                .collect();
            let g: HashSet<(usize, usize)> = gt
                .labels()
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == c)
                .map(|(i, _)| (img, i))
                .collect();
            tp += p.intersection(&g).count();
            fp += p.difference(&g).count();
            fn_ += g.difference(&p).count();
        }
        classes.push(OracleClass {
            iou: frac(tp, tp + fp + fn_),
            precision: frac(tp, tp + fp),
            recall: frac(tp, tp + fn_),
            dice: frac(2 * tp, 2 * tp + fp + fn_),
        });
    }
    OracleReport {
        miou: avg(&classes.iter().map(|c| c.iou).collect::<Vec<_>>()),
        pixel_accuracy: correct as f64 / total as f64,
        pixel_precision: avg(&classes.iter().map(|c| c.precision).collect::<Vec<_>>()),
        pixel_recall: avg(&classes.iter().map(|c| c.recall).collect::<Vec<_>>()),
        dice: avg(&classes.iter().map(|c| c.dice).collect::<Vec<_>>()),
        classes,
    }
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        _ => false,
    }
}

/// First mismatch between a report and the oracle, if any.
pub fn compare_report(r: &EvalReport, o: &OracleReport, tol: f64) -> Option<String> {
    let top = [
        ("miou", r.miou, o.miou),
        ("pa", Some(r.pixel_accuracy), Some(o.pixel_accuracy)),
        ("pp", r.pixel_precision, o.pixel_precision),
        ("pr", r.pixel_recall, o.pixel_recall),
        ("dice", r.dice, o.dice),
    ];
    for (name, a, b) in top {
        if !close(a, b, tol) {
            return Some(format!("{name}: {a:?} vs oracle {b:?}"));
        }
    }
    for (rc, oc) in r.per_class.iter().zip(&o.classes) {
        let rows = [
            ("iou", rc.iou, oc.iou),
            ("precision", rc.precision, oc.precision),
            ("recall", rc.recall, oc.recall),
            ("dice", rc.dice, oc.dice),
        ];
        for (name, a, b) in rows {
            if !close(a, b, tol) {
                return Some(format!(
                    "class {} {name}: {a:?} vs oracle {b:?}",
                    rc.class_id
                ));
            }
        }
    }
    None
}

/// Distance from `(px, py)` to the ellipse curve by dense angular sampling
/// followed by golden-section refinement around the best sample.
pub fn ellipse_distance_oracle(e: &Ellipse, px: f64, py: f64) -> f64 {
    let d2 = |t: f64| {
        let x = e.center.x + e.radius_x * t.cos();
        let y = e.center.y + e.radius_y * t.sin();
        (x - px).powi(2) + (y - py).powi(2)
    };
    const N: usize = 4096;
    let step = std::f64::consts::TAU / N as f64;
    let mut best = 0.0;
    let mut best_v = f64::INFINITY;
    for k in 0..N {
        let t = k as f64 * step;
        let v = d2(t);
        if v < best_v {
            best_v = v;
            best = t;
        }
    }
    let (mut lo, mut hi) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if d2(a) < d2(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    best_v.min(d2((lo + hi) / 2.0)).sqrt()
}

pub fn bbox(b: [f64; 4]) -> BBox {
    BBox::new(b[0], b[1], b[2], b[3]).unwrap()
}
