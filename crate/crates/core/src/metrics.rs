//! Confusion-matrix segmentation metrics.
//!
//! Per-class scores cover the foreground classes `1..=K`. Class-level means
//! are macro averages over the classes where the score is defined (non-zero
//! denominator); a class absent from both ground truth and prediction is
//! excluded rather than counted as perfect. Pixel accuracy counts every
//! pixel, background included.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ClassId;
use crate::mask::LabelMask;

/// `(K + 1) x (K + 1)` counts; rows are ground truth, columns prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    class_number: ClassId,
    counts: Vec<u64>,
    images: usize,
}

impl ConfusionMatrix {
    pub fn new(class_number: ClassId) -> Self {
        let n = class_number as usize + 1;
        Self {
            class_number,
            counts: vec![0; n * n],
            images: 0,
        }
    }

    pub fn class_number(&self) -> ClassId {
        self.class_number
    }

    fn side(&self) -> usize {
        self.class_number as usize + 1
    }

    pub fn get(&self, gt: ClassId, pred: ClassId) -> u64 {
        self.counts[gt as usize * self.side() + pred as usize]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn images(&self) -> usize {
        self.images
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn accumulate(&mut self, pred: &LabelMask, gt: &LabelMask) -> Result<()> {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::Dimension(format!(
                "prediction is {}x{}, ground truth is {}x{}",
                pred.width(),
                pred.height(),
                gt.width(),
                gt.height()
            )));
        }
        if pred.class_number() > self.class_number || gt.class_number() > self.class_number {
            return Err(Error::Dimension(format!(
                "masks with {} / {} classes do not fit a {}-class matrix",
                pred.class_number(),
                gt.class_number(),
                self.class_number
            )));
        }
        let side = self.side();
        for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
            self.counts[g as usize * side + p as usize] += 1;
        }
        self.images += 1;
        Ok(())
    }

    /// Elementwise sum; partial matrices from parallel workers merge this way.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.class_number != self.class_number {
            return Err(Error::Dimension("class numbers differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.images += other.images;
        Ok(())
    }

    fn tp_fp_fn(&self, c: ClassId) -> (u64, u64, u64) {
        let tp = self.get(c, c);
        let col: u64 = (0..=self.class_number).map(|g| self.get(g, c)).sum();
        let row: u64 = (0..=self.class_number).map(|p| self.get(c, p)).sum();
        (tp, col - tp, row - tp)
    }
}

/// Functional form of [`ConfusionMatrix::accumulate`].
pub fn accumulate(
    mut cm: ConfusionMatrix,
    pred: &LabelMask,
    gt: &LabelMask,
) -> Result<ConfusionMatrix> {
    cm.accumulate(pred, gt)?;
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class_id: ClassId,
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
    pub iou: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub dice: Option<f64>,
}

/// Aggregate scores; `None` marks a metric with no defined class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub miou: Option<f64>,
    pub pixel_accuracy: f64,
    pub pixel_precision: Option<f64>,
    pub pixel_recall: Option<f64>,
    pub dice: Option<f64>,
    pub per_class: Vec<ClassScores>,
    pub image_count: usize,
    pub pixel_count: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, n) = values
        .flatten()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn compute_report(cm: &ConfusionMatrix) -> Result<EvalReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let per_class: Vec<ClassScores> = (1..=cm.class_number)
        .map(|c| {
            let (tp, fp, fn_) = cm.tp_fp_fn(c);
            ClassScores {
                class_id: c,
                true_positive: tp,
                false_positive: fp,
                false_negative: fn_,
                iou: ratio(tp, tp + fp + fn_),
                precision: ratio(tp, tp + fp),
                recall: ratio(tp, tp + fn_),
                dice: ratio(2 * tp, 2 * tp + fp + fn_),
            }
        })
        .collect();
    let trace: u64 = (0..=cm.class_number).map(|c| cm.get(c, c)).sum();
    Ok(EvalReport {
        miou: mean(per_class.iter().map(|c| c.iou)),
        pixel_accuracy: trace as f64 / total as f64,
        pixel_precision: mean(per_class.iter().map(|c| c.precision)),
        pixel_recall: mean(per_class.iter().map(|c| c.recall)),
        dice: mean(per_class.iter().map(|c| c.dice)),
        per_class,
        image_count: cm.images,
        pixel_count: total,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", v * 100.0))
}

impl EvalReport {
    /// Human-readable table: aggregate columns then one row per class.
    pub fn to_table(&self, class_names: &[String]) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "", "MIoU", "PA", "PP", "PR", "Dice"
        ));
        s.push_str(&format!(
            "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "overall",
            pct(self.miou),
            pct(Some(self.pixel_accuracy)),
            pct(self.pixel_precision),
            pct(self.pixel_recall),
            pct(self.dice)
        ));
        for c in &self.per_class {
            let name = class_names
                .get(c.class_id as usize - 1)
                .cloned()
                .unwrap_or_else(|| format!("class {}", c.class_id));
            s.push_str(&format!(
                "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
                name,
                pct(c.iou),
                "",
                pct(c.precision),
                pct(c.recall),
                pct(c.dice)
            ));
        }
        s
    }
}
