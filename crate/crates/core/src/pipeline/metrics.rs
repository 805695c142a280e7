//! Confusion counts, threshold metrics and ROC analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(pred: &[u8], labels: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&p, &l) in pred.iter().zip(labels) {
            match (p == 1, l == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn metrics(&self) -> ClassificationMetrics {
        let ratio = |num: usize, den: usize| if den == 0 { (0.0, true) } else { (num as f64 / den as f64, false) };
        let (precision, precision_undefined) = ratio(self.tp, self.tp + self.fp);
        let (recall, recall_undefined) = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        ClassificationMetrics {
            accuracy: ratio(self.tp + self.tn, self.total()).0,
            precision,
            recall,
            f1,
            confusion: *self,
            precision_undefined,
            recall_undefined,
        }
    }
}

/// Positive class is 1. A ratio with a zero denominator is reported as 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

pub fn classification_metrics(pred: &[u8], labels: &[u8]) -> Result<ClassificationMetrics> {
    if pred.len() != labels.len() {
        return Err(Error::Validation(format!("{} predictions for {} labels", pred.len(), labels.len())));
    }
    Ok(Confusion::from_predictions(pred, labels).metrics())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `[fpr, tpr]` vertices from (0, 0) to (1, 1), one per distinct threshold.
    pub points: Vec<[f64; 2]>,
    pub auroc: f64,
}

/// Sweep thresholds over distinct scores in descending order; tied scores
/// move both rates at once, which gives ties half credit in the area.
pub fn roc_auroc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Validation("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Domain("AUROC undefined: labels contain a single class".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = vec![[0.0, 0.0]];
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
        points.push([fp as f64 / n_neg as f64, tp as f64 / n_pos as f64]);
    }
    Ok(RocCurve { points, auroc: area / (n_pos as f64 * n_neg as f64) })
}

/// TPR of a ROC polyline at `fpr`, taking the top of any vertical segment.
pub fn tpr_at(points: &[[f64; 2]], fpr: f64) -> f64 {
    let k = points.iter().rposition(|p| p[0] <= fpr).unwrap_or(0);
    match points.get(k + 1) {
        Some(next) if next[0] > points[k][0] => {
            let t = (fpr - points[k][0]) / (next[0] - points[k][0]);
            points[k][1] + t * (next[1] - points[k][1])
        }
        _ => points[k][1],
    }
}

pub const ROC_GRID_POINTS: usize = 101;

/// Vertical average of several ROC curves on an evenly spaced FPR grid.
pub fn average_roc(curves: &[Vec<[f64; 2]>]) -> Vec<[f64; 2]> {
    (0..ROC_GRID_POINTS)
        .map(|g| {
            let x = g as f64 / (ROC_GRID_POINTS - 1) as f64;
            let y = curves.iter().map(|c| tpr_at(c, x)).sum::<f64>() / curves.len().max(1) as f64;
            [x, y]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        assert_eq!(roc_auroc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap().auroc, 1.0);
        assert_eq!(roc_auroc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap().auroc, 0.5);
        assert_eq!(roc_auroc(&[0.9, 0.4, 0.6, 0.1], &[1, 0, 0, 1]).unwrap().auroc, 0.5);
        assert!(roc_auroc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn metric_examples() {
        let m = classification_metrics(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));

        let m = classification_metrics(&[0, 0, 0, 0], &[1, 1, 0, 0]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall), (0.5, 0.0, 0.0));
        assert!(m.precision_undefined);
        assert!(!m.recall_undefined);

        let c = Confusion { tp: 3, fp: 1, fn_: 2, tn: 4 };
        let m = c.metrics();
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f1 - 2.0 * 0.45 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn averaged_roc_is_monotone() {
        let a = roc_auroc(&[0.9, 0.7, 0.5, 0.3, 0.2], &[1, 0, 1, 0, 1]).unwrap().points;
        let b = roc_auroc(&[0.1, 0.2, 0.3, 0.4], &[0, 1, 0, 1]).unwrap().points;
        let avg = average_roc(&[a, b]);
        assert_eq!(avg.len(), 101);
        assert_eq!(avg[100], [1.0, 1.0]);
        assert!(avg.windows(2).all(|w| w[1][0] > w[0][0] && w[1][1] >= w[0][1]));
    }
}
