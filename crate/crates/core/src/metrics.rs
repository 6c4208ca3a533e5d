//! Binary classification metrics with class 1 as the positive class.
//!
//! Ratios with a zero denominator are reported as 0 so that degenerate
//! candidate models can still be ranked.

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(predictions: &[Label], truth: &[Label]) -> Result<Self> {
        if predictions.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: predictions.len(),
            });
        }
        if predictions.is_empty() {
            return Err(Error::Degenerate("one prediction"));
        }
        let mut m = Self::default();
        for (&p, &y) in predictions.iter().zip(truth) {
            match (p == 1, y == 1) {
                (true, true) => m.tp += 1,
                (true, false) => m.fp += 1,
                (false, false) => m.tn += 1,
                (false, true) => m.fn_ += 1,
            }
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn report(&self) -> MetricReport {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio(self.tp + self.tn, self.total());
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        MetricReport {
            accuracy,
            precision,
            recall,
            f1,
            fitness: (accuracy + precision + recall + f1) / 4.0,
            matrix: *self,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean of accuracy, precision, recall and F1.
    pub fitness: f64,
    pub matrix: ConfusionMatrix,
}

pub fn evaluate(predictions: &[Label], truth: &[Label]) -> Result<MetricReport> {
    Ok(ConfusionMatrix::from_predictions(predictions, truth)?.report())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let y = [0, 1, 1, 0, 1];
        let r = evaluate(&y, &y).unwrap();
        assert_eq!(
            (r.accuracy, r.precision, r.recall, r.f1, r.fitness),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn all_negative_predictions() {
        let r = evaluate(&[0, 0, 0, 0], &[0, 1, 0, 1]).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert_eq!(r.fitness, 0.125);
    }

    #[test]
    fn hand_counted_matrix() {
        let m = ConfusionMatrix {
            tp: 27,
            fp: 12,
            tn: 200,
            fn_: 22,
        };
        let r = m.report();
        assert!((r.precision - 27.0 / 39.0).abs() < 1e-15);
        assert!((r.recall - 27.0 / 49.0).abs() < 1e-15);
        assert!((r.precision - 0.6923).abs() < 1e-4);
        assert!((r.recall - 0.5510).abs() < 1e-4);
        assert!((r.f1 - 0.6136).abs() < 1e-4);
        assert_eq!(r.accuracy, 227.0 / 261.0);
    }

    #[test]
    fn rejects_empty_or_mismatched() {
        assert!(evaluate(&[], &[]).is_err());
        assert!(evaluate(&[0], &[0, 1]).is_err());
    }
}
