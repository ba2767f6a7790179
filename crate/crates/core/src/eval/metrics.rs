use serde::{Deserialize, Serialize};

use super::roc::RocCurve;
use super::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub num_classes: usize,
    /// Rows are the true class, columns the prediction.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub roc: Vec<RocCurve>,
    /// Mean AUC over classes whose AUC is defined.
    pub macro_auc: Option<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion matrix and per-class metrics; zero denominators give 0.
pub fn confusion_and_report(
    truth: &[usize],
    predicted: &[usize],
    num_classes: usize,
) -> Result<EvaluationReport, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::Shape(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label >= num_classes {
                return Err(EvalError::Label {
                    label,
                    classes: num_classes,
                });
            }
        }
        confusion[t][p] += 1;
    }
    let per_class: Vec<ClassMetrics> = (0..num_classes)
        .map(|k| {
            let tp = confusion[k][k];
            let predicted_k: u64 = confusion.iter().map(|row| row[k]).sum();
            let support: u64 = confusion[k].iter().sum();
            let precision = ratio(tp, predicted_k);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: k,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let trace: u64 = (0..num_classes).map(|k| confusion[k][k]).sum();
    let mean =
        |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / num_classes as f64;
    Ok(EvaluationReport {
        num_classes,
        accuracy: ratio(trace, truth.len() as u64),
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        confusion,
        per_class,
        roc: Vec::new(),
        macro_auc: None,
    })
}

impl EvaluationReport {
    pub fn with_roc(mut self, curves: Vec<RocCurve>) -> EvaluationReport {
        let aucs: Vec<f64> = curves.iter().filter_map(|c| c.auc).collect();
        self.macro_auc = if aucs.is_empty() {
            None
        } else {
            Some(aucs.iter().sum::<f64>() / aucs.len() as f64)
        };
        self.roc = curves;
        self
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let y = [0, 1, 2, 2, 1];
        let r = confusion_and_report(&y, &y, 3).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert!(r.per_class.iter().all(|m| m.f1 == 1.0));
    }

    #[test]
    fn hand_counted_two_class() {
        let r = confusion_and_report(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
        let c1 = &r.per_class[1];
        assert!((c1.precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c1.recall, 1.0);
        assert!((c1.f1 - 0.8).abs() < 1e-15);
        assert_eq!(r.accuracy, 0.75);
    }

    #[test]
    fn constant_prediction_on_balanced_data() {
        let r = confusion_and_report(&[0, 1, 0, 1], &[1, 1, 1, 1], 2).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.per_class[0].precision, 0.0);
        assert_eq!(r.per_class[0].f1, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            confusion_and_report(&[], &[], 2).unwrap_err(),
            EvalError::Empty
        );
        assert!(confusion_and_report(&[0], &[0, 1], 2).is_err());
        assert!(matches!(
            confusion_and_report(&[0], &[3], 2),
            Err(EvalError::Label { label: 3, .. })
        ));
    }

    proptest! {
        #[test]
        fn report_invariants(pairs in prop::collection::vec((0usize..5, 0usize..5), 1..200)) {
            let (t, p): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
            let r = confusion_and_report(&t, &p, 5).unwrap();
            let trace: u64 = (0..5).map(|k| r.confusion[k][k]).sum();
            prop_assert_eq!(r.accuracy, trace as f64 / r.total() as f64);
            prop_assert_eq!(r.per_class.iter().map(|m| m.support).sum::<u64>(), r.total());
            for m in &r.per_class {
                let h = if m.precision + m.recall > 0.0 {
                    2.0 * m.precision * m.recall / (m.precision + m.recall)
                } else {
                    0.0
                };
                prop_assert!((m.f1 - h).abs() < 1e-12);
            }
        }
    }
}
