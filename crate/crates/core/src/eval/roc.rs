use std::fmt::Write as _;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::EvalError;

/// One-vs-rest ROC curve of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub class: usize,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`; empty when undefined.
    pub points: Vec<(f64, f64)>,
    /// `None` when the class, or every other class, is absent from the truth.
    pub auc: Option<f64>,
}

/// Per-class ROC curves by descending-score thresholding; equal scores form a
/// single threshold step and the area is the trapezoidal sum.
pub fn roc_auc(truth: &[usize], scores: ArrayView2<'_, f64>) -> Result<Vec<RocCurve>, EvalError> {
    let (n, k) = scores.dim();
    if n != truth.len() {
        return Err(EvalError::Shape(format!(
            "{n} score rows but {} labels",
            truth.len()
        )));
    }
    if n == 0 {
        return Err(EvalError::Empty);
    }
    if let Some(&label) = truth.iter().find(|&&l| l >= k) {
        return Err(EvalError::Label { label, classes: k });
    }
    Ok((0..k).map(|c| curve(truth, scores, c)).collect())
}

fn curve(truth: &[usize], scores: ArrayView2<'_, f64>, class: usize) -> RocCurve {
    let positives = truth.iter().filter(|&&t| t == class).count();
    let negatives = truth.len() - positives;
    if positives == 0 || negatives == 0 {
        return RocCurve {
            class,
            points: Vec::new(),
            auc: None,
        };
    }
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| scores[[b, class]].total_cmp(&scores[[a, class]]));

    let (p, q) = (positives as f64, negatives as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[[order[i], class]];
        while i < order.len() && scores[[order[i], class]] == s {
            if truth[order[i]] == class {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().expect("starts at origin");
        let (x1, y1) = (fp as f64 / q, tp as f64 / p);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    RocCurve {
        class,
        points,
        auc: Some(auc),
    }
}

/// ROC points as CSV with header `class,fpr,tpr`.
pub fn roc_csv(curves: &[RocCurve]) -> String {
    let mut out = String::from("class,fpr,tpr\n");
    for c in curves {
        for (fpr, tpr) in &c.points {
            writeln!(out, "{},{fpr},{tpr}", c.class).expect("writing to a String");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    /// P(s⁺ > s⁻) + ½ P(s⁺ = s⁻) over all positive/negative pairs.
    fn pair_count_auc(truth: &[usize], s: &[f64], class: usize) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (i, &ti) in truth.iter().enumerate() {
            for (j, &tj) in truth.iter().enumerate() {
                if ti == class && tj != class {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        wins += 1.0;
                    } else if s[i] == s[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    fn binary_scores(s: &[f64]) -> Array2<f64> {
        Array2::from_shape_fn(
            (s.len(), 2),
            |(i, j)| if j == 1 { s[i] } else { 1.0 - s[i] },
        )
    }

    #[test]
    fn perfect_separation() {
        let c = roc_auc(&[0, 0, 1, 1], binary_scores(&[0.1, 0.2, 0.8, 0.9]).view()).unwrap();
        assert_eq!(c[1].auc, Some(1.0));
        assert_eq!(c[0].auc, Some(1.0));
        assert_eq!(c[1].points.first(), Some(&(0.0, 0.0)));
        assert_eq!(c[1].points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn constant_scores_give_half() {
        let c = roc_auc(&[0, 1, 1, 0, 1], binary_scores(&[0.5; 5]).view()).unwrap();
        assert_eq!(c[1].auc, Some(0.5));
        assert_eq!(c[1].points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn four_point_toy_matches_pair_counting() {
        let truth = [1, 0, 1, 0];
        let s = [0.9, 0.6, 0.6, 0.2];
        let c = roc_auc(&truth, binary_scores(&s).view()).unwrap();
        assert!((c[1].auc.unwrap() - 0.875).abs() < 1e-12);
        assert!((c[1].auc.unwrap() - pair_count_auc(&truth, &s, 1)).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_undefined() {
        let scores = Array2::from_elem((3, 3), 1.0 / 3.0);
        let c = roc_auc(&[0, 1, 0], scores.view()).unwrap();
        assert_eq!(c[2].auc, None);
        assert!(c[2].points.is_empty());
    }

    #[test]
    fn csv_layout() {
        let c = roc_auc(&[0, 1], binary_scores(&[0.2, 0.7]).view()).unwrap();
        let text = roc_csv(&c);
        assert!(text.starts_with("class,fpr,tpr\n0,0,0\n"));
        assert_eq!(
            text.lines().count(),
            1 + c.iter().map(|c| c.points.len()).sum::<usize>()
        );
    }

    proptest! {
        #[test]
        fn auc_equals_pair_counting(rows in prop::collection::vec((0usize..3, 0u8..6), 2..200)) {
            let truth: Vec<usize> = rows.iter().map(|r| r.0).collect();
            // Coarse scores force many ties.
            let raw: Vec<f64> = rows.iter().map(|r| r.1 as f64 / 5.0).collect();
            let scores = Array2::from_shape_fn((truth.len(), 3), |(i, j)| (raw[i] + j as f64 * 0.37).fract());
            let curves = roc_auc(&truth, scores.view()).unwrap();
            for c in curves {
                let col: Vec<f64> = scores.column(c.class).to_vec();
                match c.auc {
                    Some(a) => {
                        prop_assert!((a - pair_count_auc(&truth, &col, c.class)).abs() < 1e-9);
                        prop_assert!((0.0..=1.0).contains(&a));
                        prop_assert_eq!(c.points.last(), Some(&(1.0, 1.0)));
                    }
                    None => {
                        let pos = truth.iter().filter(|&&t| t == c.class).count();
                        prop_assert!(pos == 0 || pos == truth.len());
                    }
                }
            }
        }
    }
}
