use ndarray::{Array2, ArrayView1, ArrayView2};

/// Numerically stable softmax of one margin row.
pub fn softmax_row(margins: ArrayView1<'_, f64>) -> Vec<f64> {
    let max = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = margins.iter().map(|m| (m - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-element gradient `p - y` and hessian `p (1 - p)` of the softmax
/// cross-entropy with respect to the margins.
pub fn softmax_grad_hess(
    margins: ArrayView2<'_, f64>,
    labels: &[usize],
) -> (Array2<f64>, Array2<f64>) {
    let (n, k) = margins.dim();
    assert_eq!(n, labels.len(), "one label per margin row");
    let mut grad = Array2::zeros((n, k));
    let mut hess = Array2::zeros((n, k));
    for (i, &label) in labels.iter().enumerate() {
        let p = softmax_row(margins.row(i));
        for (c, &pc) in p.iter().enumerate() {
            grad[[i, c]] = pc - if c == label { 1.0 } else { 0.0 };
            hess[[i, c]] = pc * (1.0 - pc);
        }
    }
    (grad, hess)
}

/// Mean multiclass log-loss of margin rows.
pub fn log_loss(margins: ArrayView2<'_, f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let row = margins.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|m| (m - max).exp()).sum::<f64>().ln();
            lse - row[label]
        })
        .sum();
    total / labels.len() as f64
}
