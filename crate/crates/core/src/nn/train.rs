use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::adam::{adam_step, AdamState};
use super::model::{loss, AttentionRnn, Gradients};
use super::{NetworkConfig, NnError};
use crate::rng::substream;

/// Rows processed per forward pass when extracting features.
const EXTRACT_CHUNK: usize = 4096;

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: AttentionRnn,
    /// Loss of the batch used at each iteration, before its update.
    pub loss_history: Vec<f64>,
}

fn check_labels(n_rows: usize, labels: &[usize], classes: usize) -> Result<(), NnError> {
    if labels.len() != n_rows {
        return Err(NnError::Dimension {
            context: "labels",
            expected: n_rows,
            got: labels.len(),
        });
    }
    if n_rows == 0 {
        return Err(NnError::EmptyDataset);
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(NnError::Label { label, classes });
    }
    Ok(())
}

/// Loss gradients of `model` on one batch.
pub fn gradients(
    model: &AttentionRnn,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<Gradients, NnError> {
    check_labels(features.nrows(), labels, model.config.output_dim)?;
    let fwd = model.forward_batch(features)?;
    Ok(model.backward(&fwd, labels))
}

/// Train a fresh network with Adam.
///
/// The rows are shuffled once and cut into `batch_count` contiguous batches;
/// iteration `k` takes one step on batch `k mod batch_count`.
pub fn train(
    config: &NetworkConfig,
    features: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<TrainOutcome, NnError> {
    let mut model = AttentionRnn::new(config.clone())?;
    check_labels(features.nrows(), labels, config.output_dim)?;
    if features.ncols() != config.sample_len() {
        return Err(NnError::Dimension {
            context: "network input",
            expected: config.sample_len(),
            got: features.ncols(),
        });
    }

    let n = features.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(config.seed, "nn/batches"));
    let count = config.batch_count.min(n);
    let batches: Vec<(Array2<f64>, Vec<usize>)> = (0..count)
        .map(|b| {
            let idx = &order[b * n / count..(b + 1) * n / count];
            (
                features.select(Axis(0), idx),
                idx.iter().map(|&i| labels[i]).collect(),
            )
        })
        .collect();

    let mut adam = AdamState::new(&model);
    let mut history = Vec::with_capacity(config.n_iter);
    for it in 0..config.n_iter {
        let (x, y) = &batches[it % count];
        let fwd = model.forward_batch(x.view())?;
        let l = loss(fwd.logits.view(), y, &model, config.l2_lambda);
        let g = model.backward(&fwd, y);
        adam_step(&mut model, &mut adam, &g, config.learning_rate);
        if it % 100 == 0 {
            log::debug!("iteration {it}: loss {l:.6}");
        }
        history.push(l);
    }
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

/// Attention-weighted codes `C_att`, one row per sample.
pub fn extract_features(
    model: &AttentionRnn,
    features: ArrayView2<'_, f64>,
) -> Result<Array2<f64>, NnError> {
    let n = features.nrows();
    let mut out = Array2::zeros((n, model.config.lstm_cells));
    let mut start = 0;
    while start < n {
        let end = (start + EXTRACT_CHUNK).min(n);
        let fwd = model.forward_batch(features.slice(ndarray::s![start..end, ..]))?;
        out.slice_mut(ndarray::s![start..end, ..])
            .assign(&fwd.c_att);
        start = end;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn two_gaussians() -> (Array2<f64>, Vec<usize>) {
        let mut rng = substream(5, "test/gaussians");
        let noise = Normal::new(0.0, 0.5).unwrap();
        let labels: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((200, 4), |(i, _)| {
            let mean = if labels[i] == 0 { -1.0 } else { 1.0 };
            mean + noise.sample(&mut rng)
        });
        (x, labels)
    }

    fn small_config() -> NetworkConfig {
        NetworkConfig {
            input_dim: 4,
            hidden_dim: 16,
            lstm_cells: 16,
            decoder_hidden: 16,
            output_dim: 2,
            learning_rate: 0.01,
            // The default ±0.1 init leaves this shallow problem at the
            // symmetric saddle for hundreds of iterations.
            init_scale: 1.0,
            n_iter: 300,
            batch_count: 1,
            seed: 1,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn separates_two_gaussian_classes() {
        let (x, y) = two_gaussians();
        let out = train(&small_config(), x.view(), &y).unwrap();
        assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
        let correct = x
            .rows()
            .into_iter()
            .zip(&y)
            .filter(|(row, &label)| {
                let logits = out.model.forward(&row.to_vec()).unwrap().logits;
                usize::from(logits[1] > logits[0]) == label
            })
            .count();
        assert_eq!(correct, 200);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = two_gaussians();
        let cfg = NetworkConfig {
            n_iter: 20,
            batch_count: 3,
            ..small_config()
        };
        let a = train(&cfg, x.view(), &y).unwrap();
        let b = train(&cfg, x.view(), &y).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn extracted_features_match_forward() {
        let (x, y) = two_gaussians();
        let cfg = NetworkConfig {
            n_iter: 5,
            ..small_config()
        };
        let model = train(&cfg, x.view(), &y).unwrap().model;
        let f = extract_features(&model, x.view()).unwrap();
        assert_eq!(f.dim(), (200, 16));
        for i in [0, 77, 199] {
            let one = model.forward(&x.row(i).to_vec()).unwrap().c_att;
            for (a, b) in one.iter().zip(f.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_labels() {
        let (x, mut y) = two_gaussians();
        y[3] = 2;
        assert_eq!(
            train(&small_config(), x.view(), &y).unwrap_err(),
            NnError::Label {
                label: 2,
                classes: 2
            }
        );
        assert!(train(&small_config(), x.view(), &y[..10]).is_err());
    }
}
