use ndarray::{Array2, ArrayView2};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{log_loss, softmax_grad_hess, softmax_row};
use super::tree::{build_tree_in, RegressionTree, SortedColumns, Workspace};
use super::{BoostConfig, BoostError};
use crate::rng::substream;

pub const BOOST_FORMAT_VERSION: u32 = 1;

/// `rounds × K` trees; leaf weights already include the shrinkage `eta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub format_version: u32,
    pub config: BoostConfig,
    pub num_classes: usize,
    pub num_features: usize,
    pub base_score: Vec<f64>,
    pub trees: Vec<RegressionTree>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub probabilities: Vec<f64>,
}

impl BoostedModel {
    pub fn empty(num_classes: usize, num_features: usize, config: BoostConfig) -> BoostedModel {
        BoostedModel {
            format_version: BOOST_FORMAT_VERSION,
            config,
            num_classes,
            num_features,
            base_score: vec![0.0; num_classes],
            trees: Vec::new(),
        }
    }

    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        let mut m = self.base_score.clone();
        for t in &self.trees {
            m[t.class_index] += t.predict(row);
        }
        m
    }

    /// Softmax of the summed margins; the class is the argmax, ties going to
    /// the lowest index.
    pub fn predict(&self, row: &[f64]) -> Result<Prediction, BoostError> {
        if row.len() != self.num_features {
            return Err(BoostError::Shape(format!(
                "feature row has {} values, model expects {}",
                row.len(),
                self.num_features
            )));
        }
        let probabilities = softmax_row(ndarray::ArrayView1::from(&self.margins(row)));
        let class = argmax(&probabilities);
        Ok(Prediction {
            class,
            probabilities,
        })
    }

    pub fn predict_all(
        &self,
        features: ArrayView2<'_, f64>,
    ) -> Result<Vec<Prediction>, BoostError> {
        features
            .rows()
            .into_iter()
            .map(|r| self.predict(&r.to_vec()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<BoostedModel, BoostError> {
        let m: BoostedModel = serde_json::from_str(text)
            .map_err(|e| BoostError::Shape(format!("model JSON: {e}")))?;
        if m.format_version != BOOST_FORMAT_VERSION {
            return Err(BoostError::Version(m.format_version));
        }
        Ok(m)
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub fn train_boost(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    config: &BoostConfig,
) -> Result<BoostedModel, BoostError> {
    train_boost_with_history(features, labels, num_classes, config).map(|(m, _)| m)
}

/// Train and also return the training log-loss before the first round and
/// after every round.
pub fn train_boost_with_history(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    num_classes: usize,
    config: &BoostConfig,
) -> Result<(BoostedModel, Vec<f64>), BoostError> {
    config.validate()?;
    let (n, d) = features.dim();
    if n != labels.len() {
        return Err(BoostError::Shape(format!(
            "{n} feature rows but {} labels",
            labels.len()
        )));
    }
    if n == 0 {
        return Err(BoostError::EmptyRows);
    }
    if num_classes == 0 {
        return Err(BoostError::Config("num_classes must be at least 1".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(BoostError::Shape(format!(
            "label {l} out of range for {num_classes} classes"
        )));
    }

    let mut model = BoostedModel::empty(num_classes, d, config.clone());
    let sorted = SortedColumns::new(features);
    let mut margins = Array2::<f64>::zeros((n, num_classes));
    let mut history = vec![log_loss(margins.view(), labels)];
    let mut rng = substream(config.seed, "boost/subsample");
    let take = ((config.subsample * n as f64).round() as usize).clamp(1, n);
    let rows: Vec<Vec<f64>> = features.rows().into_iter().map(|r| r.to_vec()).collect();

    for _ in 0..config.rounds {
        let (grad, hess) = softmax_grad_hess(margins.view(), labels);
        // Masks are drawn in class order before the trees run in parallel.
        let masks: Vec<Vec<bool>> = (0..num_classes)
            .map(|_| {
                let mut mask = vec![take == n; n];
                if take < n {
                    for i in index::sample(&mut rng, n, take) {
                        mask[i] = true;
                    }
                }
                mask
            })
            .collect();
        let round = masks
            .par_iter()
            .enumerate()
            .map_init(Workspace::default, |workspace, (k, mask)| {
                let g = grad.column(k).to_vec();
                let h = hess.column(k).to_vec();
                let mut tree = build_tree_in(features, &sorted, &g, &h, config, mask, workspace)?;
                tree.scale_leaves(config.eta);
                tree.class_index = k;
                Ok(tree)
            })
            .collect::<Result<Vec<_>, BoostError>>()?;
        for tree in &round {
            let k = tree.class_index;
            for (i, row) in rows.iter().enumerate() {
                margins[[i, k]] += tree.predict(row);
            }
        }
        model.trees.extend(round);
        history.push(log_loss(margins.view(), labels));
    }
    Ok((model, history))
}
