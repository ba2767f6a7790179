use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `y = x W + b` with `W` stored `in × out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "AffineRepr", try_from = "AffineRepr")]
pub struct Affine {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Serialize, Deserialize)]
struct AffineRepr {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl From<Affine> for AffineRepr {
    fn from(a: Affine) -> Self {
        AffineRepr {
            weights: a.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
            bias: a.bias.to_vec(),
        }
    }
}

impl TryFrom<AffineRepr> for Affine {
    type Error = String;

    fn try_from(r: AffineRepr) -> Result<Self, Self::Error> {
        let rows = r.weights.len();
        let cols = r.bias.len();
        if let Some(bad) = r.weights.iter().position(|row| row.len() != cols) {
            return Err(format!(
                "weight row {bad} has {} values, bias has {cols}",
                r.weights[bad].len()
            ));
        }
        let weights =
            Array2::from_shape_vec((rows, cols), r.weights.concat()).map_err(|e| e.to_string())?;
        Ok(Affine {
            weights,
            bias: Array1::from(r.bias),
        })
    }
}

impl Affine {
    pub fn zeros(inputs: usize, outputs: usize) -> Affine {
        Affine {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn uniform<R: Rng>(inputs: usize, outputs: usize, scale: f64, rng: &mut R) -> Affine {
        let mut draw = || {
            if scale > 0.0 {
                rng.random_range(-scale..=scale)
            } else {
                0.0
            }
        };
        let weights = Array2::from_shape_simple_fn((inputs, outputs), &mut draw);
        let bias = Array1::from_shape_simple_fn(outputs, &mut draw);
        Affine { weights, bias }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        x.dot(&self.weights) + &self.bias
    }

    pub fn apply_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weights) + &self.bias
    }

    pub fn weight_sq_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Add the gradient of a batch through this map: `xᵀ d` to the weights
    /// and the column sums of `d` to the bias.
    pub(crate) fn accumulate(&mut self, x: ArrayView2<'_, f64>, d: ArrayView2<'_, f64>) {
        ndarray::linalg::general_mat_mul(1.0, &x.t(), &d, 1.0, &mut self.weights);
        self.bias += &d.sum_axis(Axis(0));
    }

    pub(crate) fn check_input(&self, len: usize, context: &'static str) -> Result<(), NnError> {
        if len != self.inputs() {
            return Err(NnError::Dimension {
                context,
                expected: self.inputs(),
                got: len,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub affine: Affine,
    pub activation: Activation,
}

impl Dense {
    pub fn apply_batch(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let act = self.activation;
        let mut z = self.affine.apply_batch(x);
        z.mapv_inplace(|v| act.apply(v));
        z
    }
}

/// One dense layer on a single input vector.
pub fn dense_forward(layer: &Dense, x: &[f64]) -> Result<Vec<f64>, NnError> {
    layer.affine.check_input(x.len(), "dense layer input")?;
    let act = layer.activation;
    Ok(layer
        .affine
        .apply(ArrayView1::from(x))
        .mapv(|v| act.apply(v))
        .to_vec())
}

/// LSTM cell with gates `i`, `f`, `o` (sigmoid) and candidate `m` (tanh),
/// each an affine map of `[x, h_prev]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmCell {
    pub input_gate: Affine,
    pub forget_gate: Affine,
    pub output_gate: Affine,
    pub candidate: Affine,
}

pub(crate) struct LstmStepBatch {
    pub i: Array2<f64>,
    pub f: Array2<f64>,
    pub o: Array2<f64>,
    pub m: Array2<f64>,
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
    pub h: Array2<f64>,
}

impl LstmCell {
    pub fn new<R: Rng>(inputs: usize, cells: usize, scale: f64, rng: &mut R) -> LstmCell {
        let n = inputs + cells;
        LstmCell {
            input_gate: Affine::uniform(n, cells, scale, rng),
            forget_gate: Affine::uniform(n, cells, scale, rng),
            output_gate: Affine::uniform(n, cells, scale, rng),
            candidate: Affine::uniform(n, cells, scale, rng),
        }
    }

    pub fn cells(&self) -> usize {
        self.input_gate.outputs()
    }

    pub fn gates(&self) -> [&Affine; 4] {
        [
            &self.input_gate,
            &self.forget_gate,
            &self.output_gate,
            &self.candidate,
        ]
    }

    pub fn gates_mut(&mut self) -> [&mut Affine; 4] {
        [
            &mut self.input_gate,
            &mut self.forget_gate,
            &mut self.output_gate,
            &mut self.candidate,
        ]
    }

    pub(crate) fn step_batch(
        &self,
        xh: ArrayView2<'_, f64>,
        c_prev: ArrayView2<'_, f64>,
    ) -> LstmStepBatch {
        let mut i = self.input_gate.apply_batch(xh);
        let mut f = self.forget_gate.apply_batch(xh);
        let mut o = self.output_gate.apply_batch(xh);
        let mut m = self.candidate.apply_batch(xh);
        i.mapv_inplace(sigmoid);
        f.mapv_inplace(sigmoid);
        o.mapv_inplace(sigmoid);
        m.mapv_inplace(f64::tanh);
        let c = &f * &c_prev + &i * &m;
        let tanh_c = c.mapv(f64::tanh);
        let h = &o * &tanh_c;
        LstmStepBatch {
            i,
            f,
            o,
            m,
            c,
            tanh_c,
            h,
        }
    }
}

/// One LSTM step on a single sample; returns `(h, c)`.
pub fn lstm_step(
    cell: &LstmCell,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    let cells = cell.cells();
    for (len, context) in [(h_prev.len(), "lstm h_prev"), (c_prev.len(), "lstm c_prev")] {
        if len != cells {
            return Err(NnError::Dimension {
                context,
                expected: cells,
                got: len,
            });
        }
    }
    cell.input_gate.check_input(x.len() + cells, "lstm input")?;
    let xh = row_concat(&[x, h_prev]);
    let c_prev = Array2::from_shape_vec((1, cells), c_prev.to_vec()).expect("row shape");
    let out = cell.step_batch(xh.view(), c_prev.view());
    Ok((out.h.row(0).to_vec(), out.c.row(0).to_vec()))
}

/// Softmax-normalized attention weights from `[x, h_prev, c_prev]`.
pub fn attention_weights(
    projection: &Affine,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> Result<Vec<f64>, NnError> {
    projection.check_input(x.len() + h_prev.len() + c_prev.len(), "attention input")?;
    let z = row_concat(&[x, h_prev, c_prev]);
    let scores = projection.apply_batch(z.view());
    Ok(softmax(scores.row(0)))
}

pub fn softmax(scores: ArrayView1<'_, f64>) -> Vec<f64> {
    crate::boost::softmax_row(scores)
}

/// Row-wise softmax of a batch.
pub(crate) fn softmax_rows(mut z: Array2<f64>) -> Array2<f64> {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    z
}

fn row_concat(parts: &[&[f64]]) -> Array2<f64> {
    let v = parts.concat();
    let n = v.len();
    Array2::from_shape_vec((1, n), v).expect("row shape")
}

/// Column-wise concatenation of equally tall blocks.
pub(crate) fn hstack(parts: &[ArrayView2<'_, f64>]) -> Array2<f64> {
    ndarray::concatenate(Axis(1), parts).expect("blocks share a row count")
}

/// Split the columns of `m` at the given widths.
pub(crate) fn hsplit<'a>(m: &'a Array2<f64>, widths: &[usize]) -> Vec<ArrayView2<'a, f64>> {
    let mut start = 0;
    widths
        .iter()
        .map(|w| {
            let v = m.slice(s![.., start..start + w]);
            start += w;
            v
        })
        .collect()
}
