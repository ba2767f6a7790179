use ndarray::{s, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::layers::{hsplit, hstack, softmax_rows, Activation, Affine, Dense, LstmCell};
use super::{NetworkConfig, NnError};
use crate::rng::substream;

pub const NN_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionRnn {
    pub format_version: u32,
    pub config: NetworkConfig,
    pub encoder: Vec<Dense>,
    pub lstm: LstmCell,
    /// Maps `[x_T, h_{T-1}, c_{T-1}]` to unnormalized attention scores.
    pub attention: Affine,
    pub decoder: Dense,
    pub output: Dense,
}

/// Gradients laid out like [`AttentionRnn::affines`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub affines: Vec<Affine>,
}

impl Gradients {
    pub fn zeros_like(model: &AttentionRnn) -> Gradients {
        Gradients {
            affines: model
                .affines()
                .iter()
                .map(|a| Affine::zeros(a.inputs(), a.outputs()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForwardOutput {
    pub logits: Vec<f64>,
    /// Final LSTM output `C`.
    pub code: Vec<f64>,
    pub attention: Vec<f64>,
    /// `C ⊙ softmax(scores)`, the deep feature.
    pub c_att: Vec<f64>,
}

struct StepCache {
    /// Encoder activations, starting with the raw step input.
    enc: Vec<Array2<f64>>,
    xh: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    o: Array2<f64>,
    m: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
}

pub(crate) struct BatchForward {
    steps: Vec<StepCache>,
    att_in: Array2<f64>,
    att_w: Array2<f64>,
    code: Array2<f64>,
    pub c_att: Array2<f64>,
    dec: Array2<f64>,
    pub logits: Array2<f64>,
}

fn check_finite(m: &Array2<f64>, layer: usize, name: &'static str) -> Result<(), NnError> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFinite { layer, name })
    }
}

impl AttentionRnn {
    /// Fresh network with every parameter uniform in `±init_scale`, drawn from
    /// the `nn/init` substream of `config.seed`.
    pub fn new(config: NetworkConfig) -> Result<AttentionRnn, NnError> {
        config.validate()?;
        let mut rng = substream(config.seed, "nn/init");
        let scale = config.init_scale;
        let mut encoder = Vec::with_capacity(config.encoder_dense_layers);
        let mut width = config.input_dim;
        for _ in 0..config.encoder_dense_layers {
            encoder.push(Dense {
                affine: Affine::uniform(width, config.hidden_dim, scale, &mut rng),
                activation: Activation::Sigmoid,
            });
            width = config.hidden_dim;
        }
        let cells = config.lstm_cells;
        let lstm = LstmCell::new(width, cells, scale, &mut rng);
        let attention = Affine::uniform(width + 2 * cells, cells, scale, &mut rng);
        let decoder = Dense {
            affine: Affine::uniform(cells, config.decoder_hidden, scale, &mut rng),
            activation: Activation::Sigmoid,
        };
        let output = Dense {
            affine: Affine::uniform(config.decoder_hidden, config.output_dim, scale, &mut rng),
            activation: Activation::Identity,
        };
        Ok(AttentionRnn {
            format_version: NN_FORMAT_VERSION,
            config,
            encoder,
            lstm,
            attention,
            decoder,
            output,
        })
    }

    /// Every affine map in a fixed order: encoder layers, the four LSTM gates
    /// `i f o m`, attention, decoder hidden, output.
    pub fn affines(&self) -> Vec<&Affine> {
        let mut v: Vec<&Affine> = self.encoder.iter().map(|d| &d.affine).collect();
        v.extend(self.lstm.gates());
        v.extend([&self.attention, &self.decoder.affine, &self.output.affine]);
        v
    }

    pub fn affines_mut(&mut self) -> Vec<&mut Affine> {
        let mut v: Vec<&mut Affine> = self.encoder.iter_mut().map(|d| &mut d.affine).collect();
        v.extend(self.lstm.gates_mut());
        v.extend([
            &mut self.attention,
            &mut self.decoder.affine,
            &mut self.output.affine,
        ]);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.affines()
            .iter()
            .map(|a| a.weights.len() + a.bias.len())
            .sum()
    }

    /// Sum of squared weights; biases are not regularized.
    pub fn weight_sq_norm(&self) -> f64 {
        self.affines().iter().map(|a| a.weight_sq_norm()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardOutput, NnError> {
        let row = ArrayView2::from_shape((1, x.len()), x).expect("row shape");
        let out = self.forward_batch(row)?;
        Ok(ForwardOutput {
            logits: out.logits.row(0).to_vec(),
            code: out.code.row(0).to_vec(),
            attention: out.att_w.row(0).to_vec(),
            c_att: out.c_att.row(0).to_vec(),
        })
    }

    /// Forward pass over a batch of samples (one per row), keeping every
    /// intermediate needed by [`AttentionRnn::backward`].
    ///
    /// Layer indices in numeric errors count encoder layers from 0, then the
    /// LSTM, attention, decoder hidden and output layers.
    pub(crate) fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<BatchForward, NnError> {
        let cfg = &self.config;
        let (b, width) = x.dim();
        if width != cfg.sample_len() {
            return Err(NnError::Dimension {
                context: "network input",
                expected: cfg.sample_len(),
                got: width,
            });
        }
        let n_enc = self.encoder.len();
        let cells = self.lstm.cells();
        let mut h = Array2::<f64>::zeros((b, cells));
        let mut c = Array2::<f64>::zeros((b, cells));
        let mut h_prev = h.clone();
        let mut c_prev = c.clone();
        let mut steps = Vec::with_capacity(cfg.seq_len);
        for t in 0..cfg.seq_len {
            let xt = x
                .slice(s![.., t * cfg.input_dim..(t + 1) * cfg.input_dim])
                .to_owned();
            let mut enc = vec![xt];
            for (l, layer) in self.encoder.iter().enumerate() {
                let a = layer.apply_batch(enc[l].view());
                check_finite(&a, l, "encoder dense")?;
                enc.push(a);
            }
            let xh = hstack(&[enc[n_enc].view(), h.view()]);
            let out = self.lstm.step_batch(xh.view(), c.view());
            check_finite(&out.h, n_enc, "lstm")?;
            check_finite(&out.c, n_enc, "lstm")?;
            h_prev = std::mem::replace(&mut h, out.h);
            c_prev = std::mem::replace(&mut c, out.c.clone());
            steps.push(StepCache {
                enc,
                xh,
                i: out.i,
                f: out.f,
                o: out.o,
                m: out.m,
                c: out.c,
                tanh_c: out.tanh_c,
            });
        }
        let last = &steps[cfg.seq_len - 1];
        let att_in = hstack(&[last.enc[n_enc].view(), h_prev.view(), c_prev.view()]);
        let att_w = softmax_rows(self.attention.apply_batch(att_in.view()));
        check_finite(&att_w, n_enc + 1, "attention")?;
        let code = h;
        let c_att = &code * &att_w;
        let dec = self.decoder.apply_batch(c_att.view());
        check_finite(&dec, n_enc + 2, "decoder hidden")?;
        let logits = self.output.apply_batch(dec.view());
        check_finite(&logits, n_enc + 3, "output")?;
        Ok(BatchForward {
            steps,
            att_in,
            att_w,
            code,
            c_att,
            dec,
            logits,
        })
    }

    /// Gradients of the batch-mean cross-entropy plus `λ Σ‖W‖²`.
    pub(crate) fn backward(&self, fwd: &BatchForward, labels: &[usize]) -> Gradients {
        let cfg = &self.config;
        let b = labels.len();
        let n_enc = self.encoder.len();
        let cells = self.lstm.cells();
        let e_width = cfg.encoder_out();
        let mut g = Gradients::zeros_like(self);
        let (gi_att, gi_dec, gi_out) = (n_enc + 4, n_enc + 5, n_enc + 6);

        let mut d_logits = softmax_rows(fwd.logits.clone());
        for (i, &l) in labels.iter().enumerate() {
            d_logits[[i, l]] -= 1.0;
        }
        d_logits /= b as f64;

        g.affines[gi_out].accumulate(fwd.dec.view(), d_logits.view());
        let mut d_dec = d_logits.dot(&self.output.affine.weights.t());
        Zip::from(&mut d_dec)
            .and(&fwd.dec)
            .for_each(|d, &a| *d *= a * (1.0 - a));
        g.affines[gi_dec].accumulate(fwd.c_att.view(), d_dec.view());
        let d_catt = d_dec.dot(&self.decoder.affine.weights.t());

        let d_code = &d_catt * &fwd.att_w;
        let d_w = &d_catt * &fwd.code;
        let dot = (&d_w * &fwd.att_w).sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_scores = &fwd.att_w * &(&d_w - &dot);
        g.affines[gi_att].accumulate(fwd.att_in.view(), d_scores.view());
        let d_att_in = d_scores.dot(&self.attention.weights.t());
        let parts = hsplit(&d_att_in, &[e_width, cells, cells]);
        let (d_att_e, d_att_h, d_att_c) = (parts[0], parts[1], parts[2]);

        let t_last = cfg.seq_len - 1;
        let mut dh = d_code;
        let mut dc_next = Array2::<f64>::zeros((b, cells));
        let gates = self.lstm.gates();
        for t in (0..cfg.seq_len).rev() {
            let st = &fwd.steps[t];
            let zero = Array2::<f64>::zeros((b, cells));
            let c_prev = if t > 0 { &fwd.steps[t - 1].c } else { &zero };
            let mut dc = dc_next.clone();
            Zip::from(&mut dc)
                .and(&dh)
                .and(&st.o)
                .and(&st.tanh_c)
                .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));
            let mut d_o = &dh * &st.tanh_c;
            Zip::from(&mut d_o)
                .and(&st.o)
                .for_each(|d, &o| *d *= o * (1.0 - o));
            let mut d_i = &dc * &st.m;
            Zip::from(&mut d_i)
                .and(&st.i)
                .for_each(|d, &i| *d *= i * (1.0 - i));
            let mut d_f = &dc * c_prev;
            Zip::from(&mut d_f)
                .and(&st.f)
                .for_each(|d, &f| *d *= f * (1.0 - f));
            let mut d_m = &dc * &st.i;
            Zip::from(&mut d_m)
                .and(&st.m)
                .for_each(|d, &m| *d *= 1.0 - m * m);

            let mut d_xh = Array2::<f64>::zeros((b, e_width + cells));
            for (k, dg) in [&d_i, &d_f, &d_o, &d_m].into_iter().enumerate() {
                g.affines[n_enc + k].accumulate(st.xh.view(), dg.view());
                ndarray::linalg::general_mat_mul(1.0, dg, &gates[k].weights.t(), 1.0, &mut d_xh);
            }
            let mut de = d_xh.slice(s![.., ..e_width]).to_owned();
            dh = d_xh.slice(s![.., e_width..]).to_owned();
            dc_next = &dc * &st.f;
            if t == t_last {
                de += &d_att_e;
                if t > 0 {
                    dh += &d_att_h;
                    dc_next += &d_att_c;
                }
            }

            for l in (0..n_enc).rev() {
                let a = &st.enc[l + 1];
                Zip::from(&mut de)
                    .and(a)
                    .for_each(|d, &a| *d *= a * (1.0 - a));
                g.affines[l].accumulate(st.enc[l].view(), de.view());
                if l > 0 {
                    de = de.dot(&self.encoder[l].affine.weights.t());
                }
            }
        }

        let lambda = cfg.l2_lambda;
        if lambda > 0.0 {
            for (ga, a) in g.affines.iter_mut().zip(self.affines()) {
                ga.weights.scaled_add(2.0 * lambda, &a.weights);
            }
        }
        g
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<AttentionRnn, NnError> {
        let m: AttentionRnn =
            serde_json::from_str(text).map_err(|e| NnError::Format(e.to_string()))?;
        if m.format_version != NN_FORMAT_VERSION {
            return Err(NnError::Format(format!(
                "unsupported format version {}",
                m.format_version
            )));
        }
        m.check_shapes()?;
        Ok(m)
    }

    fn check_shapes(&self) -> Result<(), NnError> {
        let fresh = AttentionRnn::new(NetworkConfig {
            init_scale: 0.0,
            ..self.config.clone()
        })?;
        for (k, (a, e)) in self.affines().iter().zip(fresh.affines()).enumerate() {
            if a.weights.dim() != e.weights.dim() || a.bias.len() != e.bias.len() {
                return Err(NnError::Format(format!(
                    "layer {k} has shape {:?}, config implies {:?}",
                    a.weights.dim(),
                    e.weights.dim()
                )));
            }
        }
        if self.affines().len() != fresh.affines().len() {
            return Err(NnError::Format("layer count does not match config".into()));
        }
        Ok(())
    }
}

/// Batch-mean softmax cross-entropy of `logits` plus `lambda Σ‖W‖²` over the
/// model's weight matrices.
pub fn loss(
    logits: ArrayView2<'_, f64>,
    labels: &[usize],
    model: &AttentionRnn,
    lambda: f64,
) -> f64 {
    crate::boost::log_loss(logits, labels) + lambda * model.weight_sq_norm()
}
