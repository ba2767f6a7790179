use super::layers::Affine;
use super::model::{AttentionRnn, Gradients};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First and second moment estimates, shaped like the model's affines.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Affine>,
    v: Vec<Affine>,
}

impl AdamState {
    pub fn new(model: &AttentionRnn) -> AdamState {
        let z = Gradients::zeros_like(model).affines;
        AdamState {
            step: 0,
            m: z.clone(),
            v: z,
        }
    }
}

/// Bias-corrected Adam update of `param` in place. `step` counts from 1.
pub fn adam_update(
    param: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    lr: f64,
) {
    let c1 = 1.0 - ADAM_BETA1.powf(step as f64);
    let c2 = 1.0 - ADAM_BETA2.powf(step as f64);
    for (((p, &g), m), v) in param
        .iter_mut()
        .zip(grad)
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
    }
}

pub fn adam_step(model: &mut AttentionRnn, state: &mut AdamState, grads: &Gradients, lr: f64) {
    state.step += 1;
    let step = state.step;
    let params = model.affines_mut();
    for (((p, g), m), v) in params
        .into_iter()
        .zip(&grads.affines)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        adam_update(
            p.weights.as_slice_mut().expect("standard layout"),
            g.weights.as_slice().expect("standard layout"),
            m.weights.as_slice_mut().expect("standard layout"),
            v.weights.as_slice_mut().expect("standard layout"),
            step,
            lr,
        );
        adam_update(
            p.bias.as_slice_mut().expect("standard layout"),
            g.bias.as_slice().expect("standard layout"),
            m.bias.as_slice_mut().expect("standard layout"),
            v.bias.as_slice_mut().expect("standard layout"),
            step,
            lr,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Minimizing w² from w = 1 with lr 0.1; moments written out by hand.
    #[test]
    fn three_steps_on_a_parabola() {
        let (mut w, mut m, mut v) = ([1.0], [0.0], [0.0]);
        let mut trace = Vec::new();
        for step in 1..=3 {
            let g = [2.0 * w[0]];
            adam_update(&mut w, &g, &mut m, &mut v, step, 0.1);
            trace.push(w[0]);
        }
        // The first bias-corrected step has magnitude lr·|g| / (|g| + ε).
        assert!((trace[0] - (1.0 - 0.1 * 2.0 / (2.0 + 1e-8))).abs() < 1e-15);

        let (mut ew, mut em, mut ev) = (1.0f64, 0.0f64, 0.0f64);
        for (k, &got) in trace.iter().enumerate() {
            let t = (k + 1) as i32;
            let g = 2.0 * ew;
            em = 0.9 * em + 0.1 * g;
            ev = 0.999 * ev + 0.001 * g * g;
            let mh = em / (1.0 - 0.9f64.powi(t));
            let vh = ev / (1.0 - 0.999f64.powi(t));
            ew -= 0.1 * mh / (vh.sqrt() + 1e-8);
            assert!((got - ew).abs() < 1e-14, "step {t}: {got} vs {ew}");
        }
        let frozen = [
            0.900_000_000_5,
            0.800_412_228_691_792_7,
            0.701_586_272_946_03,
        ];
        for (got, want) in trace.iter().zip(frozen) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut w, mut m, mut v) = ([0.3, -0.7], [0.0; 2], [0.0; 2]);
        adam_update(&mut w, &[0.0, 0.0], &mut m, &mut v, 1, 0.5);
        assert_eq!(w, [0.3, -0.7]);
    }
}
