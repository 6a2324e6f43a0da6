//! Adam with bias-corrected first and second moments.

use crate::error::Result;
use crate::predictor::mlp::{Gradients, MlpModel};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Optimizer state: one moment pair per parameter, plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<(Vec<f64>, Vec<f64>)>,
    v: Vec<(Vec<f64>, Vec<f64>)>,
    t: u64,
}

impl AdamState {
    pub fn new(model: &MlpModel) -> Self {
        let shapes: Vec<(Vec<f64>, Vec<f64>)> = model
            .layers()
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.bias.len()]))
            .collect();
        Self { m: shapes.clone(), v: shapes, t: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One Adam update with explicit hyperparameters. Rejects non-finite
/// gradients before touching the model.
pub fn adam_step_with(
    model: &mut MlpModel,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<()> {
    grads.assert_finite()?;
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);

    for (li, grad) in grads.layers.iter().enumerate() {
        let layer = &mut model.layers[li];
        let (mw, mb) = &mut state.m[li];
        let (vw, vb) = &mut state.v[li];
        for (((p, g), m), v) in
            layer.weights.iter_mut().zip(&grad.weights).zip(mw.iter_mut()).zip(vw.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
        for (((p, g), m), v) in
            layer.bias.iter_mut().zip(&grad.bias).zip(mb.iter_mut()).zip(vb.iter_mut())
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
        }
    }
    Ok(())
}

/// One Adam update with the standard defaults.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    adam_step_with(model, grads, state, lr, ADAM_BETA1, ADAM_BETA2, ADAM_EPS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::mlp::{Head, MlpConfig, MlpModel};

    fn small_model(seed: u64) -> MlpModel {
        let config = MlpConfig {
            input_dim: 2,
            hidden_layers: vec![3],
            output_dim: 2,
            head: Head::SigmoidRegression,
            dropout: 0.0,
            learning_rate: 1e-3,
            batch_size: 1,
            max_epochs: 1,
            patience: 1,
            seed,
        };
        MlpModel::init(config).unwrap()
    }

    fn constant_grads(model: &MlpModel, value: f64) -> Gradients {
        let mut g = Gradients::zeros_like(model);
        for layer in g.layers.iter_mut() {
            layer.weights.iter_mut().for_each(|w| *w = value);
            layer.bias.iter_mut().for_each(|b| *b = value);
        }
        g
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut model = small_model(1);
        let before = model.clone();
        let mut state = AdamState::new(&model);
        let grads = constant_grads(&model, 0.0);
        adam_step(&mut model, &grads, &mut state, 0.1).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // At t = 1 the bias-corrected ratio m/sqrt(v) equals g/|g| up to eps.
        let mut model = small_model(2);
        let before = model.clone();
        let mut state = AdamState::new(&model);
        let lr = 0.05;
        let grads = constant_grads(&model, 3.0);
        adam_step(&mut model, &grads, &mut state, lr).unwrap();
        for (after, orig) in model.layers().iter().zip(before.layers()) {
            for (a, o) in after.weights.iter().zip(&orig.weights) {
                let step = o - a;
                assert!((step - lr).abs() < 1e-6, "step {step} should be about {lr}");
            }
        }
    }

    #[test]
    fn two_steps_match_hand_rolled_recurrence() {
        let mut model = small_model(3);
        let start = model.layers()[0].weights[0];
        let mut state = AdamState::new(&model);
        let (g1, g2) = (0.5, -0.25);
        let lr = 0.01;
        let grads1 = constant_grads(&model, g1);
        adam_step(&mut model, &grads1, &mut state, lr).unwrap();
        let grads2 = constant_grads(&model, g2);
        adam_step(&mut model, &grads2, &mut state, lr).unwrap();

        // Hand-rolled trace of the same recurrence for one coordinate.
        let (b1, b2, eps) = (ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
        let mut m = 0.0;
        let mut v = 0.0;
        let mut p = start;
        for (t, g) in [(1, g1), (2, g2)] {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            p -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((model.layers()[0].weights[0] - p).abs() < 1e-15);
        assert_eq!(state.step_count(), 2);
    }

    #[test]
    fn non_finite_gradient_rejected_before_update() {
        let mut model = small_model(4);
        let before = model.clone();
        let mut state = AdamState::new(&model);
        let mut grads = constant_grads(&model, 1.0);
        grads.layers[0].weights[1] = f64::NAN;
        assert!(adam_step(&mut model, &grads, &mut state, 0.1).is_err());
        assert_eq!(model, before);
        assert_eq!(state.step_count(), 0);
    }
}
