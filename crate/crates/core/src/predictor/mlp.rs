//! Dense feed-forward networks with ReLU hidden layers and either a sigmoid
//! regression head or a softmax classification head. Forward, loss, and
//! exact backprop gradients are hand-rolled; no autodiff framework.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output head of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    /// Elementwise sigmoid; outputs live in (0, 1).
    SigmoidRegression,
    /// Raw logits; softmax is applied inside the cross-entropy loss.
    SoftmaxClassification,
}

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
    pub head: Head,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before training stops; must be
    /// at least 1.
    pub patience: usize,
    pub seed: u64,
}

impl MlpConfig {
    /// Profile regression defaults: two 256-unit hidden layers, MSE loss.
    pub fn regression(input_dim: usize, output_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: vec![256, 256],
            output_dim,
            head: Head::SigmoidRegression,
            dropout: 0.0,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 0,
        }
    }

    /// Three-class difficulty head defaults: cross-entropy, batch 32,
    /// lr 1e-4, up to 50 epochs with early stopping on validation accuracy.
    pub fn classification(input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_layers: vec![256, 256],
            output_dim: 3,
            head: Head::SoftmaxClassification,
            dropout: 0.1,
            learning_rate: 1e-4,
            batch_size: 32,
            max_epochs: 50,
            patience: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidConfig("zero input or output dimension".to_string()));
        }
        if self.hidden_layers.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("hidden layer widths must be >= 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidConfig(format!("bad learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".to_string()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidConfig("max_epochs must be >= 1".to_string()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig(
                "patience must be >= 1 (zero would never keep a best epoch)".to_string(),
            ));
        }
        if self.head == Head::SoftmaxClassification && self.output_dim < 2 {
            return Err(Error::InvalidConfig("classification needs >= 2 outputs".to_string()));
        }
        Ok(())
    }

    /// Layer dimension chain input -> hidden... -> output.
    fn dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_layers.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_layers);
        dims.push(self.output_dim);
        dims
    }
}

/// One dense layer; weights are row-major `[out_dim][in_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn affine(&self, x: &[f64], z: &mut [f64]) {
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (w, v) in row.iter().zip(x) {
                acc += w * v;
            }
            z[o] = acc;
        }
    }
}

/// A network plus the configuration it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) layers: Vec<DenseLayer>,
    config: MlpConfig,
}

/// Per-parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    pub fn assert_finite(&self) -> Result<()> {
        for (li, layer) in self.layers.iter().enumerate() {
            if let Some(p) = layer.weights.iter().chain(&layer.bias).position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of layer {li}, parameter {p}")));
            }
        }
        Ok(())
    }
}

/// Inverted-dropout scale factors per hidden layer: 0.0 for dropped units,
/// `1/(1-p)` for kept ones. Shape: per hidden layer, batch * width.
#[derive(Debug, Clone)]
pub struct DropoutMasks {
    pub(crate) scales: Vec<Vec<f64>>,
}

impl DropoutMasks {
    /// Draws masks for a batch; `None` when the config disables dropout.
    pub fn sample(config: &MlpConfig, batch: usize, rng: &mut impl Rng) -> Option<Self> {
        if config.dropout == 0.0 {
            return None;
        }
        let keep = 1.0 - config.dropout;
        let scales = config
            .hidden_layers
            .iter()
            .map(|&width| {
                (0..batch * width)
                    .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect()
            })
            .collect();
        Some(Self { scales })
    }
}

/// Training-targets for a batch: one profile row per sample, or one class
/// index per sample.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Profiles(Vec<Vec<f64>>),
    Classes(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Profiles(rows) => rows.len(),
            Targets::Classes(labels) => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn check(&self, batch: usize, config: &MlpConfig) -> Result<()> {
        if self.len() != batch {
            return Err(Error::ShapeMismatch(format!(
                "{} targets for a batch of {batch}",
                self.len()
            )));
        }
        match (self, config.head) {
            (Targets::Profiles(rows), Head::SigmoidRegression) => {
                for row in rows {
                    if row.len() != config.output_dim {
                        return Err(Error::ShapeMismatch(format!(
                            "target row has {} entries, model outputs {}",
                            row.len(),
                            config.output_dim
                        )));
                    }
                }
                Ok(())
            }
            (Targets::Classes(labels), Head::SoftmaxClassification) => {
                for &label in labels {
                    if label >= config.output_dim {
                        return Err(Error::ShapeMismatch(format!(
                            "class {label} out of range for {} outputs",
                            config.output_dim
                        )));
                    }
                }
                Ok(())
            }
            _ => Err(Error::ShapeMismatch("targets do not match the model head".to_string())),
        }
    }
}

pub(crate) struct ForwardPass {
    /// Inputs to each layer: `acts[0]` is the batch, `acts[l]` the
    /// (relu + dropout) output of layer `l - 1`. Flattened batch-major.
    pub acts: Vec<Vec<f64>>,
    /// Pre-activations of each layer.
    pub zs: Vec<Vec<f64>>,
    /// Head outputs: sigmoid probabilities or raw logits, batch-major.
    pub outputs: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable log-softmax denominators: returns (max, log-sum-exp).
fn log_sum_exp(logits: &[f64]) -> (f64, f64) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum();
    (max, max + sum.ln())
}

impl MlpModel {
    /// Initializes with uniform Glorot weights (`+-sqrt(6/(fan_in+fan_out))`)
    /// and zero biases, seeded from the config.
    pub fn init(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dims = config.dims();
        let layers = dims
            .windows(2)
            .map(|pair| {
                let (in_dim, out_dim) = (pair[0], pair[1]);
                let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
                DenseLayer {
                    in_dim,
                    out_dim,
                    weights: (0..in_dim * out_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
                    bias: vec![0.0; out_dim],
                }
            })
            .collect();
        Ok(Self { layers, config })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn from_parts(layers: Vec<DenseLayer>, config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.dims();
        if layers.len() + 1 != dims.len() {
            return Err(Error::ShapeMismatch("layer count does not match config".to_string()));
        }
        for (layer, pair) in layers.iter().zip(dims.windows(2)) {
            if layer.in_dim != pair[0]
                || layer.out_dim != pair[1]
                || layer.weights.len() != layer.in_dim * layer.out_dim
                || layer.bias.len() != layer.out_dim
            {
                return Err(Error::ShapeMismatch("layer dimensions inconsistent".to_string()));
            }
            if layer.weights.iter().chain(&layer.bias).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("checkpoint parameter".to_string()));
            }
        }
        Ok(Self { layers, config })
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[Vec<f64>]) -> Result<()> {
        for row in x {
            if row.len() != self.config.input_dim {
                return Err(Error::ShapeMismatch(format!(
                    "input has {} features, model expects {}",
                    row.len(),
                    self.config.input_dim
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("model input".to_string()));
            }
        }
        Ok(())
    }

    /// Full forward pass with caches for backprop. Masks, when given, apply
    /// inverted dropout to the hidden activations (training mode).
    pub(crate) fn forward_cached(
        &self,
        x: &[Vec<f64>],
        masks: Option<&DropoutMasks>,
    ) -> Result<ForwardPass> {
        self.check_input(x)?;
        if let Some(m) = masks {
            if m.scales.len() != self.config.hidden_layers.len() {
                return Err(Error::ShapeMismatch("dropout masks do not match hidden layers".to_string()));
            }
        }
        let batch = x.len();
        let num_layers = self.layers.len();
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(num_layers + 1);
        acts.push(x.iter().flat_map(|r| r.iter().copied()).collect());
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(num_layers);

        for (li, layer) in self.layers.iter().enumerate() {
            let input = &acts[li];
            let mut z = vec![0.0; batch * layer.out_dim];
            for s in 0..batch {
                layer.affine(
                    &input[s * layer.in_dim..(s + 1) * layer.in_dim],
                    &mut z[s * layer.out_dim..(s + 1) * layer.out_dim],
                );
            }
            let is_output = li + 1 == num_layers;
            if is_output {
                zs.push(z);
                break;
            }
            let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
            if let Some(m) = masks {
                for (av, &scale) in a.iter_mut().zip(&m.scales[li]) {
                    *av *= scale;
                }
            }
            zs.push(z);
            acts.push(a);
        }

        let z_out = zs.last().expect("at least one layer");
        let outputs = match self.config.head {
            Head::SigmoidRegression => z_out.iter().map(|&z| sigmoid(z)).collect(),
            Head::SoftmaxClassification => z_out.clone(),
        };
        Ok(ForwardPass { acts, zs, outputs })
    }

    /// Batch inference (no dropout). Regression returns sigmoid
    /// probabilities; classification returns raw logits.
    pub fn forward(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let pass = self.forward_cached(x, None)?;
        let d = self.config.output_dim;
        Ok(x.iter().enumerate().map(|(s, _)| pass.outputs[s * d..(s + 1) * d].to_vec()).collect())
    }

    /// Single-sample inference.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(std::slice::from_ref(&x.to_vec()))?.pop().expect("one row"))
    }

    /// Softmax class probabilities for one sample (classification head).
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.config.head != Head::SoftmaxClassification {
            return Err(Error::InvalidConfig("predict_proba needs the classification head".to_string()));
        }
        let logits = self.predict(x)?;
        let (_, lse) = log_sum_exp(&logits);
        Ok(logits.iter().map(|&z| (z - lse).exp()).collect())
    }
}

/// Mean loss of a batch: MSE over all entries for regression, mean negative
/// log softmax probability of the true class for classification.
pub fn loss(
    model: &MlpModel,
    x: &[Vec<f64>],
    targets: &Targets,
    masks: Option<&DropoutMasks>,
) -> Result<f64> {
    targets.check(x.len(), model.config())?;
    let pass = model.forward_cached(x, masks)?;
    Ok(loss_from_pass(model, &pass, targets))
}

fn loss_from_pass(model: &MlpModel, pass: &ForwardPass, targets: &Targets) -> f64 {
    let d = model.config.output_dim;
    match targets {
        Targets::Profiles(rows) => {
            let mut sum = 0.0;
            for (s, row) in rows.iter().enumerate() {
                for (o, &t) in row.iter().enumerate() {
                    let diff = pass.outputs[s * d + o] - t;
                    sum += diff * diff;
                }
            }
            sum / (rows.len() * d) as f64
        }
        Targets::Classes(labels) => {
            let mut sum = 0.0;
            for (s, &label) in labels.iter().enumerate() {
                let logits = &pass.outputs[s * d..(s + 1) * d];
                let (_, lse) = log_sum_exp(logits);
                sum += lse - logits[label];
            }
            sum / labels.len() as f64
        }
    }
}

/// Loss and exact analytic gradients for a batch. The same masks must be
/// passed to reproduce a given training-mode forward pass.
pub fn gradient(
    model: &MlpModel,
    x: &[Vec<f64>],
    targets: &Targets,
    masks: Option<&DropoutMasks>,
) -> Result<(f64, Gradients)> {
    targets.check(x.len(), model.config())?;
    let pass = model.forward_cached(x, masks)?;
    let loss_value = loss_from_pass(model, &pass, targets);

    let batch = x.len();
    let d = model.config.output_dim;
    let num_layers = model.layers.len();

    // delta at the output pre-activation
    let mut delta = vec![0.0; batch * d];
    match targets {
        Targets::Profiles(rows) => {
            let scale = 2.0 / (batch * d) as f64;
            for (s, row) in rows.iter().enumerate() {
                for (o, &t) in row.iter().enumerate() {
                    let y = pass.outputs[s * d + o];
                    delta[s * d + o] = scale * (y - t) * y * (1.0 - y);
                }
            }
        }
        Targets::Classes(labels) => {
            let scale = 1.0 / batch as f64;
            for (s, &label) in labels.iter().enumerate() {
                let logits = &pass.outputs[s * d..(s + 1) * d];
                let (_, lse) = log_sum_exp(logits);
                for o in 0..d {
                    let p = (logits[o] - lse).exp();
                    delta[s * d + o] = scale * (p - if o == label { 1.0 } else { 0.0 });
                }
            }
        }
    }

    let mut grads = Gradients::zeros_like(model);
    for li in (0..num_layers).rev() {
        let layer = &model.layers[li];
        let input = &pass.acts[li];
        let grad = &mut grads.layers[li];
        for s in 0..batch {
            let dz = &delta[s * layer.out_dim..(s + 1) * layer.out_dim];
            let xin = &input[s * layer.in_dim..(s + 1) * layer.in_dim];
            for o in 0..layer.out_dim {
                let g = dz[o];
                grad.bias[o] += g;
                let row = &mut grad.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (w, &v) in row.iter_mut().zip(xin) {
                    *w += g * v;
                }
            }
        }
        if li == 0 {
            break;
        }
        // propagate to the previous layer through relu and dropout
        let mut next_delta = vec![0.0; batch * layer.in_dim];
        for s in 0..batch {
            let dz = &delta[s * layer.out_dim..(s + 1) * layer.out_dim];
            let out = &mut next_delta[s * layer.in_dim..(s + 1) * layer.in_dim];
            for o in 0..layer.out_dim {
                let g = dz[o];
                if g == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (ov, &w) in out.iter_mut().zip(row) {
                    *ov += g * w;
                }
            }
        }
        let z_prev = &pass.zs[li - 1];
        for (i, dv) in next_delta.iter_mut().enumerate() {
            if z_prev[i] <= 0.0 {
                *dv = 0.0;
            } else if let Some(m) = masks {
                *dv *= m.scales[li - 1][i];
            }
        }
        delta = next_delta;
    }

    Ok((loss_value, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(input: usize, hidden: Vec<usize>, output: usize, head: Head) -> MlpConfig {
        MlpConfig {
            input_dim: input,
            hidden_layers: hidden,
            output_dim: output,
            head,
            dropout: 0.0,
            learning_rate: 1e-3,
            batch_size: 4,
            max_epochs: 10,
            patience: 2,
            seed: 7,
        }
    }

    #[test]
    fn zero_weights_sigmoid_outputs_half() {
        let config = tiny_config(3, vec![4], 2, Head::SigmoidRegression);
        let mut model = MlpModel::init(config).unwrap();
        for layer in model.layers.iter_mut() {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        let out = model.predict(&[0.3, -0.7, 2.0]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn one_by_one_network_is_plain_sigmoid() {
        let config = tiny_config(1, vec![], 1, Head::SigmoidRegression);
        let mut model = MlpModel::init(config).unwrap();
        model.layers[0].weights[0] = 1.0;
        model.layers[0].bias[0] = 0.0;
        assert_eq!(model.predict(&[0.0]).unwrap(), vec![0.5]);
        let y = model.predict(&[2.0]).unwrap()[0];
        assert!((y - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn forward_matches_matrix_arithmetic_oracle() {
        // 4 -> 3 -> 2, fixed seed; recompute with explicit loops.
        let config = tiny_config(4, vec![3], 2, Head::SigmoidRegression);
        let model = MlpModel::init(config).unwrap();
        let x = vec![0.25, -1.5, 0.75, 2.0];

        let l0 = &model.layers[0];
        let mut h = vec![0.0; 3];
        for o in 0..3 {
            let mut acc = l0.bias[o];
            for i in 0..4 {
                acc += l0.weights[o * 4 + i] * x[i];
            }
            h[o] = acc.max(0.0);
        }
        let l1 = &model.layers[1];
        let mut expect = vec![0.0; 2];
        for o in 0..2 {
            let mut acc = l1.bias[o];
            for i in 0..3 {
                acc += l1.weights[o * 3 + i] * h[i];
            }
            expect[o] = 1.0 / (1.0 + (-acc).exp());
        }

        let got = model.predict(&x).unwrap();
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let config = tiny_config(4, vec![3], 2, Head::SigmoidRegression);
        let model = MlpModel::init(config).unwrap();
        assert!(matches!(model.predict(&[1.0, 2.0]), Err(Error::ShapeMismatch(_))));
        assert!(matches!(model.predict(&[1.0, 2.0, f64::NAN, 0.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn sigmoid_outputs_strictly_inside_unit_interval() {
        // Magnitudes below the f64 saturation point of sigmoid (~36.7 in z).
        let config = tiny_config(2, vec![8, 8], 4, Head::SigmoidRegression);
        let model = MlpModel::init(config).unwrap();
        for mag in [0.1, 1.0, 5.0] {
            let out = model.predict(&[mag, -mag]).unwrap();
            assert!(out.iter().all(|&y| y > 0.0 && y < 1.0));
        }
    }

    #[test]
    fn softmax_probabilities_sum_to_one() {
        let config = tiny_config(5, vec![6], 3, Head::SoftmaxClassification);
        let model = MlpModel::init(config).unwrap();
        let p = model.predict_proba(&[1.0, -2.0, 0.5, 0.0, 3.0]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_loss_at_exact_targets() {
        let config = tiny_config(2, vec![3], 2, Head::SigmoidRegression);
        let model = MlpModel::init(config).unwrap();
        let x = vec![vec![0.5, -0.5]];
        let out = model.forward(&x).unwrap();
        let targets = Targets::Profiles(out);
        assert_eq!(loss(&model, &x, &targets, None).unwrap(), 0.0);
        // Stationarity: output-layer bias gradient vanishes at zero residual.
        let (_, grads) = gradient(&model, &x, &targets, None).unwrap();
        for g in &grads.layers.last().unwrap().bias {
            assert!(g.abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_logits_cross_entropy_is_ln3() {
        let config = tiny_config(2, vec![], 3, Head::SoftmaxClassification);
        let mut model = MlpModel::init(config).unwrap();
        model.layers[0].weights.iter_mut().for_each(|w| *w = 0.0);
        let x = vec![vec![1.0, -1.0]];
        for label in 0..3 {
            let l = loss(&model, &x, &Targets::Classes(vec![label]), None).unwrap();
            assert!((l - 3.0f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_batch_loss_matches_hand_computation() {
        let config = tiny_config(1, vec![], 2, Head::SigmoidRegression);
        let mut model = MlpModel::init(config).unwrap();
        model.layers[0].weights.copy_from_slice(&[1.0, -1.0]);
        model.layers[0].bias.copy_from_slice(&[0.0, 0.5]);
        let x = vec![vec![1.0], vec![-2.0]];
        let targets = Targets::Profiles(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        // Hand computation: outputs s(1), s(-0.5); s(-2), s(2.5).
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let expect = ((s(1.0) - 1.0).powi(2)
            + s(-0.5).powi(2)
            + s(-2.0).powi(2)
            + (s(2.5) - 1.0).powi(2))
            / 4.0;
        let got = loss(&model, &x, &targets, None).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    /// True when every hidden pre-activation sits clear of the relu kink, so
    /// a central difference with step 1e-5 stays on one side of it.
    fn fd_safe(model: &MlpModel, x: &[Vec<f64>]) -> bool {
        let pass = model.forward_cached(x, None).unwrap();
        let hidden = pass.zs.len() - 1;
        pass.zs[..hidden].iter().flatten().all(|&z| z.abs() > 1e-3)
    }

    /// Central finite differences over every parameter.
    fn finite_difference_check(model: &MlpModel, x: &[Vec<f64>], targets: &Targets) {
        let (_, grads) = gradient(model, x, targets, None).unwrap();
        let h = 1e-5;
        for li in 0..model.layers.len() {
            for wi in 0..model.layers[li].weights.len() + model.layers[li].bias.len() {
                let read = |m: &MlpModel| -> f64 { loss(m, x, targets, None).unwrap() };
                let mut plus = model.clone();
                let mut minus = model.clone();
                let bump = |m: &mut MlpModel, delta: f64| {
                    let layer = &mut m.layers[li];
                    if wi < layer.weights.len() {
                        layer.weights[wi] += delta;
                    } else {
                        let bi = wi - layer.weights.len();
                        layer.bias[bi] += delta;
                    }
                };
                bump(&mut plus, h);
                bump(&mut minus, -h);
                let numeric = (read(&plus) - read(&minus)) / (2.0 * h);
                let analytic = {
                    let layer = &grads.layers[li];
                    if wi < layer.weights.len() {
                        layer.weights[wi]
                    } else {
                        layer.bias[wi - layer.weights.len()]
                    }
                };
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    (numeric - analytic).abs() / denom < 1e-4,
                    "layer {li} param {wi}: numeric {numeric} vs analytic {analytic}"
                );
            }
        }
    }

    /// Draws (inputs, profile targets) away from relu kinks, re-rolling the
    /// inputs until the finite-difference window is valid.
    fn fd_fixture(
        model: &MlpModel,
        rng: &mut rand_chacha::ChaCha8Rng,
        samples: usize,
    ) -> Vec<Vec<f64>> {
        use rand::Rng;
        let dim = model.config().input_dim;
        loop {
            let x: Vec<Vec<f64>> = (0..samples)
                .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            if fd_safe(model, &x) {
                return x;
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_both_heads() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..4 {
            let config = tiny_config(3, vec![4, 3], 2, Head::SigmoidRegression);
            let config = MlpConfig { seed: 100 + trial, ..config };
            let model = MlpModel::init(config).unwrap();
            let x = fd_fixture(&model, &mut rng, 3);
            let t = Targets::Profiles(
                (0..3).map(|_| (0..2).map(|_| rng.gen::<f64>()).collect()).collect(),
            );
            finite_difference_check(&model, &x, &t);

            let config = tiny_config(3, vec![4], 3, Head::SoftmaxClassification);
            let config = MlpConfig { seed: 200 + trial, ..config };
            let model = MlpModel::init(config).unwrap();
            let x = fd_fixture(&model, &mut rng, 3);
            let labels = Targets::Classes((0..3).map(|s| s % 3).collect());
            finite_difference_check(&model, &x, &labels);
        }
    }

    #[test]
    fn dropout_gradient_matches_finite_differences_with_fixed_mask() {
        use rand::SeedableRng;
        let mut config = tiny_config(3, vec![5], 2, Head::SigmoidRegression);
        config.dropout = 0.4;
        let model = MlpModel::init(config.clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let masks = DropoutMasks::sample(&config, 2, &mut rng).unwrap();
        let x = vec![vec![0.5, -1.0, 0.25], vec![1.5, 0.0, -0.5]];
        let targets = Targets::Profiles(vec![vec![0.2, 0.9], vec![0.7, 0.1]]);

        let (_, grads) = gradient(&model, &x, &targets, Some(&masks)).unwrap();
        let h = 1e-5;
        let layer = 0;
        for wi in 0..6 {
            let mut plus = model.clone();
            plus.layers[layer].weights[wi] += h;
            let mut minus = model.clone();
            minus.layers[layer].weights[wi] -= h;
            let numeric = (loss(&plus, &x, &targets, Some(&masks)).unwrap()
                - loss(&minus, &x, &targets, Some(&masks)).unwrap())
                / (2.0 * h);
            let analytic = grads.layers[layer].weights[wi];
            let denom = numeric.abs().max(analytic.abs()).max(1e-8);
            assert!((numeric - analytic).abs() / denom < 1e-4);
        }
    }

    #[test]
    fn duplicating_every_sample_preserves_mean_gradient() {
        let config = tiny_config(2, vec![3], 2, Head::SigmoidRegression);
        let model = MlpModel::init(config).unwrap();
        let x = vec![vec![0.4, -0.6], vec![1.0, 0.5]];
        let t = vec![vec![0.9, 0.1], vec![0.3, 0.7]];
        let (l1, g1) = gradient(&model, &x, &Targets::Profiles(t.clone()), None).unwrap();
        let xx: Vec<Vec<f64>> = x.iter().chain(&x).cloned().collect();
        let tt: Vec<Vec<f64>> = t.iter().chain(&t).cloned().collect();
        let (l2, g2) = gradient(&model, &xx, &Targets::Profiles(tt), None).unwrap();
        assert!((l1 - l2).abs() < 1e-15);
        for (a, b) in g1.layers.iter().zip(&g2.layers) {
            for (wa, wb) in a.weights.iter().zip(&b.weights) {
                assert!((wa - wb).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn patience_zero_is_a_config_error() {
        let mut config = tiny_config(2, vec![3], 2, Head::SigmoidRegression);
        config.patience = 0;
        assert!(matches!(MlpModel::init(config), Err(Error::InvalidConfig(_))));
    }
}
