//! Fully connected feed-forward regression network trained by mini-batch
//! Adam on mean squared error.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, EncodedDataset, ModelError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplicative learning-rate decay applied after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
    /// Fraction of rows used for training in each split.
    pub train_fraction: f64,
    /// Number of repeated train/evaluation splits for cross-validation.
    pub folds: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_layers: vec![64, 64],
            activation: Activation::Tanh,
            epochs: 150,
            batch_size: 32,
            learning_rate: 3e-3,
            lr_decay: 0.99,
            seed: 0,
            train_fraction: 0.25,
            folds: 5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: &str| Err(ModelError::InvalidConfig(msg.to_string()));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("train_fraction must lie in (0, 1)");
        }
        if self.folds < 2 {
            return fail("folds must be at least 2");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.hidden_layers.contains(&0) {
            return fail("hidden layer widths must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail("lr_decay must lie in (0, 1]");
        }

        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `inputs × outputs`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Network with `activation` on every hidden layer and a linear output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Per-layer parameter gradients, shaped like [`Mlp::layers`].
pub type Gradients = Vec<Layer>;

impl Mlp {
    /// Glorot-uniform weights and zero biases drawn from `seed`.
    pub fn init(inputs: usize, hidden: &[usize], activation: Activation, seed: u64) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut widths = vec![inputs];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let layers = widths
            .windows(2)
            .map(|w| {
                let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || rng.random_range(-limit..limit)),
                    bias: Array1::zeros(w[1]),
                }
            })
            .collect();
        Mlp { layers, activation }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Activations of every layer, input first, output last (`n × 1`).
    fn forward_all(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = acts[l].dot(&layer.weights) + &layer.bias;
            if l < last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut out = self.forward_all(x);
        out.pop().expect("network has an output layer").column(0).to_owned()
    }

    /// Mean squared error on `(x, t)` and its gradient with respect to every
    /// parameter.
    pub fn loss_and_gradient(&self, x: ArrayView2<f64>, t: ArrayView1<f64>) -> (f64, Gradients) {
        let acts = self.forward_all(x);
        let n = x.nrows() as f64;
        let output = acts.last().expect("output").column(0);
        let err = &output - &t;
        let loss = err.mapv(|e| e * e).sum() / n;

        let mut delta: Array2<f64> = (err * (2.0 / n)).insert_axis(Axis(1));
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = &acts[l];
            grads.push(Layer {
                weights: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights.t());
                back.zip_mut_with(input, |d, &a| *d *= self.activation.derivative_from_output(a));
                delta = back;
            }
        }
        grads.reverse();
        (loss, grads)
    }

    pub fn mse(&self, x: ArrayView2<f64>, t: ArrayView1<f64>) -> f64 {
        let pred = self.predict(x);
        let n = t.len() as f64;
        pred.iter().zip(t.iter()).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n
    }

    pub(crate) fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Parameter `i` in the order of [`Mlp::flatten`].
    fn parameter_mut(&mut self, mut i: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let w = layer.weights.len();
            if i < w {
                return layer.weights.iter_mut().nth(i).expect("in range");
            }
            i -= w;
            if i < layer.bias.len() {
                return &mut layer.bias[i];
            }
            i -= layer.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub(crate) fn flatten(grads: &Gradients) -> Vec<f64> {
        grads
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    /// Largest relative discrepancy between backpropagated gradients and
    /// central finite differences with step `h`, over all parameters.
    /// Discrepancies are measured relative to `max(|analytic|, |numeric|, 1e-6)`.
    pub fn gradient_check(&self, x: ArrayView2<f64>, t: ArrayView1<f64>, h: f64) -> f64 {
        let (_, grads) = self.loss_and_gradient(x, t);
        let analytic = Mlp::flatten(&grads);
        let mut probe = self.clone();
        let mut worst = 0.0_f64;
        for (i, a) in analytic.iter().enumerate() {
            let original = *probe.parameter_mut(i);
            *probe.parameter_mut(i) = original + h;
            let plus = probe.mse(x, t);
            *probe.parameter_mut(i) = original - h;
            let minus = probe.mse(x, t);
            *probe.parameter_mut(i) = original;
            let numeric = (plus - minus) / (2.0 * h);
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
        }
        worst
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(size: usize) -> Self {
        Adam {
            m: vec![0.0; size],
            v: vec![0.0; size],
            step: 0,
        }
    }

    fn update(&mut self, mlp: &mut Mlp, grads: &Gradients, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let flat = Mlp::flatten(grads);
        for (((p, g), m), v) in mlp
            .parameters_mut()
            .zip(&flat)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

/// A network plus the target standardization it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub network: Mlp,
    pub target_mean: f64,
    pub target_scale: f64,
    pub config: ModelConfig,
    /// Training-set MSE (standardized target) after each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainedModel {
    /// Predictions on the dataset's target scale.
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.network
            .predict(x)
            .mapv(|z| z * self.target_scale + self.target_mean)
    }

    pub fn mse(&self, x: ArrayView2<f64>, t: ArrayView1<f64>) -> f64 {
        let pred = self.predict(x);
        pred.iter().zip(t.iter()).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / t.len() as f64
    }

    pub fn standardized_targets(&self, t: ArrayView1<f64>) -> Array1<f64> {
        t.mapv(|v| (v - self.target_mean) / self.target_scale)
    }
}

/// Trains a fresh network on every row of `data`. Weight initialization and
/// batch order derive from `config.seed` only.
pub fn train_mlp(data: &EncodedDataset, config: &ModelConfig) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let n = data.len();
    let target_mean = data.targets.sum() / n as f64;
    let var = data.targets.mapv(|t| (t - target_mean).powi(2)).sum() / n as f64;
    let target_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let targets = data.targets.mapv(|t| (t - target_mean) / target_scale);

    let mut network = Mlp::init(
        data.dim(),
        &config.hidden_layers,
        config.activation,
        derive_seed(config.seed, 0x1417),
    );
    let mut shuffler = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0xba7c4));
    let mut adam = Adam::new(network.parameter_count());
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = config.learning_rate;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffler);
        for batch in order.chunks(config.batch_size) {
            let x = data.features.select(Axis(0), batch);
            let t = targets.select(Axis(0), batch);
            let (_, grads) = network.loss_and_gradient(x.view(), t.view());
            adam.update(&mut network, &grads, lr);

        }
        let loss = network.mse(data.features.view(), targets.view());
        if !loss.is_finite() {
            return Err(ModelError::DivergedLoss { epoch });
        }
        epoch_losses.push(loss);
        lr *= config.lr_decay;
    }

    Ok(TrainedModel {
        network,
        target_mean,
        target_scale,
        config: config.clone(),
        epoch_losses,
    })
}
