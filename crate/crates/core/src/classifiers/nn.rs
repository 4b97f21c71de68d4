//! Wide fully connected network: `d → h (ReLU) → K (softmax)`.
//!
//! Parameters live in one flat vector laid out as
//! `[W1 (d×h, row-major), b1 (h), W2 (h×K, row-major), b2 (K)]`, which keeps
//! the gradient step and finite-difference checks simple.
//!
//! Training is gradient descent on mean cross-entropy with an adaptive step:
//! an epoch whose update raises the full-batch loss is rolled back and the
//! step halved, an accepted epoch grows the step by 5 %. The recorded
//! training loss is therefore non-increasing.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_training_set, ClassifierError, Prediction};
use crate::features::FeatureVector;
use crate::model::ClassLabel;

const K: usize = ClassLabel::COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct NnConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// `None` trains on the full batch every step.
    pub batch_size: Option<usize>,
    /// Stop once the training loss falls below this.
    pub tolerance: f64,
    /// Z-score inputs with training statistics stored in the model.
    pub standardize_inputs: bool,
    pub seed: u64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            hidden: 10,
            learning_rate: 0.5,
            max_epochs: 1000,
            batch_size: None,
            tolerance: 1e-4,
            standardize_inputs: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WideNnModel {
    dim: usize,
    hidden: usize,
    input_mean: Vec<f64>,
    input_scale: Vec<f64>,
    params: Vec<f64>,
}

/// Gradient of the mean loss, same layout as the parameter vector.
pub type NnGradient = Vec<f64>;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    max + logits.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

struct Forward {
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: Vec<f64>,
}

impl WideNnModel {
    pub fn param_count(dim: usize, hidden: usize) -> usize {
        dim * hidden + hidden + hidden * K + K
    }

    /// A network with explicit parameters and identity input scaling.
    pub fn from_parameters(dim: usize, hidden: usize, params: Vec<f64>) -> Result<Self, ClassifierError> {
        Self::from_parts(dim, hidden, vec![0.0; dim], vec![1.0; dim], params)
    }

    pub fn from_parts(
        dim: usize,
        hidden: usize,
        input_mean: Vec<f64>,
        input_scale: Vec<f64>,
        params: Vec<f64>,
    ) -> Result<Self, ClassifierError> {
        let expected = Self::param_count(dim, hidden);
        if params.len() != expected {
            return Err(ClassifierError::DimensionMismatch { expected, got: params.len() });
        }
        if input_mean.len() != dim || input_scale.len() != dim {
            return Err(ClassifierError::DimensionMismatch { expected: dim, got: input_mean.len() });
        }
        if dim == 0 || hidden == 0 {
            return Err(ClassifierError::InvalidConfig("network layers must be non-empty".into()));
        }
        Ok(Self { dim, hidden, input_mean, input_scale, params })
    }

    /// Glorot-uniform first layer, zero biases and a zero output layer, so
    /// the untrained network scores every class 1/K.
    pub fn initialize(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let mut params = vec![0.0; Self::param_count(dim, hidden)];
        let limit = (6.0 / (dim + hidden) as f64).sqrt();
        for w in &mut params[..dim * hidden] {
            *w = rng.random_range(-limit..limit);
        }
        Self {
            dim,
            hidden,
            input_mean: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_mean(&self) -> &[f64] {
        &self.input_mean
    }

    pub fn input_scale(&self) -> &[f64] {
        &self.input_scale
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.dim * self.hidden;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.hidden * K;
        (b1, w2, b2)
    }

    fn scale_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_mean)
            .zip(&self.input_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    fn forward(&self, params: &[f64], z: &[f64]) -> Forward {
        let (h, d) = (self.hidden, self.dim);
        let (ob1, ow2, ob2) = self.offsets();
        let mut pre = params[ob1..ow2].to_vec();
        for (i, &xi) in z.iter().enumerate().take(d) {
            if xi == 0.0 {
                continue;
            }
            for (p, w) in pre.iter_mut().zip(&params[i * h..(i + 1) * h]) {
                *p += xi * w;
            }
        }
        let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
        let mut logits = params[ob2..ob2 + K].to_vec();
        for (j, &a) in act.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (l, w) in logits.iter_mut().zip(&params[ow2 + j * K..ow2 + (j + 1) * K]) {
                *l += a * w;
            }
        }
        Forward { pre, act, logits }
    }

    /// Output-layer pre-activations for a raw (unscaled) input.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        if x.len() != self.dim {
            return Err(ClassifierError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.forward(&self.params, &self.scale_input(x)).logits)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifierError> {
        let scores = softmax(&self.logits(x)?);
        let best = scores
            .iter()
            .enumerate()
            .fold(0, |best, (i, &s)| if s > scores[best] { i } else { best });
        Ok(Prediction {
            label: ClassLabel::from_index(best).unwrap(),
            scores,
        })
    }

    fn batch_loss_and_gradient(
        &self,
        params: &[f64],
        inputs: &[Vec<f64>],
        labels: &[ClassLabel],
        batch: &[usize],
        want_gradient: bool,
    ) -> (f64, NnGradient) {
        let (h, d) = (self.hidden, self.dim);
        let (ob1, ow2, ob2) = self.offsets();
        let mut grad = if want_gradient { vec![0.0; params.len()] } else { Vec::new() };
        let mut loss = 0.0;
        let inv_n = 1.0 / batch.len() as f64;
        for &s in batch {
            let z = &inputs[s];
            let y = labels[s].index();
            let f = self.forward(params, z);
            loss += log_sum_exp(&f.logits) - f.logits[y];
            if !want_gradient {
                continue;
            }
            let mut delta_out = softmax(&f.logits);
            delta_out[y] -= 1.0;
            for (k, dk) in delta_out.iter().enumerate() {
                grad[ob2 + k] += dk * inv_n;
            }
            let mut delta_hidden = vec![0.0; h];
            for j in 0..h {
                let row = &params[ow2 + j * K..ow2 + (j + 1) * K];
                if f.act[j] != 0.0 {
                    for k in 0..K {
                        grad[ow2 + j * K + k] += f.act[j] * delta_out[k] * inv_n;
                    }
                }
                if f.pre[j] > 0.0 {
                    delta_hidden[j] = row.iter().zip(&delta_out).map(|(w, dk)| w * dk).sum();
                }
            }
            for j in 0..h {
                grad[ob1 + j] += delta_hidden[j] * inv_n;
            }
            for i in 0..d {
                if z[i] == 0.0 {
                    continue;
                }
                for j in 0..h {
                    grad[i * h + j] += z[i] * delta_hidden[j] * inv_n;
                }
            }
        }
        (loss * inv_n, grad)
    }

    /// Mean cross-entropy over `(x, label)` pairs and its gradient with
    /// respect to the parameters. Inputs are raw; the model's input scaling
    /// is applied first.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], labels: &[ClassLabel]) -> (f64, NnGradient) {
        let inputs: Vec<Vec<f64>> = xs.iter().map(|x| self.scale_input(x)).collect();
        let all: Vec<usize> = (0..inputs.len()).collect();
        self.batch_loss_and_gradient(&self.params, &inputs, labels, &all, true)
    }

    pub fn loss(&self, xs: &[Vec<f64>], labels: &[ClassLabel]) -> f64 {
        let inputs: Vec<Vec<f64>> = xs.iter().map(|x| self.scale_input(x)).collect();
        let all: Vec<usize> = (0..inputs.len()).collect();
        self.batch_loss_and_gradient(&self.params, &inputs, labels, &all, false).0
    }
}

/// Trains a network and returns it with the full-batch loss recorded before
/// training and after every epoch.
pub fn nn_fit_with_trace(
    features: &[FeatureVector],
    config: &NnConfig,
) -> Result<(WideNnModel, Vec<f64>), ClassifierError> {
    let dim = check_training_set(features)?;
    if features.iter().map(|f| f.label).collect::<std::collections::BTreeSet<_>>().len() < 2 {
        return Err(ClassifierError::ClassAbsent);
    }
    if config.hidden == 0 || !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(ClassifierError::InvalidConfig("hidden width and learning rate must be positive".into()));
    }
    if config.batch_size == Some(0) {
        return Err(ClassifierError::InvalidConfig("batch size must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = WideNnModel::initialize(dim, config.hidden, &mut rng);
    if config.standardize_inputs {
        let n = features.len() as f64;
        for i in 0..dim {
            let mean = features.iter().map(|f| f.values[i]).sum::<f64>() / n;
            let var = features.iter().map(|f| (f.values[i] - mean).powi(2)).sum::<f64>() / n;
            model.input_mean[i] = mean;
            model.input_scale[i] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
    }

    let inputs: Vec<Vec<f64>> = features.iter().map(|f| model.scale_input(&f.values)).collect();
    let labels: Vec<ClassLabel> = features.iter().map(|f| f.label).collect();
    let all: Vec<usize> = (0..inputs.len()).collect();
    let full_loss = |m: &WideNnModel, p: &[f64]| m.batch_loss_and_gradient(p, &inputs, &labels, &all, false).0;

    let mut loss = full_loss(&model, &model.params);
    if !loss.is_finite() {
        return Err(ClassifierError::DivergenceDetected { epoch: 0 });
    }
    let mut trace = vec![loss];
    let mut lr = config.learning_rate;
    let batch = config.batch_size.unwrap_or(inputs.len()).min(inputs.len());
    let mut order = all.clone();

    for epoch in 1..=config.max_epochs {
        if loss < config.tolerance || lr < 1e-12 {
            break;
        }
        let mut candidate = model.params.clone();
        if batch < inputs.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let (_, g) = model.batch_loss_and_gradient(&candidate, &inputs, &labels, chunk, true);
            for (p, gi) in candidate.iter_mut().zip(&g) {
                *p -= lr * gi;
            }
        }
        let new_loss = full_loss(&model, &candidate);
        if !new_loss.is_finite() || candidate.iter().any(|p| !p.is_finite()) {
            return Err(ClassifierError::DivergenceDetected { epoch });
        }
        if new_loss <= loss {
            model.params = candidate;
            loss = new_loss;
            lr *= 1.05;
        } else {
            lr *= 0.5;
        }
        trace.push(loss);
    }
    Ok((model, trace))
}

pub fn nn_fit(features: &[FeatureVector], config: &NnConfig) -> Result<WideNnModel, ClassifierError> {
    nn_fit_with_trace(features, config).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, seed: u64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        (0..n)
            .map(|i| {
                let (label, c) = if i % 2 == 0 { (ClassLabel::Left, -3.0) } else { (ClassLabel::Rest, 3.0) };
                let values = vec![c + noise.sample(&mut rng), -c + noise.sample(&mut rng), noise.sample(&mut rng)];
                FeatureVector::new(values, label, 1).unwrap()
            })
            .collect()
    }

    #[test]
    fn untrained_network_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let model = WideNnModel::initialize(4, 10, &mut rng);
        let p = model.predict(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert!(p.scores.iter().all(|&s| s == 1.0 / 3.0));
        assert_eq!(p.label, ClassLabel::Left);
    }

    #[test]
    fn separable_blobs_are_learned_within_200_epochs() {
        let data = blobs(60, 3);
        let cfg = NnConfig { max_epochs: 200, ..NnConfig::default() };
        let (model, trace) = nn_fit_with_trace(&data, &cfg).unwrap();
        assert!(trace.len() <= 201);
        let correct = data.iter().filter(|f| model.predict(&f.values).unwrap().label == f.label).count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn training_loss_never_increases() {
        let data = blobs(40, 9);
        for batch_size in [None, Some(7)] {
            let cfg = NnConfig { max_epochs: 150, batch_size, tolerance: 0.0, ..NnConfig::default() };
            let (_, trace) = nn_fit_with_trace(&data, &cfg).unwrap();
            assert!(trace.windows(2).all(|w| w[1] <= w[0]), "{batch_size:?}");
            assert!(trace.last().unwrap() < &trace[0]);
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let data = blobs(30, 5);
        let cfg = NnConfig { batch_size: Some(8), max_epochs: 50, ..NnConfig::default() };
        assert_eq!(nn_fit(&data, &cfg).unwrap(), nn_fit(&data, &cfg).unwrap());
    }

    #[test]
    fn hand_built_network() {
        // d = 2, h = 1: hidden = relu(x0 − x1 + 0.5); logits = [2h, −h, 1].
        let params = vec![1.0, -1.0, 0.5, 2.0, -1.0, 0.0, 0.0, 0.0, 1.0];
        let model = WideNnModel::from_parameters(2, 1, params).unwrap();
        let h: f64 = 3.0 - 1.0 + 0.5;
        let logits = [2.0 * h, -h, 1.0];
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let p = model.predict(&[3.0, 1.0]).unwrap();
        for k in 0..3 {
            assert!((p.scores[k] - logits[k].exp() / z).abs() < 1e-15);
        }
        assert_eq!(p.label, ClassLabel::Left);
        // Negative pre-activation: hidden unit is off, only the bias remains.
        let p = model.predict(&[0.0, 5.0]).unwrap();
        let e = 1f64.exp();
        assert!((p.scores[2] - e / (2.0 + e)).abs() < 1e-15);
        assert_eq!(p.label, ClassLabel::Rest);
    }

    #[test]
    fn softmax_symmetry_and_shift() {
        assert_eq!(softmax(&[0.7, 0.7, 0.7]), vec![1.0 / 3.0; 3]);
        let a = softmax(&[1.0, -2.0, 3.5]);
        let b = softmax(&[1001.0, 998.0, 1003.5]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let big = softmax(&[1e308, -1e308, 0.0]);
        assert!(big.iter().all(|v| v.is_finite()));
        assert_eq!(big[0], 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let data: Vec<FeatureVector> = blobs(10, 1).into_iter().filter(|f| f.label == ClassLabel::Left).collect();
        assert!(matches!(nn_fit(&data, &NnConfig::default()), Err(ClassifierError::ClassAbsent)));
    }

    #[test]
    fn runaway_step_is_reported() {
        let data: Vec<FeatureVector> = blobs(20, 2)
            .into_iter()
            .map(|f| FeatureVector { values: f.values.iter().map(|v| v * 1e6).collect(), ..f })
            .collect();
        let cfg = NnConfig { learning_rate: 1e308, standardize_inputs: false, ..NnConfig::default() };
        assert!(matches!(nn_fit(&data, &cfg), Err(ClassifierError::DivergenceDetected { .. })));
    }
}
