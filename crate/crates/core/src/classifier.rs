//! Feed-forward trace classifier.
//!
//! ReLU hidden layers, a single sigmoid output unit, mean binary cross-entropy
//! and Adam. Inputs are z-scored with statistics fitted on the training rows
//! only. All parameters live in one flat vector so the optimizer and the
//! gradient check can treat them uniformly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureVector, LabeledDataset, Split};
use crate::project::{NodeId, Project};
use crate::rng;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Rows per parallel gradient chunk. Fixed so that the summation order, and
/// therefore the trained weights, do not depend on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BatchSize {
    Full,
    Rows(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    /// Epochs over the training rows.
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: BatchSize,
    pub classification_threshold: f64,
    /// Keep at most this many negatives per positive in the training rows.
    pub undersample_negatives: Option<f64>,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig::nn()
    }
}

impl NetConfig {
    /// One hidden layer of 30 units.
    pub fn nn() -> Self {
        NetConfig {
            hidden_layers: vec![30],
            activation: Activation::Relu,
            max_iterations: 3000,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: BatchSize::Full,
            classification_threshold: 0.5,
            undersample_negatives: None,
            seed: 0,
        }
    }

    /// Five hidden layers of 30 units.
    pub fn dnn() -> Self {
        NetConfig {
            hidden_layers: vec![30; 5],
            ..NetConfig::nn()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers.contains(&0) {
            return Err(Error::Config("hidden layer widths must be at least 1".into()));
        }
        if !(self.classification_threshold > 0.0 && self.classification_threshold < 1.0) {
            return Err(Error::Config(format!(
                "classification_threshold {} must be in (0, 1)",
                self.classification_threshold
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if let BatchSize::Rows(0) = self.batch_size {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if let Some(r) = self.undersample_negatives {
            if !(r > 0.0) {
                return Err(Error::Config("undersample_negatives must be positive".into()));
            }
        }
        Ok(())
    }
}

pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    // Keep confidences strictly inside (0, 1) even where f64 saturates.
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy of one logit.
fn bce(logit: f64, label: f64) -> f64 {
    softplus(logit) - label * logit
}

/// Per-feature z-scoring. Constant features get σ = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let n = rows.len() as f64;
        let dim = rows.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Dense layers over a flat parameter vector. Layer `l` stores its weights
/// row-major (`out × in`) followed by its biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl Network {
    /// `sizes` = input width, hidden widths..., 1.
    pub fn zeros(sizes: Vec<usize>) -> Self {
        assert!(sizes.len() >= 2 && *sizes.last().unwrap() == 1, "output must be one unit");
        let n: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Network {
            sizes,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(sizes: Vec<usize>, rng: &mut impl Rng) -> Self {
        let mut net = Network::zeros(sizes);
        let mut offset = 0;
        for w in net.sizes.clone().windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_in * fan_out] {
                *p = rng.gen_range(-limit..=limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        net
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    /// Output-unit pre-activation.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut act = x.to_vec();
        let mut offset = 0;
        let n_layers = self.sizes.len() - 1;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let mut next = b.to_vec();
            for (o, z) in next.iter_mut().enumerate() {
                *z += w[o * n_in..(o + 1) * n_in]
                    .iter()
                    .zip(&act)
                    .map(|(wi, ai)| wi * ai)
                    .sum::<f64>();
            }
            if l + 1 < n_layers {
                next.iter_mut().for_each(|z| *z = z.max(0.0));
            }
            act = next;
            offset += n_in * n_out + n_out;
        }
        act[0]
    }

    /// Adds the gradient of `bce(logit(x), y)` into `grad`; returns the loss.
    fn backprop_one(&self, x: &[f64], y: f64, grad: &mut [f64]) -> f64 {
        let n_layers = self.sizes.len() - 1;
        // Forward pass, keeping each layer's input activation.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        let mut act = x.to_vec();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            offsets.push(offset);
            let w = &self.params[offset..offset + n_in * n_out];
            let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    b[o] + w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(&act)
                        .map(|(wi, ai)| wi * ai)
                        .sum::<f64>()
                })
                .collect();
            inputs.push(act);
            act = if l + 1 < n_layers {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            offset += n_in * n_out + n_out;
        }
        let logit = act[0];
        let loss = bce(logit, y);

        // dL/dz at the output.
        let mut delta = vec![sigmoid_unclamped(logit) - y];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &inputs[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                grad[off + n_in * n_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[off..off + n_in * n_out];
                let mut prev = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (p, wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *p += d * wi;
                    }
                }
                // ReLU derivative of the previous layer.
                for (p, z) in prev.iter_mut().zip(&pre[l - 1]) {
                    if *z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        loss
    }

    /// Mean BCE over the rows.
    pub fn loss(&self, xs: &[Vec<f64>], ys: &[bool]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, &y)| bce(self.logit(x), f64::from(u8::from(y))))
            .sum();
        total / xs.len() as f64
    }

    /// Mean BCE and its gradient over the selected rows.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[bool], rows: &[usize]) -> (f64, Vec<f64>) {
        let n = self.params.len();
        let partials: Vec<(f64, Vec<f64>)> = rows
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut g = vec![0.0; n];
                let mut loss = 0.0;
                for &r in chunk {
                    loss += self.backprop_one(&xs[r], f64::from(u8::from(ys[r])), &mut g);
                }
                (loss, g)
            })
            .collect();
        let mut grad = vec![0.0; n];
        let mut loss = 0.0;
        for (l, g) in partials {
            loss += l;
            grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        let scale = 1.0 / rows.len() as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        (loss * scale, grad)
    }
}

fn sigmoid_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Adam optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Largest relative disagreement between backprop and central differences
/// (step 1e-5) over every parameter. The denominator is floored at 1e-6 so
/// that parameters with vanishing gradients compare absolutely.
pub fn loss_gradient_check(net: &Network, xs: &[Vec<f64>], ys: &[bool]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    const H: f64 = 1e-5;
    let rows: Vec<usize> = (0..xs.len()).collect();
    let (_, analytic) = net.loss_and_gradient(xs, ys, &rows);
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.params[i];
        probe.params[i] = orig + H;
        let up = probe.loss(xs, ys);
        probe.params[i] = orig - H;
        let down = probe.loss(xs, ys);
        probe.params[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        let denom = a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Loss trajectory of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

/// A trained trace classifier: standardization plus network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceClassifier {
    pub format_version: u32,
    pub config: NetConfig,
    pub standardizer: Standardizer,
    pub network: Network,
}

fn check_finite(row: &[f64]) -> Result<()> {
    match row.iter().position(|v| !v.is_finite()) {
        Some(column) => Err(Error::NonFiniteFeature { column }),
        None => Ok(()),
    }
}

impl TraceClassifier {
    /// Trains on the TRAIN partition with all eight features.
    pub fn train(dataset: &LabeledDataset, cfg: &NetConfig) -> Result<Self> {
        let (xs, ys) = dataset.matrix(Split::Train);
        Ok(Self::fit(&xs, &ys, cfg)?.0)
    }

    /// Trains on arbitrary rows. Returns the model and its per-epoch loss.
    pub fn fit(xs: &[Vec<f64>], ys: &[bool], cfg: &NetConfig) -> Result<(Self, TrainingLog)> {
        cfg.validate()?;
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                scores: xs.len(),
                labels: ys.len(),
            });
        }
        if xs.is_empty() {
            return Err(Error::EmptyInput);
        }
        for row in xs {
            check_finite(row)?;
        }

        let mut rows: Vec<usize> = (0..xs.len()).collect();
        if let Some(ratio) = cfg.undersample_negatives {
            let (pos, mut neg): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| ys[r]);
            let keep = ((ratio * pos.len() as f64).ceil() as usize).min(neg.len());
            neg.shuffle(&mut rng::stage_rng(cfg.seed, "undersample"));
            neg.truncate(keep);
            rows = pos.into_iter().chain(neg).collect();
            rows.sort_unstable();
        }
        let n_pos = rows.iter().filter(|&&r| ys[r]).count();
        if n_pos == 0 || n_pos == rows.len() {
            return Err(Error::SingleClass { label: n_pos > 0 });
        }

        let train_rows: Vec<Vec<f64>> = rows.iter().map(|&r| xs[r].clone()).collect();
        let standardizer = Standardizer::fit(&train_rows);
        let zs: Vec<Vec<f64>> = train_rows.iter().map(|r| standardizer.apply(r)).collect();
        let zys: Vec<bool> = rows.iter().map(|&r| ys[r]).collect();

        let dim = xs[0].len();
        let mut sizes = vec![dim];
        sizes.extend(&cfg.hidden_layers);
        sizes.push(1);
        let mut init_rng = rng::stage_rng(cfg.seed, "weights");
        let mut network = Network::init(sizes, &mut init_rng);
        let mut adam = Adam::new(
            network.params.len(),
            cfg.learning_rate,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_epsilon,
        );

        let mut order: Vec<usize> = (0..zs.len()).collect();
        let mut batch_rng = rng::stage_rng(cfg.seed, "batches");
        let mut log = TrainingLog {
            epoch_losses: Vec::with_capacity(cfg.max_iterations),
        };
        for epoch in 0..cfg.max_iterations {
            let batches: Vec<&[usize]> = match cfg.batch_size {
                BatchSize::Full => vec![&order[..]],
                BatchSize::Rows(n) => {
                    order.shuffle(&mut batch_rng);
                    order.chunks(n).collect()
                }
            };
            let mut epoch_loss = 0.0;
            let mut grads = Vec::with_capacity(batches.len());
            // Mini-batches update sequentially; collect per batch.
            for batch in batches {
                let (loss, grad) = network.loss_and_gradient(&zs, &zys, batch);
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFiniteLoss { iteration: epoch });
                }
                epoch_loss += loss * batch.len() as f64;
                grads.push(grad);
                if cfg.batch_size != BatchSize::Full {
                    adam.step(&mut network.params, grads.last().unwrap());
                }
            }
            if cfg.batch_size == BatchSize::Full {
                adam.step(&mut network.params, &grads[0]);
            }
            log.epoch_losses.push(epoch_loss / zs.len() as f64);
        }

        Ok((
            TraceClassifier {
                format_version: MODEL_FORMAT_VERSION,
                config: cfg.clone(),
                standardizer,
                network,
            },
            log,
        ))
    }

    /// conf for a raw (unstandardized) feature row.
    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        check_finite(row)?;
        Ok(sigmoid(self.network.logit(&self.standardizer.apply(row))))
    }

    pub fn predict_conf(&self, fv: &FeatureVector) -> Result<f64> {
        self.predict_row(&fv.to_array())
    }

    pub fn logit_row(&self, row: &[f64]) -> f64 {
        self.network.logit(&self.standardizer.apply(row))
    }

    /// Confidence for every component of the project against test `t`.
    pub fn predict_trace(
        &self,
        extractor: &FeatureExtractor<'_>,
        project: &Project,
        t: NodeId,
        threshold: f64,
    ) -> Result<PredictedTrace> {
        let comps: Vec<NodeId> = project.function_ids().collect();
        let fvs = extractor.extract_row(t, &comps)?;
        let conf = comps
            .into_iter()
            .zip(fvs)
            .map(|(c, fv)| Ok((c, self.predict_conf(&fv)?)))
            .collect::<Result<_>>()?;
        Ok(PredictedTrace {
            test: t,
            conf,
            threshold,
        })
    }

    /// Confidence vector for arbitrary rows, computed in parallel.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable model") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TraceClassifier = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.format_version
            )));
        }
        let expected: usize = model.network.sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        if model.network.params.len() != expected
            || model.standardizer.mean.len() != model.network.input_width()
            || model.standardizer.std.len() != model.network.input_width()
        {
            return Err(Error::Validation("model parameter shapes are inconsistent".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::project::write_file(path.as_ref(), &self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        TraceClassifier::from_json(&text)
    }
}

/// conf(c, t) for every component of one test.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrace {
    pub test: NodeId,
    pub conf: BTreeMap<NodeId, f64>,
    pub threshold: f64,
}

impl PredictedTrace {
    pub fn positives(&self) -> Vec<NodeId> {
        self.positives_at(self.threshold)
    }

    pub fn positives_at(&self, threshold: f64) -> Vec<NodeId> {
        self.conf
            .iter()
            .filter(|(_, &p)| p >= threshold)
            .map(|(c, _)| *c)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, prop_assume, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                (x, rng.gen_bool(0.5))
            })
            .unzip()
    }

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        while xs.len() < n {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let margin = a + 0.5 * b;
            if margin.abs() < 0.1 {
                continue;
            }
            xs.push(vec![a, b]);
            ys.push(margin > 0.0);
        }
        (xs, ys)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let net = Network::init(vec![8, 30, 1], &mut rng);
        let (xs, ys) = random_batch(&mut rng, 10, 8);
        assert!(loss_gradient_check(&net, &xs, &ys).unwrap() <= 1e-4);
        let deep = Network::init(vec![8, 6, 5, 1], &mut rng);
        assert!(loss_gradient_check(&deep, &xs, &ys).unwrap() <= 1e-4);
        assert!(loss_gradient_check(&deep, &[], &[]).is_err());
    }

    #[test]
    fn zero_model_loss_is_ln2() {
        let net = Network::zeros(vec![3, 4, 1]);
        let xs = vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.0]];
        let ys = vec![true, false];
        assert!((net.loss(&xs, &ys) - std::f64::consts::LN_2).abs() <= 1e-9);
    }

    #[test]
    fn bias_only_gradient_is_mean_residual() {
        let mut net = Network::zeros(vec![2, 1]);
        net.params_mut()[2] = 0.3; // output bias
        let xs = vec![vec![0.5, 1.0], vec![1.0, -1.0], vec![0.0, 2.0]];
        let ys = vec![true, false, false];
        let (_, grad) = net.loss_and_gradient(&xs, &ys, &[0, 1, 2]);
        let p = 1.0 / (1.0 + (-0.3f64).exp());
        let expected = ((p - 1.0) + p + p) / 3.0;
        assert!((grad[2] - expected).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_closed_form() {
        let mut w = [0.5];
        let g = 0.2;
        let mut adam = Adam::new(1, 1e-3, 0.9, 0.999, 1e-8);
        adam.step(&mut w, &[g]);
        // m̂ = g, v̂ = g² after bias correction.
        let expected = 0.5 - 1e-3 * g / (g.abs() + 1e-8);
        assert!((w[0] - expected).abs() < 1e-15, "{} vs {expected}", w[0]);
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let (xs, ys) = separable(200, 1);
        let (model, log) = TraceClassifier::fit(&xs, &ys, &NetConfig::nn()).unwrap();
        let correct = xs
            .iter()
            .zip(&ys)
            .filter(|(x, &y)| (model.predict_row(x).unwrap() >= 0.5) == y)
            .count();
        assert_eq!(correct, 200);
        assert!(log.epoch_losses.last().unwrap() < &log.epoch_losses[0]);
    }

    #[test]
    fn full_batch_loss_trends_down() {
        let (xs, ys) = separable(200, 2);
        let cfg = NetConfig {
            max_iterations: 300,
            learning_rate: 1e-3,
            ..NetConfig::nn()
        };
        let (_, log) = TraceClassifier::fit(&xs, &ys, &cfg).unwrap();
        let l = &log.epoch_losses;
        assert!(l[l.len() - 1] < l[0]);
        assert!(l[l.len() - 1] < l[l.len() / 2]);
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = separable(100, 3);
        let cfg = NetConfig {
            max_iterations: 50,
            ..NetConfig::nn()
        };
        let a = TraceClassifier::fit(&xs, &ys, &cfg).unwrap().0;
        let b = TraceClassifier::fit(&xs, &ys, &cfg).unwrap().0;
        assert_eq!(a, b);
        let mini = NetConfig {
            batch_size: BatchSize::Rows(16),
            ..cfg
        };
        let c = TraceClassifier::fit(&xs, &ys, &mini).unwrap().0;
        assert_eq!(c, TraceClassifier::fit(&xs, &ys, &mini).unwrap().0);
    }

    #[test]
    fn training_errors() {
        let xs = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            TraceClassifier::fit(&xs, &[false, false], &NetConfig::nn()),
            Err(Error::SingleClass { label: false })
        ));
        let nan = vec![vec![f64::NAN], vec![2.0]];
        assert!(matches!(
            TraceClassifier::fit(&nan, &[true, false], &NetConfig::nn()),
            Err(Error::NonFiniteFeature { column: 0 })
        ));
        let huge = NetConfig {
            learning_rate: f64::MAX,
            max_iterations: 5,
            hidden_layers: vec![4, 4],
            ..NetConfig::nn()
        };
        let xs = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, -2.0]];
        assert!(matches!(
            TraceClassifier::fit(&xs, &[true, false, false], &huge),
            Err(Error::NonFiniteLoss { .. })
        ));
        let bad = NetConfig {
            classification_threshold: 1.0,
            ..NetConfig::nn()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn standardizer_handles_constant_columns_and_train_only_fit() {
        let s = Standardizer::fit(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let (xs, ys) = separable(60, 4);
        let cfg = NetConfig {
            max_iterations: 10,
            ..NetConfig::nn()
        };
        let model = TraceClassifier::fit(&xs, &ys, &cfg).unwrap().0;
        assert_eq!(model.standardizer, Standardizer::fit(&xs));
    }

    #[test]
    fn undersampling_keeps_all_positives() {
        let mut xs = vec![vec![1.0]; 3];
        xs.extend(vec![vec![-1.0]; 50]);
        let mut ys = vec![true; 3];
        ys.extend(vec![false; 50]);
        let cfg = NetConfig {
            undersample_negatives: Some(2.0),
            max_iterations: 5,
            ..NetConfig::nn()
        };
        let model = TraceClassifier::fit(&xs, &ys, &cfg).unwrap().0;
        // 3 positives + 6 negatives: mean = (3 - 6) / 9.
        assert!((model.standardizer.mean[0] + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn serialization_reproduces_predictions_exactly() {
        let (xs, ys) = separable(80, 5);
        let cfg = NetConfig {
            max_iterations: 40,
            ..NetConfig::dnn()
        };
        let model = TraceClassifier::fit(&xs, &ys, &cfg).unwrap().0;
        let back = TraceClassifier::from_json(&model.to_json()).unwrap();
        assert_eq!(model, back);
        for x in &xs {
            assert_eq!(model.predict_row(x).unwrap().to_bits(), back.predict_row(x).unwrap().to_bits());
        }
        assert_eq!(back.network.sizes(), &[2, 30, 30, 30, 30, 30, 1]);
    }

    #[test]
    fn predicted_trace_threshold_extremes() {
        let pt = PredictedTrace {
            test: NodeId(0),
            conf: [(NodeId(1), 0.2), (NodeId(2), 0.7), (NodeId(3), 1e-9)].into(),
            threshold: 0.5,
        };
        assert_eq!(pt.positives(), vec![NodeId(2)]);
        assert!(pt.positives_at(1.0 - f64::EPSILON).is_empty());
        assert_eq!(pt.positives_at(f64::MIN_POSITIVE).len(), 3);
    }

    proptest! {
        #[test]
        fn confidence_in_open_unit_interval(z in -1e6f64..1e6) {
            let s = sigmoid(z);
            prop_assert!(s > 0.0 && s < 1.0);
        }

        #[test]
        fn confidence_monotone_in_logit(a in -30.0f64..30.0, d in 1e-6f64..5.0) {
            prop_assert!(sigmoid(a + d) > sigmoid(a));
        }

        #[test]
        fn random_models_pass_gradient_check(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = Network::init(vec![4, 7, 1], &mut rng);
            let (xs, ys) = random_batch(&mut rng, 6, 4);
            // Central differences are meaningless across a ReLU kink.
            let w = net.params();
            let near_kink = xs.iter().any(|x| {
                (0..7).any(|j| (w[28 + j] + (0..4).map(|k| w[j * 4 + k] * x[k]).sum::<f64>()).abs() < 1e-3)
            });
            prop_assume!(!near_kink);
            prop_assert!(loss_gradient_check(&net, &xs, &ys).unwrap() <= 1e-4);
        }

        #[test]
        fn positives_antitone_in_threshold(confs in proptest::collection::vec(0.0f64..1.0, 1..30), a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let pt = PredictedTrace {
                test: NodeId(0),
                conf: confs.iter().enumerate().map(|(i, c)| (NodeId(i as u32), *c)).collect(),
                threshold: 0.5,
            };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let low: std::collections::BTreeSet<_> = pt.positives_at(lo).into_iter().collect();
            let high: std::collections::BTreeSet<_> = pt.positives_at(hi).into_iter().collect();
            prop_assert!(high.is_subset(&low));
        }
    }
}
