//! Single-hidden-layer network trained on squared error.
//!
//! Hidden units use the bipolar sigmoid `2 / (1 + e^{-2x}) - 1` (which is
//! `tanh`), the output unit is linear. For the meta layer the network output
//! is squashed through the same sigmoid so that raw scores lie in (-1, 1).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{EpicError, Result};
use crate::features::{CalibSample, FeatureVector, NormParams};

/// Bipolar sigmoid transfer function of the hidden layer.
pub fn f_hid(x: f64) -> f64 {
    2.0 / (1.0 + (-2.0 * x).exp()) - 1.0
}

pub fn sign_func(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnModel {
    /// `hidden x inputs`, row-major.
    pub w_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub bias_hid: Vec<f64>,
    pub bias_out: f64,
    pub hidden: usize,
    pub inputs: usize,
    pub threshold: f64,
    pub norm: NormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnTrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for AnnTrainConfig {
    fn default() -> Self {
        AnnTrainConfig {
            hidden: 16,
            learning_rate: 0.5,
            epochs: 400,
            init_scale: 0.5,
            seed: 1,
        }
    }
}

/// Gradients of `E = 0.5 (out - y)^2`, laid out like [`AnnModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct AnnGradients {
    pub w_in: Vec<f64>,
    pub w_out: Vec<f64>,
    pub bias_hid: Vec<f64>,
    pub bias_out: f64,
}

impl AnnGradients {
    fn zeros(hidden: usize, inputs: usize) -> Self {
        AnnGradients {
            w_in: vec![0.0; hidden * inputs],
            w_out: vec![0.0; hidden],
            bias_hid: vec![0.0; hidden],
            bias_out: 0.0,
        }
    }

    fn add(&mut self, other: &AnnGradients) {
        for (a, b) in self.w_in.iter_mut().zip(&other.w_in) {
            *a += b;
        }
        for (a, b) in self.w_out.iter_mut().zip(&other.w_out) {
            *a += b;
        }
        for (a, b) in self.bias_hid.iter_mut().zip(&other.bias_hid) {
            *a += b;
        }
        self.bias_out += other.bias_out;
    }
}

impl AnnModel {
    pub fn zeros(hidden: usize, inputs: usize) -> Self {
        AnnModel {
            w_in: vec![0.0; hidden * inputs],
            w_out: vec![0.0; hidden],
            bias_hid: vec![0.0; hidden],
            bias_out: 0.0,
            hidden,
            inputs,
            threshold: 0.0,
            norm: NormParams::identity(inputs),
        }
    }

    pub fn random(hidden: usize, inputs: usize, init_scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if init_scale > 0.0 {
                        rng.gen_range(-init_scale..init_scale)
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let w_in = draw(hidden * inputs);
        let w_out = draw(hidden);
        let bias_hid = draw(hidden);
        let bias_out = draw(1)[0];
        AnnModel {
            w_in,
            w_out,
            bias_hid,
            bias_out,
            hidden,
            inputs,
            threshold: 0.0,
            norm: NormParams::identity(inputs),
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.inputs {
            return Err(EpicError::DimensionMismatch { expected: self.inputs, actual: v.len() });
        }
        Ok(())
    }

    fn hidden_outputs(&self, v: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.w_in[j * self.inputs..(j + 1) * self.inputs];
            let net: f64 = self.bias_hid[j] + row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>();
            *o = f_hid(net);
        }
    }

    /// Linear network output for an already-normalized input.
    pub fn forward(&self, v: &[f64]) -> Result<f64> {
        self.check_dim(v)?;
        let mut h = vec![0.0; self.hidden];
        self.hidden_outputs(v, &mut h);
        Ok(self.bias_out + self.w_out.iter().zip(&h).map(|(w, x)| w * x).sum::<f64>())
    }

    pub fn gradients(&self, v: &[f64], y: f64) -> Result<AnnGradients> {
        self.check_dim(v)?;
        let mut g = AnnGradients::zeros(self.hidden, self.inputs);
        let mut h = vec![0.0; self.hidden];
        self.accumulate(v, y, 1.0, &mut h, &mut g);
        Ok(g)
    }

    /// Adds `scale * dE/dparam` into `g`; returns the sample's error `E`.
    fn accumulate(&self, v: &[f64], y: f64, scale: f64, h: &mut [f64], g: &mut AnnGradients) -> f64 {
        self.hidden_outputs(v, h);
        let out = self.bias_out + self.w_out.iter().zip(h.iter()).map(|(w, x)| w * x).sum::<f64>();
        let resid = out - y;
        let r = scale * resid;
        g.bias_out += r;
        for j in 0..self.hidden {
            g.w_out[j] += r * h[j];
            // derivative of the bipolar sigmoid: (1 + o)(1 - o)
            let delta = r * self.w_out[j] * (1.0 + h[j]) * (1.0 - h[j]);
            g.bias_hid[j] += delta;
            let row = &mut g.w_in[j * self.inputs..(j + 1) * self.inputs];
            for (gw, x) in row.iter_mut().zip(v) {
                *gw += delta * x;
            }
        }
        0.5 * resid * resid
    }

    /// Bounded score in (-1, 1) for a raw (unnormalized) feature vector.
    pub fn raw_score(&self, v: &FeatureVector) -> Result<f64> {
        let mut buf = vec![0.0; self.inputs];
        self.check_dim(&v.values)?;
        if v.normalized {
            buf.copy_from_slice(&v.values);
        } else {
            self.norm.apply_into(&v.values, &mut buf);
        }
        Ok(f_hid(self.forward(&buf)?))
    }

    pub fn decide(&self, v: &FeatureVector) -> Result<f64> {
        Ok(if self.raw_score(v)? >= self.threshold { 1.0 } else { -1.0 })
    }

    fn params_finite(&self) -> bool {
        self.w_in.iter().chain(&self.w_out).chain(&self.bias_hid).all(|x| x.is_finite())
            && self.bias_out.is_finite()
    }

    fn step(&mut self, g: &AnnGradients, lr: f64) {
        for (w, d) in self.w_in.iter_mut().zip(&g.w_in) {
            *w -= lr * d;
        }
        for (w, d) in self.w_out.iter_mut().zip(&g.w_out) {
            *w -= lr * d;
        }
        for (w, d) in self.bias_hid.iter_mut().zip(&g.bias_hid) {
            *w -= lr * d;
        }
        self.bias_out -= lr * g.bias_out;
    }
}

/// Samples per parallel work unit. Chunk partial sums are added in chunk
/// order, so results do not depend on the thread count.
const CHUNK: usize = 128;

/// Mean loss and its gradient over the whole batch.
fn batch(model: &AnnModel, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, AnnGradients) {
    let n = inputs.len() as f64;
    let parts: Vec<(f64, AnnGradients)> = inputs
        .par_chunks(CHUNK)
        .zip(targets.par_chunks(CHUNK))
        .map(|(xs, ys)| {
            let mut g = AnnGradients::zeros(model.hidden, model.inputs);
            let mut h = vec![0.0; model.hidden];
            let loss = xs.iter().zip(ys).map(|(v, &y)| model.accumulate(v, y, 1.0 / n, &mut h, &mut g)).sum();
            (loss, g)
        })
        .collect();
    let mut g = AnnGradients::zeros(model.hidden, model.inputs);
    let mut loss = 0.0;
    for (l, part) in &parts {
        loss += l;
        g.add(part);
    }
    (loss / n, g)
}

#[derive(Debug, Clone)]
pub struct AnnTrainReport {
    /// Mean squared-error loss after each epoch; entry 0 is the initial loss.
    pub losses: Vec<f64>,
    pub final_learning_rate: f64,
}

/// Full-batch gradient descent on the summed squared error (mean-scaled).
/// A step that would raise the loss is rejected and the learning rate halved.
pub fn ann_train(samples: &[CalibSample], cfg: &AnnTrainConfig) -> Result<(AnnModel, AnnTrainReport)> {
    let first = samples.first().ok_or(EpicError::EmptyDataset)?;
    if cfg.learning_rate <= 0.0 || cfg.hidden == 0 {
        return Err(EpicError::InvalidInput(
            "learning_rate and hidden count must be positive".into(),
        ));
    }
    let dim = first.features.dim();
    let refs: Vec<&FeatureVector> = samples.iter().map(|s| &s.features).collect();
    let norm = if samples.len() >= 2 { NormParams::fit(&refs)? } else { NormParams::identity(dim) };
    let inputs: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut buf = vec![0.0; dim];
            norm.apply_into(&s.features.values, &mut buf);
            buf
        })
        .collect();
    let targets: Vec<f64> = samples.iter().map(|s| s.t_litho).collect();

    let mut model = AnnModel::random(cfg.hidden, dim, cfg.init_scale, cfg.seed);
    model.norm = norm;

    let mut lr = cfg.learning_rate;
    let (mut loss, mut grad) = batch(&model, &inputs, &targets);
    let mut losses = vec![loss];
    for epoch in 1..=cfg.epochs {
        let mut trial = model.clone();
        trial.step(&grad, lr);
        if !trial.params_finite() {
            return Err(EpicError::Divergence { epoch });
        }
        // One pass yields both the trial loss and, if accepted, the next gradient.
        let (trial_loss, trial_grad) = batch(&trial, &inputs, &targets);
        if !trial_loss.is_finite() {
            return Err(EpicError::Divergence { epoch });
        }
        if trial_loss <= loss {
            model = trial;
            loss = trial_loss;
            grad = trial_grad;
        } else {
            lr *= 0.5;
        }
        losses.push(loss);
    }
    Ok((
        model,
        AnnTrainReport {
            losses,
            final_learning_rate: lr,
        },
    ))
}
