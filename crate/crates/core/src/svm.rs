//! C-SVM with an RBF kernel, trained by pairwise coordinate optimization of
//! the dual
//!
//! ```text
//! minimize   1/2 a'Za - e'a
//! subject to 0 <= a_i <= C,  y'a = 0,      Z_ij = y_i y_j K(V_i, V_j)
//! ```
//!
//! Each step moves two multipliers along the direction that keeps `y'a`
//! fixed, so feasibility is preserved throughout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ann::f_hid;
use crate::error::{EpicError, Result};
use crate::features::{CalibSample, FeatureVector, NormParams};

/// Gaussian RBF kernel `exp(-gamma * |a - b|^2)`.
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(EpicError::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    Ok(rbf(a, b, gamma))
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Clamp of `x` to the box `[0, c_bound]`.
pub fn slope_func(x: f64, c_bound: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= c_bound {
        c_bound
    } else {
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    /// Normalized support vectors, one per nonzero multiplier.
    pub support_vectors: Vec<Vec<f64>>,
    pub bias: f64,
    pub c_bound: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub norm: NormParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmTrainConfig {
    pub c_bound: f64,
    /// `None` selects `1 / dim`.
    pub gamma: Option<f64>,
    pub kkt_tol: f64,
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            c_bound: 10.0,
            gamma: None,
            kkt_tol: 1e-3,
            max_passes: 200,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmStatus {
    Converged,
    MaxPasses,
}

#[derive(Debug, Clone)]
pub struct SvmTrainReport {
    pub status: SvmStatus,
    pub kkt_residual: f64,
    pub steps: usize,
    /// Dual objective after every accepted pair step (entry 0 is at a = 0).
    pub objective_trace: Vec<f64>,
    /// Full multiplier vector over the training samples, in input order.
    pub dual_alphas: Vec<f64>,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    /// Decision value before squashing, for a normalized input.
    pub fn decision_value(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(EpicError::DimensionMismatch { expected: self.dim(), actual: v.len() });
        }
        let sum: f64 = self
            .alphas
            .iter()
            .zip(&self.labels)
            .zip(&self.support_vectors)
            .map(|((a, y), sv)| a * y * rbf(v, sv, self.gamma))
            .sum();
        Ok(sum + self.bias)
    }

    pub fn raw_score(&self, v: &FeatureVector) -> Result<f64> {
        if v.dim() != self.dim() {
            return Err(EpicError::DimensionMismatch { expected: self.dim(), actual: v.dim() });
        }
        let value = if v.normalized {
            self.decision_value(&v.values)?
        } else {
            let mut buf = vec![0.0; v.dim()];
            self.norm.apply_into(&v.values, &mut buf);
            self.decision_value(&buf)?
        };
        Ok(f_hid(value))
    }

    pub fn decide(&self, v: &FeatureVector) -> Result<f64> {
        Ok(if self.raw_score(v)? >= self.threshold { 1.0 } else { -1.0 })
    }
}

struct Dual<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    gamma: f64,
    c: f64,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    cached: Option<(usize, Vec<f64>)>,
}

impl Dual<'_> {
    fn kernel_row(&mut self, i: usize) -> Vec<f64> {
        if let Some((idx, row)) = &self.cached {
            if *idx == i {
                return row.clone();
            }
        }
        let xi = &self.x[i];
        let row: Vec<f64> = self.x.iter().map(|xt| rbf(xi, xt, self.gamma)).collect();
        self.cached = Some((i, row.clone()));
        row
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] < self.c
        } else {
            self.alpha[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.c
        }
    }

    /// `(i, m, M)` with `m = max_{up} -y G`, `M = min_{low} -y G`.
    fn extremes(&self) -> (usize, f64, f64) {
        let mut i = usize::MAX;
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        for t in 0..self.y.len() {
            let v = -self.y[t] * self.grad[t];
            if self.in_up(t) && v > m {
                m = v;
                i = t;
            }
            if self.in_low(t) && v < big_m {
                big_m = v;
            }
        }
        (i, m, big_m)
    }

    fn objective(&self) -> f64 {
        // f = 1/2 a'(G + e) - e'a
        self.alpha
            .iter()
            .zip(&self.grad)
            .map(|(a, g)| 0.5 * a * (g + 1.0) - a)
            .sum()
    }
}

/// KKT gap `max_up(-yG) - min_low(-yG)` of a dual point, clamped at zero.
pub fn dual_kkt_residual(samples: &[Vec<f64>], y: &[f64], alpha: &[f64], c: f64, gamma: f64) -> f64 {
    let n = y.len();
    let grad: Vec<f64> = (0..n)
        .map(|t| {
            (0..n)
                .map(|s| y[t] * y[s] * rbf(&samples[t], &samples[s], gamma) * alpha[s])
                .sum::<f64>()
                - 1.0
        })
        .collect();
    let dual = Dual {
        x: samples,
        y,
        gamma,
        c,
        alpha: alpha.to_vec(),
        grad,
        cached: None,
    };
    let (_, m, big_m) = dual.extremes();
    (m - big_m).max(0.0)
}

pub fn svm_train(samples: &[CalibSample], cfg: &SvmTrainConfig) -> Result<(SvmModel, SvmTrainReport)> {
    let first = samples.first().ok_or(EpicError::EmptyDataset)?;
    if cfg.c_bound <= 0.0 || cfg.kkt_tol <= 0.0 || cfg.gamma.is_some_and(|g| g <= 0.0) {
        return Err(EpicError::InvalidInput("C, gamma and kkt_tol must be positive".into()));
    }
    let pos = samples.iter().filter(|s| s.is_hotspot()).count();
    if pos == 0 || pos == samples.len() {
        return Err(EpicError::SingleClass);
    }
    let dim = first.features.dim();
    let gamma = cfg.gamma.unwrap_or(1.0 / dim.max(1) as f64);
    let refs: Vec<&FeatureVector> = samples.iter().map(|s| &s.features).collect();
    let norm = NormParams::fit(&refs)?;
    let x: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut buf = vec![0.0; dim];
            norm.apply_into(&s.features.values, &mut buf);
            buf
        })
        .collect();
    let y: Vec<f64> = samples.iter().map(|s| if s.is_hotspot() { 1.0 } else { -1.0 }).collect();
    let n = y.len();

    let mut dual = Dual {
        x: &x,
        y: &y,
        gamma,
        c: cfg.c_bound,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
        cached: None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_steps = cfg.max_passes.saturating_mul(n);
    let mut trace = vec![0.0];
    let mut steps = 0;
    let mut candidates = Vec::with_capacity(n);
    let status = loop {
        let (i, m, big_m) = dual.extremes();
        if m - big_m <= cfg.kkt_tol {
            break SvmStatus::Converged;
        }
        if steps >= max_steps {
            break SvmStatus::MaxPasses;
        }
        // Second index: random among partners that close at least half of
        // the current maximal violation.
        let cut = m - 0.5 * (m - big_m);
        candidates.clear();
        candidates.extend((0..n).filter(|&t| dual.in_low(t) && -y[t] * dual.grad[t] <= cut));
        let j = candidates[rng.gen_range(0..candidates.len())];

        let ki = dual.kernel_row(i);
        let kj = dual.kernel_row(j);
        let curvature = (ki[i] + kj[j] - 2.0 * ki[j]).max(1e-12);
        let b = -y[i] * dual.grad[i] + y[j] * dual.grad[j];
        let bound_i = if y[i] > 0.0 { cfg.c_bound - dual.alpha[i] } else { dual.alpha[i] };
        let bound_j = if y[j] > 0.0 { dual.alpha[j] } else { cfg.c_bound - dual.alpha[j] };
        let t = (b / curvature).min(bound_i).min(bound_j);

        let old_i = dual.alpha[i];
        let old_j = dual.alpha[j];
        dual.alpha[i] = slope_func(old_i + y[i] * t, cfg.c_bound);
        dual.alpha[j] = slope_func(old_j - y[j] * t, cfg.c_bound);
        let di = dual.alpha[i] - old_i;
        let dj = dual.alpha[j] - old_j;
        for s in 0..n {
            dual.grad[s] += y[s] * (y[i] * ki[s] * di + y[j] * kj[s] * dj);
        }
        steps += 1;
        trace.push(dual.objective());
    };
    let (_, m, big_m) = dual.extremes();
    let kkt_residual = (m - big_m).max(0.0);
    if status == SvmStatus::MaxPasses {
        log::warn!("svm: stopped after {steps} steps with KKT residual {kkt_residual:e}");
    }

    let free: Vec<f64> = (0..n)
        .filter(|&t| dual.alpha[t] > 0.0 && dual.alpha[t] < cfg.c_bound)
        .map(|t| -y[t] * dual.grad[t])
        .collect();
    let bias = if free.is_empty() {
        0.5 * (m + big_m)
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };

    let mut model = SvmModel {
        alphas: Vec::new(),
        labels: Vec::new(),
        support_vectors: Vec::new(),
        bias,
        c_bound: cfg.c_bound,
        gamma,
        threshold: 0.0,
        norm,
    };
    for t in 0..n {
        if dual.alpha[t] > 0.0 {
            model.alphas.push(dual.alpha[t]);
            model.labels.push(y[t]);
            model.support_vectors.push(x[t].clone());
        }
    }
    let dual_alphas = dual.alpha;
    Ok((
        model,
        SvmTrainReport {
            status,
            kkt_residual,
            steps,
            objective_trace: trace,
            dual_alphas,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: u64, v: Vec<f64>, t: f64) -> CalibSample {
        CalibSample { features: FeatureVector::new(id, v), t_litho: t }
    }

    #[test]
    fn kernel_values() {
        assert_eq!(rbf_kernel(&[0.3, 0.4], &[0.3, 0.4], 2.0).unwrap(), 1.0);
        let a = [0.0, 0.0];
        let b = [1.0, 1.0];
        assert_eq!(rbf_kernel(&a, &b, 0.5).unwrap(), rbf_kernel(&b, &a, 0.5).unwrap());
        assert!((rbf_kernel(&a, &b, 0.5).unwrap() - 0.36788).abs() < 1e-5);
        assert!(rbf_kernel(&a, &[1.0], 0.5).is_err());
    }

    #[test]
    fn slope_cases() {
        assert_eq!(slope_func(-1.0, 2.0), 0.0);
        assert_eq!(slope_func(1.0, 2.0), 1.0);
        assert_eq!(slope_func(3.0, 2.0), 2.0);
    }

    #[test]
    fn single_class_rejected() {
        let data = vec![s(0, vec![0.0], 1.0), s(1, vec![1.0], 1.0)];
        assert!(matches!(svm_train(&data, &SvmTrainConfig::default()), Err(EpicError::SingleClass)));
    }

    #[test]
    fn xor_is_separated() {
        let data = vec![
            s(0, vec![0.0, 0.0], 1.0),
            s(1, vec![1.0, 1.0], 1.0),
            s(2, vec![0.0, 1.0], -1.0),
            s(3, vec![1.0, 0.0], -1.0),
        ];
        let cfg = SvmTrainConfig { c_bound: 10.0, gamma: Some(1.0), ..Default::default() };
        let (model, report) = svm_train(&data, &cfg).unwrap();
        assert_eq!(report.status, SvmStatus::Converged);
        for d in &data {
            assert_eq!(model.decide(&d.features).unwrap(), d.t_litho);
        }
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<CalibSample> = (0..80)
            .map(|i| {
                let v: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
                let t = if v[0] + 0.3 * v[1] > 0.6 { 1.0 } else { -1.0 };
                s(i, v, t)
            })
            .collect();
        let (model, report) = svm_train(&data, &SvmTrainConfig::default()).unwrap();
        assert!(report.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let ya: f64 = model.alphas.iter().zip(&model.labels).map(|(a, y)| a * y).sum();
        assert!(ya.abs() < 1e-8);
        assert!(model.alphas.iter().all(|&a| a > 0.0 && a <= model.c_bound));
    }

    #[test]
    fn empty_model_scores_zero() {
        let model = SvmModel {
            alphas: vec![],
            labels: vec![],
            support_vectors: vec![],
            bias: 0.0,
            c_bound: 1.0,
            gamma: 1.0,
            threshold: 0.0,
            norm: NormParams::identity(2),
        };
        let v = FeatureVector::new(0, vec![0.1, 0.2]);
        assert_eq!(model.raw_score(&v).unwrap(), 0.0);
        assert_eq!(model.decide(&v).unwrap(), 1.0);
    }
}
