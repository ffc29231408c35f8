//! Quantized weighting of base-classifier outputs.
//!
//! Each base `k` owns `L_k` weight levels. An output `x` in `[-1, 1]` picks
//! level `Θ(x)` and contributes `x * p_k[Θ(x)]` to the meta score.

use crate::error::{EpicError, Result};
use crate::qp::QpProblem;

/// Level index (1-based) of `x` under `L` uniform bins on `[-1, 1]`.
pub fn quantize_index(x: f64, levels: usize) -> Result<usize> {
    if levels == 0 {
        return Err(EpicError::InvalidInput("a weighting function needs at least one level".into()));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(EpicError::DomainViolation(x));
    }
    let l = 1 + ((x + 1.0) / 2.0 * levels as f64).floor() as usize;
    Ok(l.min(levels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightingFunction {
    pub base_index: usize,
    pub levels: Vec<f64>,
}

impl WeightingFunction {
    pub fn constant(base_index: usize, count: usize, value: f64) -> Self {
        WeightingFunction { base_index, levels: vec![value; count] }
    }

    pub fn weight(&self, x: f64) -> Result<f64> {
        Ok(self.levels[quantize_index(x, self.levels.len())? - 1])
    }
}

/// Row-major `M x N` matrix of base outputs, every entry in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseOutputs {
    pub bases: usize,
    pub data: Vec<f64>,
}

impl BaseOutputs {
    pub fn new(bases: usize, data: Vec<f64>) -> Result<Self> {
        if bases == 0 {
            return Err(EpicError::InvalidInput("at least one base classifier is required".into()));
        }
        if data.len() % bases != 0 {
            return Err(EpicError::DimensionMismatch { expected: bases, actual: data.len() % bases });
        }
        if let Some(&bad) = data.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(EpicError::DomainViolation(bad));
        }
        Ok(BaseOutputs { bases, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let bases = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != bases) {
            return Err(EpicError::DimensionMismatch { expected: bases, actual: r.len() });
        }
        Self::new(bases, rows.concat())
    }

    pub fn samples(&self) -> usize {
        self.data.len() / self.bases
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.bases..(i + 1) * self.bases]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.samples()).map(|i| self.row(i)[k]).collect()
    }
}

/// `Σ_k x_k · p_k[Θ(x_k)]`.
pub fn meta_score(weighting: &[WeightingFunction], row: &[f64]) -> Result<f64> {
    if weighting.len() != row.len() {
        return Err(EpicError::DimensionMismatch { expected: weighting.len(), actual: row.len() });
    }
    let mut score = 0.0;
    for (w, &x) in weighting.iter().zip(row) {
        score += x * w.weight(x)?;
    }
    Ok(score)
}

/// Inclusive threshold cut: `+1` iff `score >= theta`.
pub fn threshold_decide(score: f64, theta: f64) -> f64 {
    if score >= theta {
        1.0
    } else {
        -1.0
    }
}

pub fn meta_decide(weighting: &[WeightingFunction], theta: f64, row: &[f64]) -> Result<f64> {
    Ok(threshold_decide(meta_score(weighting, row)?, theta))
}

pub fn meta_mse(weighting: &[WeightingFunction], outputs: &BaseOutputs, labels: &[f64]) -> Result<f64> {
    let m = outputs.samples();
    if labels.len() != m {
        return Err(EpicError::DimensionMismatch { expected: m, actual: labels.len() });
    }
    if m == 0 {
        return Err(EpicError::EmptyDataset);
    }
    let mut sum = 0.0;
    for (i, t) in labels.iter().enumerate() {
        let e = meta_score(weighting, outputs.row(i))? - t;
        sum += e * e;
    }
    Ok(sum / m as f64)
}

/// `λ₀ Σ (p - 1)²` over every level of every base.
pub fn pcost(weighting: &[WeightingFunction], lambda0: f64) -> f64 {
    let dev: f64 = weighting
        .iter()
        .flat_map(|w| &w.levels)
        .map(|p| (p - 1.0) * (p - 1.0))
        .sum();
    lambda0 * dev
}

/// Sparse activations: for each sample and base, the flat level index and
/// the output value applied to that level (all other levels are zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTable {
    pub offsets: Vec<usize>,
    pub total_levels: usize,
    pub bases: usize,
    /// `(flat index, value)` per sample and base, row-major.
    pub entries: Vec<(usize, f64)>,
}

impl ActivationTable {
    pub fn build(outputs: &BaseOutputs, levels_per_base: &[usize]) -> Result<Self> {
        if levels_per_base.len() != outputs.bases {
            return Err(EpicError::DimensionMismatch {
                expected: outputs.bases,
                actual: levels_per_base.len(),
            });
        }
        let mut offsets = Vec::with_capacity(levels_per_base.len());
        let mut total = 0;
        for &l in levels_per_base {
            if l == 0 {
                return Err(EpicError::InvalidInput("every base needs at least one level".into()));
            }
            offsets.push(total);
            total += l;
        }
        let mut entries = Vec::with_capacity(outputs.data.len());
        for i in 0..outputs.samples() {
            for (k, &x) in outputs.row(i).iter().enumerate() {
                let l = quantize_index(x, levels_per_base[k])?;
                entries.push((offsets[k] + l - 1, x));
            }
        }
        Ok(ActivationTable { offsets, total_levels: total, bases: outputs.bases, entries })
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.entries[i * self.bases..(i + 1) * self.bases]
    }

    /// Dense `alpha[flat][i]` value.
    pub fn value(&self, flat: usize, i: usize) -> f64 {
        self.row(i).iter().find(|(f, _)| *f == flat).map_or(0.0, |e| e.1)
    }
}

/// Builds `Q`, `c` and the constant so that
/// `1/2 X'QX + c'X + constant = meta_mse + pcost` for every `X`.
pub fn qp_assemble(
    outputs: &BaseOutputs,
    labels: &[f64],
    levels_per_base: &[usize],
    lambda0: f64,
) -> Result<QpProblem> {
    let m = outputs.samples();
    if m == 0 {
        return Err(EpicError::EmptyDataset);
    }
    if labels.len() != m {
        return Err(EpicError::DimensionMismatch { expected: m, actual: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|t| **t != 1.0 && **t != -1.0) {
        return Err(EpicError::InvalidInput(format!("label {bad} is not +1 or -1")));
    }
    if !(lambda0 >= 0.0) {
        return Err(EpicError::InvalidInput(format!("lambda0 must be nonnegative, got {lambda0}")));
    }
    let table = ActivationTable::build(outputs, levels_per_base)?;
    let n = table.total_levels;
    let mut cross = vec![0.0; n * n];
    let mut lin = vec![0.0; n];
    let mut t2 = 0.0;
    for (i, &t) in labels.iter().enumerate() {
        let row = table.row(i);
        for &(a, xa) in row {
            lin[a] += t * xa;
            for &(b, xb) in row {
                cross[a * n + b] += xa * xb;
            }
        }
        t2 += t * t;
    }
    let scale = 2.0 / m as f64;
    let mut q: Vec<f64> = cross.iter().map(|v| scale * v).collect();
    for a in 0..n {
        q[a * n + a] += 2.0 * lambda0;
    }
    let c = lin.iter().map(|v| -scale * v - 2.0 * lambda0).collect();
    Ok(QpProblem {
        dim: n,
        q,
        c,
        lb: vec![0.0; n],
        level_offsets: table.offsets,
        lambda0,
        constant_term: t2 / m as f64 + lambda0 * n as f64,
    })
}

/// Splits a flat QP solution back into per-base weighting functions.
pub fn unflatten(x: &[f64], levels_per_base: &[usize]) -> Vec<WeightingFunction> {
    let mut start = 0;
    levels_per_base
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let w = WeightingFunction { base_index: k, levels: x[start..start + l].to_vec() };
            start += l;
            w
        })
        .collect()
}

pub fn flatten(weighting: &[WeightingFunction]) -> Vec<f64> {
    weighting.iter().flat_map(|w| w.levels.iter().copied()).collect()
}

/// Trapezoid estimate of `Σ_k ∫ [(f_k(x) - p_k(x)) · x]² dx` from curves
/// sampled on `grid`.
pub fn noise_mse(ideal: &[Vec<f64>], actual: &[Vec<f64>], grid: &[f64]) -> Result<f64> {
    if ideal.len() != actual.len() {
        return Err(EpicError::DimensionMismatch { expected: ideal.len(), actual: actual.len() });
    }
    let mut total = 0.0;
    for (f, p) in ideal.iter().zip(actual) {
        if f.len() != grid.len() || p.len() != grid.len() {
            return Err(EpicError::DimensionMismatch { expected: grid.len(), actual: f.len().min(p.len()) });
        }
        let h: Vec<f64> = (0..grid.len())
            .map(|j| {
                let e = (f[j] - p[j]) * grid[j];
                e * e
            })
            .collect();
        for j in 1..grid.len() {
            total += 0.5 * (h[j] + h[j - 1]) * (grid[j] - grid[j - 1]);
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantizer_edges() {
        assert_eq!(quantize_index(-1.0, 4).unwrap(), 1);
        assert_eq!(quantize_index(1.0, 4).unwrap(), 4);
        assert_eq!(quantize_index(0.0, 4).unwrap(), 3);
        assert!(matches!(quantize_index(1.5, 4), Err(EpicError::DomainViolation(_))));
    }

    #[test]
    fn hand_scored_example() {
        let w = vec![
            WeightingFunction { base_index: 0, levels: vec![0.5, 2.0] },
            WeightingFunction { base_index: 1, levels: vec![1.0, 1.0] },
        ];
        assert_eq!(meta_score(&w, &[-0.5, 0.5]).unwrap(), 0.25);
        assert_eq!(meta_score(&[WeightingFunction::constant(0, 4, 0.0)], &[0.7]).unwrap(), 0.0);
        assert_eq!(meta_score(&[WeightingFunction::constant(0, 4, 1.0)], &[0.7]).unwrap(), 0.7);
    }

    #[test]
    fn inclusive_decision() {
        let w = [WeightingFunction::constant(0, 2, 1.0)];
        assert_eq!(meta_decide(&w, 0.5, &[0.5]).unwrap(), 1.0);
        assert_eq!(meta_decide(&w, 0.5 + 1e-9, &[0.5]).unwrap(), -1.0);
        assert_eq!(meta_decide(&w, f64::NEG_INFINITY, &[-1.0]).unwrap(), 1.0);
    }

    #[test]
    fn mse_and_pcost() {
        let out = BaseOutputs::from_rows(&[vec![0.0]]).unwrap();
        let w = [WeightingFunction::constant(0, 1, 1.0)];
        assert_eq!(meta_mse(&w, &out, &[1.0]).unwrap(), 1.0);
        assert_eq!(pcost(&w, 3.0), 0.0);
        let w = [WeightingFunction { base_index: 0, levels: vec![3.0, 1.0] }];
        assert_eq!(pcost(&w, 2.0), 8.0);
        assert_eq!(pcost(&w, 0.0), 0.0);
    }

    #[test]
    fn one_by_one_assembly() {
        let out = BaseOutputs::from_rows(&[vec![1.0]]).unwrap();
        let p = qp_assemble(&out, &[1.0], &[1], 0.0).unwrap();
        assert_eq!(p.q, vec![2.0]);
        assert_eq!(p.c, vec![-2.0]);
        assert_eq!(p.constant_term, 1.0);
        assert_eq!(p.objective(&[1.0]), 0.0);
    }

    #[test]
    fn unused_level_is_empty_without_ridge() {
        let out = BaseOutputs::from_rows(&[vec![0.9], vec![0.8]]).unwrap();
        let p = qp_assemble(&out, &[1.0, -1.0], &[2], 0.0).unwrap();
        assert_eq!(p.q[0], 0.0);
        assert_eq!(p.q[1], 0.0);
        assert_eq!(p.c[0], 0.0);
        let p = qp_assemble(&out, &[1.0, -1.0], &[2], 0.5).unwrap();
        assert_eq!(p.q[0], 1.0);
        assert_eq!(p.c[0], -1.0);
    }

    #[test]
    fn noise_of_unit_error_curve() {
        let grid: Vec<f64> = (0..2001).map(|j| -1.0 + j as f64 / 1000.0).collect();
        let f = vec![vec![2.0; grid.len()]];
        let p = vec![vec![1.0; grid.len()]];
        let v = noise_mse(&f, &p, &grid).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-3);
        let f2 = vec![vec![3.0; grid.len()]];
        assert!((noise_mse(&f2, &p, &grid).unwrap() - 4.0 * v).abs() < 1e-12);
        assert_eq!(noise_mse(&p, &p, &grid).unwrap(), 0.0);
    }
}
