//! Calibration and prediction built from the base classifiers, the quantized
//! weighting and the QP solver.

use rayon::prelude::*;

use crate::ann::{ann_train, AnnModel, AnnTrainConfig};
use crate::error::{EpicError, Result};
use crate::features::{CalibSample, FeatureVector};
use crate::meta::{
    flatten, meta_score, qp_assemble, threshold_decide, unflatten, BaseOutputs, WeightingFunction,
};
use crate::metrics::{sweep_tradeoff, DetectionReport, PsiWeights};
use crate::pm::{pm_build_library, pm_match, PmConfig, PmLibrary};
use crate::qp::{adjust_lambda0, solve_qp, QpProblem, QpSolution, QpStatus};
use crate::svm::{svm_train, SvmModel, SvmStatus, SvmTrainConfig};

pub const BASE_NAMES: [&str; 3] = ["ann", "svm", "pm"];

#[derive(Debug, Clone, PartialEq)]
pub struct CalibConfig {
    pub lambda0_init: f64,
    pub levels_per_base: Vec<usize>,
    pub psi: PsiWeights,
    pub theta_grid_size: usize,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    pub ann: AnnTrainConfig,
    pub svm: SvmTrainConfig,
    pub pm: PmConfig,
    /// Folds for out-of-fold base outputs; below 2 the weights and
    /// thresholds are fitted on in-sample outputs.
    pub stack_folds: usize,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig {
            lambda0_init: 1e-3,
            levels_per_base: vec![1, 1, 2],
            psi: PsiWeights::default(),
            theta_grid_size: 512,
            qp_tol: 1e-8,
            qp_max_iter: 1_000_000,
            ann: AnnTrainConfig::default(),
            svm: SvmTrainConfig::default(),
            pm: PmConfig::default(),
            stack_folds: 3,
        }
    }
}

impl CalibConfig {
    /// Derives the base-classifier seeds from one run seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ann.seed = seed;
        self.svm.seed = seed.wrapping_add(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.psi.alpha > 0.0) || !(self.psi.beta < 0.0) {
            return Err(EpicError::InvalidInput("psi alpha must be positive and psi beta negative".into()));
        }
        if self.theta_grid_size < 2 {
            return Err(EpicError::InvalidInput("threshold grid needs at least 2 points".into()));
        }
        if self.levels_per_base.len() != BASE_NAMES.len() || self.levels_per_base.contains(&0) {
            return Err(EpicError::InvalidInput("need a positive level count for each of the 3 bases".into()));
        }
        if !(self.lambda0_init >= 0.0) {
            return Err(EpicError::InvalidInput("lambda0 must be nonnegative".into()));
        }
        self.pm.validate()
    }
}

/// The three trained base classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseModels {
    pub ann: AnnModel,
    pub svm: SvmModel,
    pub pm: PmLibrary,
}

impl BaseModels {
    pub fn dim(&self) -> usize {
        self.ann.inputs
    }

    /// `(ann, svm, pm)` outputs in `[-1, 1]`.
    pub fn raw_scores(&self, v: &FeatureVector) -> Result<[f64; 3]> {
        Ok([self.ann.raw_score(v)?, self.svm.raw_score(v)?, pm_match(&self.pm, v)?])
    }

    /// Standalone base decisions at each base's own threshold.
    pub fn decide(&self, v: &FeatureVector) -> Result<[f64; 3]> {
        let [a, s, p] = self.raw_scores(v)?;
        Ok([
            threshold_decide(a, self.ann.threshold),
            threshold_decide(s, self.svm.threshold),
            threshold_decide(p, 0.0),
        ])
    }

    pub fn thresholds(&self) -> [f64; 3] {
        [self.ann.threshold, self.svm.threshold, 0.0]
    }

    pub fn outputs(&self, features: &[&FeatureVector]) -> Result<BaseOutputs> {
        let rows: Vec<[f64; 3]> = features.par_iter().map(|v| self.raw_scores(v)).collect::<Result<_>>()?;
        BaseOutputs::new(3, rows.concat())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaModel {
    pub weighting: Vec<WeightingFunction>,
    pub theta: f64,
    pub lambda0: f64,
    pub bases: BaseModels,
    /// `key=value` lines of the configuration used to build the model.
    pub config_echo: Vec<String>,
}

impl MetaModel {
    pub fn score(&self, v: &FeatureVector) -> Result<f64> {
        meta_score(&self.weighting, &self.bases.raw_scores(v)?)
    }

    pub fn decide(&self, v: &FeatureVector) -> Result<f64> {
        Ok(threshold_decide(self.score(v)?, self.theta))
    }

    /// Unit weight on one base, zero elsewhere, cut at that base's threshold.
    /// Decisions then coincide with the base's own.
    pub fn single_base(&self, base: usize) -> MetaModel {
        let mut m = self.clone();
        for (k, w) in m.weighting.iter_mut().enumerate() {
            let v = if k == base { 1.0 } else { 0.0 };
            w.levels.iter_mut().for_each(|p| *p = v);
        }
        m.theta = self.bases.thresholds()[base];
        m
    }

    /// Fixed hybrid: half weight on confident ANN and SVM hotspot calls, full
    /// weight on a pattern hit, cut at 1.
    pub fn static_hybrid(&self) -> MetaModel {
        let mut m = self.clone();
        for (k, w) in m.weighting.iter_mut().enumerate() {
            let top = if k == 2 { 1.0 } else { 0.5 };
            let last = w.levels.len() - 1;
            for (l, p) in w.levels.iter_mut().enumerate() {
                *p = if l == last { top } else { 0.0 };
            }
        }
        m.theta = 1.0;
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdChoice {
    pub theta: f64,
    pub report: DetectionReport,
    /// Set when no hotspot labels were present.
    pub no_hotspots: bool,
}

/// Candidate thresholds: `grid` quantiles of the sorted scores plus ±∞.
pub fn threshold_candidates(scores: &[f64], grid: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out = vec![f64::NEG_INFINITY];
    if !sorted.is_empty() {
        let last = sorted.len() - 1;
        for g in 0..grid {
            let idx = ((g as f64) * last as f64 / (grid - 1) as f64).round() as usize;
            out.push(sorted[idx.min(last)]);
        }
    }
    out.push(f64::INFINITY);
    out.dedup();
    out
}

/// Maximizes Ψ over the candidate thresholds, preferring the larger θ on ties.
pub fn select_threshold(scores: &[f64], labels: &[f64], psi: PsiWeights, grid: usize) -> Result<ThresholdChoice> {
    if grid < 2 {
        return Err(EpicError::InvalidInput("threshold grid needs at least 2 points".into()));
    }
    let candidates = threshold_candidates(scores, grid);
    let rows = sweep_tradeoff(scores, labels, &candidates, psi)?;
    if rows[0].actual_hotspots == 0 {
        log::warn!("no hotspot labels in calibration data; threshold set to +inf");
        let last = rows.last().unwrap().clone();
        return Ok(ThresholdChoice { theta: f64::INFINITY, report: last, no_hotspots: true });
    }
    let mut best = 0;
    for (i, r) in rows.iter().enumerate() {
        if r.psi >= rows[best].psi {
            best = i;
        }
    }
    Ok(ThresholdChoice { theta: candidates[best], report: rows[best].clone(), no_hotspots: false })
}

/// QP stage output.
#[derive(Debug, Clone)]
pub struct WeightCalibration {
    pub weighting: Vec<WeightingFunction>,
    pub lambda0: f64,
    pub doublings: usize,
    pub problem: QpProblem,
    pub solution: QpSolution,
}

/// Weighting from precomputed base outputs; exposed so alternative bases can
/// be injected.
pub fn calibrate_weights(outputs: &BaseOutputs, labels: &[f64], cfg: &CalibConfig) -> Result<WeightCalibration> {
    let levels = &cfg.levels_per_base;
    let adjusted = adjust_lambda0(|lam| qp_assemble(outputs, labels, levels, lam), cfg.lambda0_init)?;
    let solution = solve_qp(&adjusted.problem, cfg.qp_tol, cfg.qp_max_iter)?;
    if solution.status == QpStatus::MaxIter {
        log::warn!("weight QP did not reach tolerance (KKT residual {:e})", solution.kkt_residual);
    }
    let mut x = solution.x.clone();
    if adjusted.lambda0 == 0.0 {
        // Unobserved levels carry no information; pin them to unit weight.
        let p = &adjusted.problem;
        for (i, xi) in x.iter_mut().enumerate() {
            if p.at(i, i) == 0.0 {
                *xi = 1.0;
            }
        }
    }
    Ok(WeightCalibration {
        weighting: unflatten(&x, levels),
        lambda0: adjusted.lambda0,
        doublings: adjusted.doublings,
        problem: adjusted.problem,
        solution,
    })
}

/// Diagnostics gathered during calibration.
#[derive(Debug, Clone)]
pub struct CalibReport {
    /// Base outputs the weights and thresholds were fitted on (out-of-fold
    /// when stacking folds are enabled).
    pub fit_outputs: BaseOutputs,
    /// Meta scores of `fit_outputs` under the final weighting.
    pub fit_scores: Vec<f64>,
    /// Outputs of the final bases on the calibration samples.
    pub outputs: BaseOutputs,
    /// Meta scores of `outputs`; prediction on the calibration set
    /// reproduces these.
    pub scores: Vec<f64>,
    pub labels: Vec<f64>,
    pub fragment_ids: Vec<u64>,
    pub weights: WeightCalibration,
    pub threshold: ThresholdChoice,
    pub ann_losses: Vec<f64>,
    pub svm_status: SvmStatus,
    pub svm_kkt_residual: f64,
}

impl CalibReport {
    /// QP objective of the unit-weight vector on one base.
    pub fn single_base_objective(&self, base: usize, levels_per_base: &[usize]) -> f64 {
        let w: Vec<WeightingFunction> = levels_per_base
            .iter()
            .enumerate()
            .map(|(k, &l)| WeightingFunction::constant(k, l, if k == base { 1.0 } else { 0.0 }))
            .collect();
        self.weights.problem.objective(&flatten(&w))
    }
}

struct Fitted {
    bases: BaseModels,
    ann_losses: Vec<f64>,
    svm_status: SvmStatus,
    svm_kkt_residual: f64,
}

/// Trains all three bases; thresholds are left at zero.
fn fit_bases(samples: &[CalibSample], cfg: &CalibConfig) -> Result<Fitted> {
    let (ann, ann_report) = ann_train(samples, &cfg.ann)?;
    let (svm, svm_report) = svm_train(samples, &cfg.svm)?;
    let dim = samples[0].features.dim();
    let hot: Vec<CalibSample> = samples.iter().filter(|s| s.is_hotspot()).cloned().collect();
    let pm = pm_build_library(&hot, &cfg.pm, dim)?;
    Ok(Fitted {
        bases: BaseModels { ann, svm, pm },
        ann_losses: ann_report.losses,
        svm_status: svm_report.status,
        svm_kkt_residual: svm_report.kkt_residual,
    })
}

/// Fold index per sample: hotspots and non-hotspots are dealt round-robin
/// separately so every fold sees both classes.
fn fold_assignment(samples: &[CalibSample], folds: usize) -> Vec<usize> {
    let mut next = [0usize; 2];
    samples
        .iter()
        .map(|s| {
            let class = usize::from(s.is_hotspot());
            let f = next[class] % folds;
            next[class] += 1;
            f
        })
        .collect()
}

/// Base outputs of each sample from bases trained without its fold.
fn out_of_fold_outputs(samples: &[CalibSample], cfg: &CalibConfig) -> Result<BaseOutputs> {
    let folds = cfg.stack_folds;
    let assign = fold_assignment(samples, folds);
    let per_fold: Vec<Vec<(usize, [f64; 3])>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<CalibSample> = samples
                .iter()
                .zip(&assign)
                .filter(|(_, &a)| a != f)
                .map(|(s, _)| s.clone())
                .collect();
            let fitted = fit_bases(&train, cfg)?;
            samples
                .iter()
                .enumerate()
                .filter(|(i, _)| assign[*i] == f)
                .map(|(i, s)| Ok((i, fitted.bases.raw_scores(&s.features)?)))
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut rows = vec![[0.0; 3]; samples.len()];
    for (i, r) in per_fold.into_iter().flatten() {
        rows[i] = r;
    }
    BaseOutputs::new(3, rows.concat())
}

fn scores_of(weighting: &[WeightingFunction], outputs: &BaseOutputs) -> Result<Vec<f64>> {
    (0..outputs.samples()).map(|i| meta_score(weighting, outputs.row(i))).collect()
}

/// Trains the bases, solves for the weighting and picks the thresholds.
pub fn calibrate(samples: &[CalibSample], cfg: &CalibConfig, config_echo: Vec<String>) -> Result<(MetaModel, CalibReport)> {
    cfg.validate()?;
    if samples.len() < 2 {
        return Err(EpicError::EmptyDataset);
    }
    let pos = samples.iter().filter(|s| s.is_hotspot()).count();
    if pos == 0 || pos == samples.len() {
        return Err(EpicError::SingleClass);
    }
    let mut ordered: Vec<CalibSample> = samples.to_vec();
    ordered.sort_by_key(|s| s.features.fragment_id);
    let Fitted { mut bases, ann_losses, svm_status, svm_kkt_residual } = fit_bases(&ordered, cfg)?;

    let feats: Vec<&FeatureVector> = ordered.iter().map(|s| &s.features).collect();
    let labels: Vec<f64> = ordered.iter().map(|s| s.t_litho).collect();
    let outputs = bases.outputs(&feats)?;
    let negatives = ordered.len() - pos;
    let fit_outputs = if cfg.stack_folds >= 2 && pos >= cfg.stack_folds && negatives >= cfg.stack_folds {
        out_of_fold_outputs(&ordered, cfg)?
    } else {
        if cfg.stack_folds >= 2 {
            log::warn!("too few samples per class for {} folds; fitting weights in-sample", cfg.stack_folds);
        }
        outputs.clone()
    };

    bases.ann.threshold = select_threshold(&fit_outputs.column(0), &labels, cfg.psi, cfg.theta_grid_size)?.theta;
    bases.svm.threshold = select_threshold(&fit_outputs.column(1), &labels, cfg.psi, cfg.theta_grid_size)?.theta;
    let weights = calibrate_weights(&fit_outputs, &labels, cfg)?;
    let fit_scores = scores_of(&weights.weighting, &fit_outputs)?;
    let threshold = select_threshold(&fit_scores, &labels, cfg.psi, cfg.theta_grid_size)?;
    let scores = scores_of(&weights.weighting, &outputs)?;
    let model = MetaModel {
        weighting: weights.weighting.clone(),
        theta: threshold.theta,
        lambda0: weights.lambda0,
        bases,
        config_echo,
    };
    let report = CalibReport {
        fit_outputs,
        fit_scores,
        outputs,
        scores,
        labels,
        fragment_ids: ordered.iter().map(|s| s.features.fragment_id).collect(),
        weights,
        threshold,
        ann_losses,
        svm_status,
        svm_kkt_residual,
    };
    Ok((model, report))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub fragment_id: u64,
    pub t_meta: f64,
    pub score: f64,
}

const PREDICT_CHUNK: usize = 4096;

/// Streams features through the model in chunks, handing each detection to
/// `sink` in fragment-id order. Ids must be strictly increasing.
pub fn predict_with<I, F>(model: &MetaModel, features: I, mut sink: F) -> Result<()>
where
    I: IntoIterator<Item = FeatureVector>,
    F: FnMut(Detection) -> Result<()>,
{
    let mut chunk = Vec::with_capacity(PREDICT_CHUNK);
    let mut previous: Option<u64> = None;
    let flush = |chunk: &mut Vec<FeatureVector>, sink: &mut F| -> Result<()> {
        let out: Vec<Detection> = chunk
            .par_iter()
            .map(|v| {
                let score = model.score(v)?;
                Ok(Detection { fragment_id: v.fragment_id, t_meta: threshold_decide(score, model.theta), score })
            })
            .collect::<Result<_>>()?;
        chunk.clear();
        out.into_iter().try_for_each(|d| sink(d))
    };
    for v in features {
        if v.dim() != model.bases.dim() {
            return Err(EpicError::DimensionMismatch { expected: model.bases.dim(), actual: v.dim() });
        }
        if let Some(p) = previous {
            if v.fragment_id <= p {
                return Err(EpicError::UnorderedFragments { previous: p, next: v.fragment_id });
            }
        }
        previous = Some(v.fragment_id);
        chunk.push(v);
        if chunk.len() == PREDICT_CHUNK {
            flush(&mut chunk, &mut sink)?;
        }
    }
    flush(&mut chunk, &mut sink)
}

pub fn predict<I>(model: &MetaModel, features: I) -> Result<Vec<Detection>>
where
    I: IntoIterator<Item = FeatureVector>,
{
    let mut out = Vec::new();
    predict_with(model, features, |d| {
        out.push(d);
        Ok(())
    })?;
    Ok(out)
}

pub const DETECTIONS_HEADER: &str = "fragment_id,t_meta,score";

pub fn detections_to_csv(detections: &[Detection], comments: &[String]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    writeln!(out, "{DETECTIONS_HEADER}").unwrap();
    for d in detections {
        writeln!(out, "{},{},{:?}", d.fragment_id, d.t_meta as i64, d.score).unwrap();
    }
    out
}

pub fn detections_from_csv(text: &str, path: &std::path::Path) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    let mut header = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header {
            if line != DETECTIONS_HEADER {
                return Err(EpicError::malformed(path, n + 1, format!("expected header `{DETECTIONS_HEADER}`")));
            }
            header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |m: &str| EpicError::malformed(path, n + 1, m.to_string());
        if f.len() != 3 {
            return Err(bad("expected 3 fields"));
        }
        let fragment_id = f[0].parse().map_err(|_| bad("bad fragment id"))?;
        let t_meta = match f[1] {
            "1" => 1.0,
            "-1" => -1.0,
            _ => return Err(bad("decision must be 1 or -1")),
        };
        let score = f[2].parse().map_err(|_| bad("bad score"))?;
        out.push(Detection { fragment_id, t_meta, score });
    }
    if !header {
        return Err(EpicError::malformed(path, 1, "missing header"));
    }
    Ok(out)
}
