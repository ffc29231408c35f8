//! Seeded end-to-end runs: generate, label, extract, split, calibrate and
//! evaluate on the held-out part.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::EpicConfig;
use crate::error::{EpicError, Result};
use crate::features::{samples_to_csv, CalibSample, FeatureExtractor, FeatureVector};
use crate::geom::{fragment_layout, generate_layout, Layout, RNG_ALGORITHM};
use crate::meta::threshold_decide;
use crate::metrics::{named_reports_to_csv, reports_to_csv, sweep_tradeoff, DetectionReport};
use crate::model_file::model_to_text;
use crate::oracle::{label_fragments, labels_to_csv, HotspotLabel, Oracle};
use crate::pipeline::{
    calibrate, detections_to_csv, predict, threshold_candidates, CalibReport, Detection, MetaModel, BASE_NAMES,
};

/// Labeled fragments of one generated layout.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub layout: Layout,
    pub labels: Vec<HotspotLabel>,
    pub samples: Vec<CalibSample>,
}

pub fn build_dataset(seed: u64, cfg: &EpicConfig) -> Result<Dataset> {
    cfg.validate()?;
    let layout = generate_layout(seed, &cfg.gen)?;
    let fragments = fragment_layout(&layout, cfg.frag_len)?;
    let oracle = Oracle::new(&layout, &cfg.oracle)?;
    let epes = oracle.epe_all(&fragments);
    let labels = label_fragments(&epes, &cfg.oracle, cfg.target)?;
    let extractor = FeatureExtractor::new(&layout, cfg.features)?;
    let features = extractor.extract_all(&fragments);
    let samples = features
        .into_iter()
        .zip(&labels)
        .map(|(features, l)| CalibSample { features, t_litho: l.t_litho })
        .collect();
    Ok(Dataset { layout, labels, samples })
}

/// Seeded shuffle split; both parts come back sorted by fragment id.
pub fn split_samples(samples: &[CalibSample], fraction: f64, seed: u64) -> (Vec<CalibSample>, Vec<CalibSample>) {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    idx.shuffle(&mut rng);
    let cut = ((samples.len() as f64) * fraction).round() as usize;
    let mut calib: Vec<CalibSample> = idx[..cut].iter().map(|&i| samples[i].clone()).collect();
    let mut test: Vec<CalibSample> = idx[cut..].iter().map(|&i| samples[i].clone()).collect();
    calib.sort_by_key(|s| s.features.fragment_id);
    test.sort_by_key(|s| s.features.fragment_id);
    (calib, test)
}

/// Keeps the split stream apart from the generator stream of the same seed.
const SPLIT_SALT: u64 = 0x5eed_0000_0000_0001;

/// One classifier's standing on the test split.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub name: String,
    pub scores: Vec<f64>,
    pub report: DetectionReport,
    pub sweep: Vec<DetectionReport>,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub seed: u64,
    pub dataset: Dataset,
    pub calib_size: usize,
    pub test: Vec<CalibSample>,
    pub model: MetaModel,
    pub calib_report: CalibReport,
    pub detections: Vec<Detection>,
    /// `meta`, `ann`, `svm`, `pm`, `hybrid`, in that order.
    pub evaluations: Vec<Evaluation>,
}

impl BenchRun {
    pub fn hotspot_rate(&self) -> f64 {
        let hot = self.dataset.samples.iter().filter(|s| s.is_hotspot()).count();
        hot as f64 / self.dataset.samples.len().max(1) as f64
    }

    pub fn evaluation(&self, name: &str) -> &Evaluation {
        self.evaluations.iter().find(|e| e.name == name).expect("known classifier name")
    }

    pub fn test_labels(&self) -> Vec<f64> {
        self.test.iter().map(|s| s.t_litho).collect()
    }
}

const SWEEP_POINTS: usize = 64;

fn evaluate(name: &str, scores: Vec<f64>, theta: f64, labels: &[f64], cfg: &EpicConfig) -> Result<Evaluation> {
    let psi = cfg.calib.psi;
    let mut grid = threshold_candidates(&scores, SWEEP_POINTS);
    grid.push(theta);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let sweep = sweep_tradeoff(&scores, labels, &grid, psi)?;
    let report = sweep_tradeoff(&scores, labels, &[theta], psi)?.remove(0);
    Ok(Evaluation { name: name.to_string(), scores, report, sweep })
}

pub fn run_bench(seed: u64, cfg: &EpicConfig) -> Result<BenchRun> {
    let dataset = build_dataset(seed, cfg)?;
    let (calib, test) = split_samples(&dataset.samples, cfg.calib_fraction, seed);
    if test.is_empty() {
        return Err(EpicError::EmptyDataset);
    }
    let calib_cfg = cfg.calib.clone().with_seed(seed);
    let echo = run_echo(seed, cfg);
    let (model, calib_report) = calibrate(&calib, &calib_cfg, echo)?;

    let labels: Vec<f64> = test.iter().map(|s| s.t_litho).collect();
    let feats: Vec<FeatureVector> = test.iter().map(|s| s.features.clone()).collect();
    let detections = predict(&model, feats.iter().cloned())?;
    let raw: Vec<[f64; 3]> = feats.par_iter().map(|v| model.bases.raw_scores(v)).collect::<Result<_>>()?;
    let hybrid = model.static_hybrid();
    let hybrid_scores: Vec<f64> = raw
        .iter()
        .map(|r| crate::meta::meta_score(&hybrid.weighting, r))
        .collect::<Result<_>>()?;

    let meta_scores: Vec<f64> = detections.iter().map(|d| d.score).collect();
    let mut evaluations = vec![evaluate("meta", meta_scores, model.theta, &labels, cfg)?];
    let thresholds = model.bases.thresholds();
    for (k, name) in BASE_NAMES.iter().enumerate() {
        let scores: Vec<f64> = raw.iter().map(|r| r[k]).collect();
        evaluations.push(evaluate(name, scores, thresholds[k], &labels, cfg)?);
    }
    evaluations.push(evaluate("hybrid", hybrid_scores, hybrid.theta, &labels, cfg)?);
    debug_assert!(detections.iter().all(|d| d.t_meta == threshold_decide(d.score, model.theta)));

    Ok(BenchRun {
        seed,
        calib_size: calib.len(),
        dataset,
        test,
        model,
        calib_report,
        detections,
        evaluations,
    })
}

pub fn run_echo(seed: u64, cfg: &EpicConfig) -> Vec<String> {
    cfg.echo(&[format!("seed={seed}"), format!("rng={RNG_ALGORITHM}")])
}

/// Files written by [`write_bench`], relative to the output directory.
pub const BENCH_FILES: [&str; 10] = [
    "layout.txt",
    "labels.csv",
    "calib_samples.csv",
    "model.epic",
    "detections.csv",
    "report.csv",
    "sweep_meta.csv",
    "sweep_ann.csv",
    "sweep_svm.csv",
    "sweep_pm.csv",
];

pub fn write_bench(run: &BenchRun, cfg: &EpicConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| EpicError::io(dir, e))?;
    let echo = run_echo(run.seed, cfg);
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| EpicError::io(path, e))
    };
    write("layout.txt", run.dataset.layout.to_text(&echo))?;
    write("labels.csv", labels_to_csv(&run.dataset.labels, &echo))?;
    let calib: Vec<CalibSample> = {
        let test_ids: std::collections::HashSet<u64> = run.test.iter().map(|s| s.features.fragment_id).collect();
        run.dataset
            .samples
            .iter()
            .filter(|s| !test_ids.contains(&s.features.fragment_id))
            .cloned()
            .collect()
    };
    write("calib_samples.csv", samples_to_csv(&calib, &echo))?;
    write("model.epic", model_to_text(&run.model))?;
    write("detections.csv", detections_to_csv(&run.detections, &echo))?;
    let named: Vec<(String, DetectionReport)> =
        run.evaluations.iter().map(|e| (e.name.clone(), e.report.clone())).collect();
    write("report.csv", named_reports_to_csv(&named, &echo))?;
    for name in ["meta", "ann", "svm", "pm"] {
        write(&format!("sweep_{name}.csv"), reports_to_csv(&run.evaluation(name).sweep, &echo))?;
    }
    Ok(())
}
