//! End-to-end behavior of calibration, prediction and model persistence.

use epic::bench::build_dataset;
use epic::config::EpicConfig;
use epic::features::FeatureVector;
use epic::meta::{meta_decide, BaseOutputs};
use epic::model_file::{load_model, model_to_text, save_model};
use epic::pipeline::{calibrate, calibrate_weights, predict, CalibConfig};

fn small_config() -> EpicConfig {
    let mut cfg = EpicConfig::default();
    cfg.gen.width = 12_000;
    cfg.gen.height = 12_000;
    cfg.gen.rect_count = 60;
    cfg.gen.motif_rate = 0.2;
    cfg.calib.ann.epochs = 150;
    cfg
}

#[test]
fn prediction_reproduces_calibration_scores_after_reload() {
    let cfg = small_config();
    let data = build_dataset(3, &cfg).unwrap();
    assert!(data.samples.iter().any(|s| s.is_hotspot()));
    let calib = cfg.calib.clone().with_seed(3);
    let (model, report) = calibrate(&data.samples, &calib, vec!["seed=3".into()]).unwrap();

    let feats: Vec<FeatureVector> = data.samples.iter().map(|s| s.features.clone()).collect();
    let detections = predict(&model, feats.iter().cloned()).unwrap();
    assert_eq!(detections.len(), report.scores.len());
    for (d, (&id, &score)) in detections.iter().zip(report.fragment_ids.iter().zip(&report.scores)) {
        assert_eq!(d.fragment_id, id);
        assert_eq!(d.score, score);
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.epic");
    save_model(&model, &path).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(model_to_text(&back), model_to_text(&model));
    let again = predict(&back, feats).unwrap();
    assert_eq!(again, detections);
}

#[test]
fn calibration_is_deterministic_per_seed() {
    let cfg = small_config();
    let data = build_dataset(5, &cfg).unwrap();
    let calib = cfg.calib.clone().with_seed(5);
    let (a, _) = calibrate(&data.samples, &calib, Vec::new()).unwrap();
    let (b, _) = calibrate(&data.samples, &calib, Vec::new()).unwrap();
    assert_eq!(model_to_text(&a), model_to_text(&b));
}

#[test]
fn a_perfect_injected_base_is_trusted() {
    // base 0 always agrees with the label, the others are noise
    let labels: Vec<f64> = (0..120).map(|i| if i % 7 == 0 { 1.0 } else { -1.0 }).collect();
    let rows: Vec<Vec<f64>> = labels
        .iter()
        .enumerate()
        .map(|(i, &t)| vec![t, ((i * 37) % 11) as f64 / 5.0 - 1.0, if i % 3 == 0 { 1.0 } else { -1.0 }])
        .collect();
    let outputs = BaseOutputs::from_rows(&rows).unwrap();
    let cfg = CalibConfig { levels_per_base: vec![2, 2, 2], ..CalibConfig::default() };
    let wc = calibrate_weights(&outputs, &labels, &cfg).unwrap();
    for (row, &t) in rows.iter().zip(&labels) {
        assert_eq!(meta_decide(&wc.weighting, 0.0, row).unwrap(), t);
    }
}
