//! `epic` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use epic::bench::{run_bench, run_echo, write_bench};
use epic::config::EpicConfig;
use epic::features::{samples_from_csv, samples_to_csv, CalibSample, FeatureExtractor};
use epic::geom::{fragment_layout, generate_layout, read_layout, RNG_ALGORITHM};
use epic::metrics::{compute_report, reports_to_csv, sweep_tradeoff};
use epic::model_file::{load_model, save_model};
use epic::oracle::{label_fragments, labels_from_csv, labels_to_csv, HotspotLabel, Oracle};
use epic::pipeline::{calibrate, detections_from_csv, predict_with, threshold_candidates, Detection, DETECTIONS_HEADER};
use epic::{EpicError, Result};

#[derive(Parser, Debug)]
#[command(name = "epic", version, about = "Lithography hotspot meta-classification")]
struct Cli {
    /// Run seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// `key=value` configuration overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output file, or directory for `bench`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic layout.
    Gen,
    /// Simulate EPE for every fragment and assign hotspot labels.
    Label {
        #[arg(long)]
        layout: PathBuf,
    },
    /// Extract labeled feature vectors.
    Extract {
        #[arg(long)]
        layout: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Train the bases and calibrate the meta-classifier.
    Calibrate {
        #[arg(long)]
        samples: PathBuf,
        /// Also write calibration-time detections here.
        #[arg(long)]
        detections_out: Option<PathBuf>,
    },
    /// Classify every fragment of a layout.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        layout: PathBuf,
    },
    /// Score detections against labels.
    Eval {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Accuracy / false-alarm trade-off over score thresholds.
    Sweep {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 64)]
        points: usize,
    },
    /// End-to-end seeded run writing the full report suite.
    Bench,
}

fn load_config(path: Option<&Path>) -> Result<EpicConfig> {
    match path {
        Some(p) => EpicConfig::load(p),
        None => Ok(EpicConfig::default()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| EpicError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| EpicError::io(path, e))
}

fn labels_by_id(path: &Path) -> Result<HashMap<u64, HotspotLabel>> {
    let labels = labels_from_csv(&read_file(path)?, path)?;
    Ok(labels.into_iter().map(|l| (l.fragment_id, l)).collect())
}

/// Labels aligned with `ids`; every id must be labeled.
fn aligned_labels(ids: &[u64], labels: &HashMap<u64, HotspotLabel>, path: &Path) -> Result<Vec<f64>> {
    ids.iter()
        .map(|id| {
            labels
                .get(id)
                .map(|l| l.t_litho)
                .ok_or_else(|| EpicError::InvalidInput(format!("{}: no label for fragment {id}", path.display())))
        })
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    let echo = run_echo(cli.seed, &cfg);
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    match &cli.command {
        Command::Gen => {
            let layout = generate_layout(cli.seed, &cfg.gen)?;
            write_file(&out("layout.txt"), &layout.to_text(&echo))?;
        }
        Command::Label { layout } => {
            let layout = read_layout(layout)?;
            let fragments = fragment_layout(&layout, cfg.frag_len)?;
            let epes = Oracle::new(&layout, &cfg.oracle)?.epe_all(&fragments);
            let labels = label_fragments(&epes, &cfg.oracle, cfg.target)?;
            write_file(&out("labels.csv"), &labels_to_csv(&labels, &echo))?;
        }
        Command::Extract { layout, labels } => {
            let layout_data = read_layout(layout)?;
            let fragments = fragment_layout(&layout_data, cfg.frag_len)?;
            let by_id = labels_by_id(labels)?;
            let ids: Vec<u64> = fragments.iter().map(|f| f.id).collect();
            let t = aligned_labels(&ids, &by_id, labels)?;
            let features = FeatureExtractor::new(&layout_data, cfg.features)?.extract_all(&fragments);
            let samples: Vec<CalibSample> = features
                .into_iter()
                .zip(t)
                .map(|(features, t_litho)| CalibSample { features, t_litho })
                .collect();
            write_file(&out("samples.csv"), &samples_to_csv(&samples, &echo))?;
        }
        Command::Calibrate { samples, detections_out } => {
            let data = samples_from_csv(&read_file(samples)?, samples)?;
            let calib = cfg.calib.clone().with_seed(cli.seed);
            let (model, report) = calibrate(&data, &calib, echo.clone())?;
            save_model(&model, &out("model.epic"))?;
            if let Some(path) = detections_out {
                let detections: Vec<Detection> = report
                    .fragment_ids
                    .iter()
                    .zip(&report.scores)
                    .map(|(&fragment_id, &score)| Detection {
                        fragment_id,
                        t_meta: epic::meta::threshold_decide(score, model.theta),
                        score,
                    })
                    .collect();
                write_file(path, &epic::pipeline::detections_to_csv(&detections, &echo))?;
            }
        }
        Command::Predict { model, layout } => {
            let model = load_model(model)?;
            let layout = read_layout(layout)?;
            let fragments = fragment_layout(&layout, cfg.frag_len)?;
            let extractor = FeatureExtractor::new(&layout, cfg.features)?;
            let path = out("detections.csv");
            let file = fs::File::create(&path).map_err(|e| EpicError::io(&path, e))?;
            let mut w = BufWriter::new(file);
            let io = |e| EpicError::io(&path, e);
            for c in &echo {
                writeln!(w, "# {c}").map_err(io)?;
            }
            writeln!(w, "{DETECTIONS_HEADER}").map_err(io)?;
            predict_with(&model, fragments.iter().map(|f| extractor.extract(f)), |d| {
                writeln!(w, "{},{},{:?}", d.fragment_id, d.t_meta as i64, d.score).map_err(io)
            })?;
            w.flush().map_err(io)?;
        }
        Command::Eval { detections, labels } => {
            let dets = detections_from_csv(&read_file(detections)?, detections)?;
            let by_id = labels_by_id(labels)?;
            let ids: Vec<u64> = dets.iter().map(|d| d.fragment_id).collect();
            let t = aligned_labels(&ids, &by_id, labels)?;
            let preds: Vec<f64> = dets.iter().map(|d| d.t_meta).collect();
            let report = compute_report(&preds, &t, cfg.calib.psi)?;
            write_file(&out("report.csv"), &reports_to_csv(&[report], &echo))?;
        }
        Command::Sweep { detections, labels, points } => {
            if *points < 2 {
                return Err(EpicError::InvalidInput("--points must be at least 2".into()));
            }
            let dets = detections_from_csv(&read_file(detections)?, detections)?;
            let by_id = labels_by_id(labels)?;
            let ids: Vec<u64> = dets.iter().map(|d| d.fragment_id).collect();
            let t = aligned_labels(&ids, &by_id, labels)?;
            let scores: Vec<f64> = dets.iter().map(|d| d.score).collect();
            let grid = threshold_candidates(&scores, *points);
            let rows = sweep_tradeoff(&scores, &t, &grid, cfg.calib.psi)?;
            write_file(&out("sweep.csv"), &reports_to_csv(&rows, &echo))?;
        }
        Command::Bench => {
            let dir = out("bench");
            let result = run_bench(cli.seed, &cfg)?;
            write_bench(&result, &cfg, &dir)?;
            log::info!(
                "bench seed {} ({}): config hash {}, {} fragments",
                cli.seed,
                RNG_ALGORITHM,
                cfg.hash(),
                result.dataset.samples.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: cannot size thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
