//! Property tests for the invariants each module promises.

use proptest::prelude::*;

use epic::features::{CalibSample, FeatureVector};
use epic::geom::{fragment_layout, generate_layout, GenConfig};
use epic::meta::{flatten, meta_mse, meta_score, pcost, qp_assemble, quantize_index, unflatten, BaseOutputs, WeightingFunction};
use epic::metrics::{compute_report, sweep_tradeoff, PsiWeights};
use epic::oracle::{label_fragments, EpeResult, HotspotClass, OracleConfig};
use epic::pm::{cells_match, pm_build_library, pm_match, PmConfig};
use epic::qp::{solve_qp, QpProblem};
use epic::svm::{rbf_kernel, svm_train, SvmTrainConfig};

fn unit() -> impl Strategy<Value = f64> {
    -1.0f64..=1.0
}

fn label() -> impl Strategy<Value = f64> {
    prop::bool::ANY.prop_map(|b| if b { 1.0 } else { -1.0 })
}

/// Base outputs (`M x N`), labels and per-base level counts.
fn meta_problem() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<usize>)> {
    (1usize..=3, 1usize..=40).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(unit(), n), m),
            prop::collection::vec(label(), m),
            prop::collection::vec(1usize..=8, n),
        )
    })
}

/// Symmetric positive definite matrix `AᵀA + I` with a linear term.
fn spd_problem() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
    (2usize..=5).prop_flat_map(|n| {
        (Just(n), prop::collection::vec(-1.0f64..1.0, n * n), prop::collection::vec(-3.0f64..3.0, n))
    })
    .prop_map(|(n, a, c)| {
        let mut q = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                q[i * n + j] = (0..n).map(|k| a[k * n + i] * a[k * n + j]).sum::<f64>();
            }
            q[i * n + i] += 1.0;
        }
        (n, q, c)
    })
}

proptest! {
    #[test]
    fn quantizer_stays_in_range_and_is_monotone(a in unit(), b in unit(), levels in 1usize..=16) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (i, j) = (quantize_index(lo, levels).unwrap(), quantize_index(hi, levels).unwrap());
        prop_assert!((1..=levels).contains(&i) && (1..=levels).contains(&j));
        prop_assert!(i <= j);
    }

    #[test]
    fn meta_score_ignores_base_order(
        row in prop::collection::vec(unit(), 3),
        levels in prop::collection::vec(prop::collection::vec(0.0f64..3.0, 1..=6), 3),
        perm in Just([0usize, 1, 2]).prop_shuffle(),
    ) {
        let weighting: Vec<WeightingFunction> = levels
            .iter()
            .enumerate()
            .map(|(k, l)| WeightingFunction { base_index: k, levels: l.clone() })
            .collect();
        let shuffled_w: Vec<WeightingFunction> = perm.iter().map(|&k| weighting[k].clone()).collect();
        let shuffled_row: Vec<f64> = perm.iter().map(|&k| row[k]).collect();
        let a = meta_score(&weighting, &row).unwrap();
        let b = meta_score(&shuffled_w, &shuffled_row).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn assembled_objective_equals_mse_plus_penalty(
        (rows, labels, levels) in meta_problem(),
        lambda0 in prop::sample::select(vec![0.0, 0.1, 1.0]),
        seed_x in prop::collection::vec(0.0f64..3.0, 24),
    ) {
        let outputs = BaseOutputs::from_rows(&rows).unwrap();
        let p = qp_assemble(&outputs, &labels, &levels, lambda0).unwrap();
        prop_assert_eq!(p.dim, levels.iter().sum::<usize>());
        for i in 0..p.dim {
            for j in 0..p.dim {
                prop_assert!((p.at(i, j) - p.at(j, i)).abs() <= 1e-12);
            }
        }
        let x: Vec<f64> = seed_x.iter().cycle().take(p.dim).cloned().collect();
        let w = unflatten(&x, &levels);
        prop_assert_eq!(flatten(&w), x.clone());
        let want = meta_mse(&w, &outputs, &labels).unwrap() + pcost(&w, lambda0);
        prop_assert!((p.objective(&x) - want).abs() <= 1e-9 * (1.0 + want.abs()));
    }

    #[test]
    fn penalty_vanishes_at_unit_weights((rows, labels, levels) in meta_problem()) {
        let outputs = BaseOutputs::from_rows(&rows).unwrap();
        let ones = vec![1.0; levels.iter().sum()];
        let a = qp_assemble(&outputs, &labels, &levels, 0.0).unwrap().objective(&ones);
        let b = qp_assemble(&outputs, &labels, &levels, 5.0).unwrap().objective(&ones);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn qp_solution_is_feasible_and_permutation_invariant(
        (n, q, c) in spd_problem(),
        perm_seed in prop::collection::vec(any::<u32>(), 5),
    ) {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by_key(|&i| perm_seed[i]);
        let base = QpProblem::new(q.clone(), c.clone()).unwrap();
        let pq: Vec<f64> = (0..n * n).map(|ij| q[perm[ij / n] * n + perm[ij % n]]).collect();
        let pc: Vec<f64> = perm.iter().map(|&i| c[i]).collect();
        let permuted = QpProblem::new(pq, pc).unwrap();
        let a = solve_qp(&base, 1e-12, 1_000_000).unwrap();
        let b = solve_qp(&permuted, 1e-12, 1_000_000).unwrap();
        prop_assert!(a.x.iter().all(|&v| v >= 0.0));
        prop_assert!(a.objective <= base.objective(&vec![1.0; n]) + 1e-12);
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b.x[k] - a.x[i]).abs() <= 1e-8, "{} vs {}", b.x[k], a.x[i]);
        }
    }

    #[test]
    fn sweep_counts_shrink_as_threshold_rises(
        data in prop::collection::vec((unit(), label()), 1..200),
        mut grid in prop::collection::vec(-1.5f64..1.5, 1..20),
    ) {
        grid.sort_by(f64::total_cmp);
        let (scores, labels): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
        let rows = sweep_tradeoff(&scores, &labels, &grid, PsiWeights::default()).unwrap();
        for w in rows.windows(2) {
            prop_assert!(w[1].hit + w[1].extra <= w[0].hit + w[0].extra);
            prop_assert!(w[1].accuracy <= w[0].accuracy);
            prop_assert!(w[1].false_alarm_ratio <= w[0].false_alarm_ratio);
        }
        for (r, &theta) in rows.iter().zip(&grid) {
            let preds: Vec<f64> = scores.iter().map(|&s| if s >= theta { 1.0 } else { -1.0 }).collect();
            let direct = compute_report(&preds, &labels, PsiWeights::default()).unwrap();
            prop_assert_eq!((r.hit, r.extra, r.actual_hotspots), (direct.hit, direct.extra, direct.actual_hotspots));
        }
    }

    #[test]
    fn hits_and_misses_cover_every_hotspot(data in prop::collection::vec((label(), label()), 1..200)) {
        let (preds, labels): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
        let r = compute_report(&preds, &labels, PsiWeights::default()).unwrap();
        prop_assert!(r.hit <= r.actual_hotspots);
        prop_assert_eq!(r.hit + r.miss(), r.actual_hotspots);
        if r.actual_hotspots > 0 {
            prop_assert_eq!(r.accuracy, r.hit as f64 / r.actual_hotspots as f64);
        }
    }

    #[test]
    fn rbf_kernel_is_symmetric_and_bounded(
        a in prop::collection::vec(-3.0f64..3.0, 4),
        b in prop::collection::vec(-3.0f64..3.0, 4),
        gamma in 0.01f64..4.0,
    ) {
        let ab = rbf_kernel(&a, &b, gamma).unwrap();
        prop_assert_eq!(ab, rbf_kernel(&b, &a, gamma).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert!(ab <= 1.0);
        prop_assert_eq!(rbf_kernel(&a, &a, gamma).unwrap(), 1.0);
    }

    #[test]
    fn pattern_library_recalls_its_sources_and_is_deduplicated(
        vectors in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 9), 1..60),
        eps in 0u32..=2,
        budget in 0usize..=3,
    ) {
        let hot: Vec<CalibSample> = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| CalibSample { features: FeatureVector::new(i as u64, v.clone()), t_litho: 1.0 })
            .collect();
        let cfg = PmConfig { quant_levels: 8, match_tolerance: eps, mismatch_budget: budget };
        let lib = pm_build_library(&hot, &cfg, 9).unwrap();
        prop_assert_eq!(lib.signatures.iter().map(|s| s.source_count).sum::<usize>(), hot.len());
        for s in &hot {
            prop_assert_eq!(pm_match(&lib, &s.features).unwrap(), 1.0);
        }
        for (i, a) in lib.signatures.iter().enumerate() {
            for b in &lib.signatures[i + 1..] {
                prop_assert!(!cells_match(&a.cells, &b.cells, eps, budget));
            }
        }
    }

    #[test]
    fn labels_follow_epe_thresholds(epes in prop::collection::vec(-12.0f64..12.0, 1..100)) {
        let cfg = OracleConfig::default();
        let results: Vec<EpeResult> =
            epes.iter().enumerate().map(|(i, &epe)| EpeResult { fragment_id: i as u64, epe }).collect();
        for target in [HotspotClass::C0, HotspotClass::C1] {
            for l in label_fragments(&results, &cfg, target).unwrap() {
                let m = l.epe.abs();
                let want = if m >= cfg.epe_c0 {
                    HotspotClass::C0
                } else if m >= cfg.epe_c1 {
                    HotspotClass::C1
                } else {
                    HotspotClass::None
                };
                prop_assert_eq!(l.class, want);
                prop_assert_eq!(l.t_litho, if want == target { 1.0 } else { -1.0 });
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_layouts_respect_geometry(seed in any::<u64>(), rect_count in 1usize..30) {
        let cfg = GenConfig { width: 4000, height: 4000, rect_count, ..GenConfig::default() };
        let layout = generate_layout(seed, &cfg).unwrap();
        for (i, r) in layout.rects.iter().enumerate() {
            prop_assert!(r.x1 < r.x2 && r.y1 < r.y2 && r.x1 >= 0 && r.y1 >= 0);
            prop_assert!(r.x2 <= layout.width && r.y2 <= layout.height);
            for s in &layout.rects[i + 1..] {
                prop_assert!(!r.overlaps(s));
            }
        }
        let fragments = fragment_layout(&layout, 100).unwrap();
        for (k, r) in layout.rects.iter().enumerate() {
            let total: i64 = fragments.iter().filter(|f| f.owner == k).map(|f| f.length()).sum();
            prop_assert_eq!(total, r.perimeter());
        }
        for f in &fragments {
            prop_assert!(f.length() > 0);
            let (x, y) = f.center();
            let r = f.owner_rect;
            let on_x = x == r.x1 as f64 || x == r.x2 as f64;
            let on_y = y == r.y1 as f64 || y == r.y2 as f64;
            prop_assert!(on_x || on_y);
        }
    }

    #[test]
    fn svm_score_ignores_support_vector_order(
        points in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 2), label()), 6..30),
        probe in prop::collection::vec(-2.0f64..2.0, 2),
    ) {
        let mut samples: Vec<CalibSample> = points
            .iter()
            .enumerate()
            .map(|(i, (v, t))| CalibSample { features: FeatureVector::new(i as u64, v.clone()), t_litho: *t })
            .collect();
        samples[0].t_litho = 1.0;
        samples[1].t_litho = -1.0;
        let (model, _) = svm_train(&samples, &SvmTrainConfig::default()).unwrap();
        let mut reversed = model.clone();
        reversed.alphas.reverse();
        reversed.labels.reverse();
        reversed.support_vectors.reverse();
        let a = model.decision_value(&probe).unwrap();
        let b = reversed.decision_value(&probe).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
