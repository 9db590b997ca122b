use std::collections::BTreeMap;

use applegrasp_core::bench::{
    evaluate, parse_structured, render_structured, render_text, report_render, run_suite, run_suite_on, timing_probe,
    Config, ConditionReport, ConditionRow, EvalThresholds, Metrics, SuiteConfig,
};
use applegrasp_core::estimators::{Estimate, Estimator, Method, PointNetEstimator};
use applegrasp_core::seeding::rng_from_seed;
use applegrasp_core::synthgen::{generate_dataset, write_dataset, Condition, GenConfig, LabeledSample};
use applegrasp_core::tinynn::{Checkpoint, RegressorConfig, RegressorModel};
use applegrasp_core::{GraspError, SphereModel, Vector3};
use rand::Rng;

fn samples(n: usize, seed: u64) -> Vec<LabeledSample> {
    generate_dataset(&GenConfig::default(), n, seed).unwrap()
}

fn exact(s: &LabeledSample) -> applegrasp_core::Result<Estimate> {
    Ok(Estimate { sphere: s.sphere, pose: Some(s.pose()) })
}

/// Estimate whose box IoU with the truth is exactly `iou`: a concentric
/// cube scaled by `iou^(1/3)`.
fn with_iou(s: &LabeledSample, iou: f64) -> applegrasp_core::Result<Estimate> {
    let sphere = SphereModel::new(s.sphere.center, s.sphere.radius * iou.cbrt()).unwrap();
    Ok(Estimate { sphere, pose: Some(s.pose()) })
}

fn small_checkpoint() -> Checkpoint {
    let cfg = RegressorConfig {
        encoder_widths: vec![8, 16],
        head_widths: vec![8, 6],
        ..RegressorConfig::default()
    };
    let model = RegressorModel::new(cfg, &mut rng_from_seed(1)).unwrap();
    Checkpoint::from_model(&model, Default::default(), Default::default(), None)
}

#[test]
fn identical_predictions_score_perfectly() {
    let truth = samples(5, 1);
    let preds: Vec<_> = truth.iter().map(exact).collect();
    let m = evaluate(&preds, &truth, &EvalThresholds::default()).unwrap();
    assert_eq!(m.shape_accuracy, 1.0);
    assert_eq!(m.grasp_success_rate, 1.0);
    assert_eq!(m.mean_orientation_error_deg, Some(0.0));
    assert_eq!(m.mean_iou, Some(1.0));
}

#[test]
fn all_rejected_means_zero_accuracy_and_absent_means() {
    let truth = samples(3, 2);
    let preds: Vec<_> = truth.iter().map(|_| Err(GraspError::InsufficientPoints { needed: 200, got: 10 })).collect();
    let m = evaluate(&preds, &truth, &EvalThresholds::default()).unwrap();
    assert_eq!(m.shape_accuracy, 0.0);
    assert_eq!((m.mean_iou, m.mean_orientation_error_deg), (None, None));
    assert_eq!(m.failures.get("insufficient_points"), Some(&3));
    assert_eq!(m.fitted, 0);
}

#[test]
fn half_above_threshold_is_half_accuracy() {
    let truth = samples(2, 3);
    let preds = vec![with_iou(&truth[0], 0.8), with_iou(&truth[1], 0.5)];
    let m = evaluate(&preds, &truth, &EvalThresholds::default()).unwrap();
    assert_eq!(m.shape_accuracy, 0.5);
    assert!((m.mean_iou.unwrap() - 0.65).abs() < 1e-12);
}

#[test]
fn misaligned_inputs_are_rejected() {
    let truth = samples(2, 4);
    let preds = vec![exact(&truth[0])];
    assert!(matches!(
        evaluate(&preds, &truth, &EvalThresholds::default()),
        Err(GraspError::LengthMismatch { left: 1, right: 2 })
    ));
}

#[test]
fn degenerate_outputs_are_counted_not_fitted() {
    let truth = samples(4, 5);
    let mut preds: Vec<_> = truth.iter().map(exact).collect();
    preds[1] = Err(GraspError::DegenerateOutput { radius: 0.001, floor: 0.01 });
    let m = evaluate(&preds, &truth, &EvalThresholds::default()).unwrap();
    assert_eq!(m.failures.get("degenerate_output"), Some(&1));
    assert_eq!(m.fitted + m.failures.values().sum::<usize>(), m.samples);
    assert_eq!(m.shape_accuracy, 0.75);
    assert_eq!(m.mean_iou, Some(1.0));
}

#[test]
fn rates_are_monotone_in_thresholds() {
    let truth = samples(60, 6);
    let mut rng = rng_from_seed(7);
    let preds: Vec<_> = truth
        .iter()
        .map(|s| {
            let d = Vector3::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01));
            let sphere = SphereModel::new(s.sphere.center + d, s.sphere.radius * rng.random_range(0.85..1.15)).unwrap();
            let theta = (s.theta + rng.random_range(-0.15..0.15)).clamp(-0.78, 0.78);
            let pose = applegrasp_core::GraspPose::new(sphere.center, theta, s.phi).unwrap();
            Ok(Estimate { sphere, pose: Some(pose) })
        })
        .collect();
    let mut last = (f64::INFINITY, -1.0);
    for k in 1..=20 {
        let th = EvalThresholds { iou: k as f64 * 0.05, orientation_deg: k as f64 * 0.75 };
        let m = evaluate(&preds, &truth, &th).unwrap();
        assert!(m.shape_accuracy <= last.0, "accuracy rose at iou {}", th.iou);
        assert!(m.orientation_success_rate >= last.1, "success fell at {} deg", th.orientation_deg);
        last = (m.shape_accuracy, m.orientation_success_rate);
    }
}

#[test]
fn full_suite_has_fifteen_rows_and_is_deterministic() {
    let data = samples(3, 8);
    let ck = small_checkpoint();
    let cfg = SuiteConfig::default();
    let run = || run_suite_on(&Method::ALL, &data, &Condition::ALL, &cfg, Some(&ck), 42).unwrap();
    let a = run();
    assert_eq!(a.rows.len(), 15);
    for r in &a.rows {
        let m = &r.metrics;
        assert_eq!(m.samples, 3);
        assert_eq!(m.fitted + m.failures.values().sum::<usize>(), m.samples);
        for v in [m.shape_accuracy, m.orientation_success_rate, m.grasp_success_rate] {
            assert!((0.0..=1.0).contains(&v));
        }
    }
    assert!(a.noise_robustness.is_some());
    let b = run();
    assert_eq!(render_structured(&a).unwrap(), render_structured(&b).unwrap());
}

#[test]
fn request_order_does_not_change_results() {
    let data = samples(2, 9);
    let cfg = SuiteConfig::default();
    let a = run_suite_on(&[Method::Ransac, Method::Hough], &data, &[Condition::Noise, Condition::Normal], &cfg, None, 3)
        .unwrap();
    let b = run_suite_on(&[Method::Hough, Method::Ransac], &data, &[Condition::Normal, Condition::Noise], &cfg, None, 3)
        .unwrap();
    assert_eq!(a, b);
}

#[test]
fn learned_method_without_checkpoint_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("test.jsonl");
    write_dataset(&samples(1, 10), &path).unwrap();
    let r = run_suite(&[Method::Pointnet], &path, &[Condition::Normal], &SuiteConfig::default(), None, 0);
    assert!(matches!(r, Err(GraspError::MissingCheckpoint)));
    let r = run_suite(&[Method::Ransac], dir.path().join("absent.jsonl"), &[Condition::Normal], &SuiteConfig::default(), None, 0);
    assert!(matches!(r, Err(GraspError::Io { .. })), "{r:?}");
}

fn row(method: Method, condition: Condition, accuracy: f64, orientation: Option<f64>) -> ConditionRow {
    ConditionRow {
        method,
        condition,
        metrics: Metrics {
            samples: 100,
            fitted: 100,
            posed: 100,
            shape_accuracy: accuracy,
            mean_iou: Some(0.9),
            mean_orientation_error_deg: orientation,
            orientation_success_rate: 0.9,
            grasp_success_rate: 0.9,
            failures: BTreeMap::new(),
        },
    }
}

#[test]
fn reference_grid_renders_verbatim() {
    let grid = [
        (Method::Pointnet, [0.94, 0.92, 0.93, 0.91, 0.89], Some([3.2, 5.4, 4.6, 4.8, 5.5])),
        (Method::Ransac, [0.82, 0.71, 0.81, 0.74, 0.61], None),
        (Method::Hough, [0.81, 0.67, 0.79, 0.73, 0.63], None),
    ];
    let mut report = ConditionReport::empty(0, SuiteConfig::default());
    for (m, acc, orient) in grid {
        for (k, c) in Condition::ALL.into_iter().enumerate() {
            report.rows.push(row(m, c, acc[k], orient.map(|o| o[k])));
        }
    }
    let text = render_text(&report);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Shape accuracy (IoU3D >= 0.750)");
    let header: Vec<&str> = lines[1].split_whitespace().collect();
    assert_eq!(header, ["method", "normal", "noise", "outlier", "dense_clutter", "combined"]);
    let cells = |l: &str| l.split_whitespace().map(String::from).collect::<Vec<_>>();
    assert_eq!(cells(lines[2]), ["pointnet", "0.940", "0.920", "0.930", "0.910", "0.890"]);
    assert_eq!(cells(lines[3]), ["ransac", "0.820", "0.710", "0.810", "0.740", "0.610"]);
    assert_eq!(cells(lines[4]), ["hough", "0.810", "0.670", "0.790", "0.730", "0.630"]);
    let orient = lines.iter().position(|l| l.starts_with("Mean grasp orientation")).unwrap();
    assert_eq!(cells(lines[orient + 2]), ["pointnet", "3.200", "5.400", "4.600", "4.800", "5.500"]);
    assert_eq!(cells(lines[orient + 3]), ["ransac", "-", "-", "-", "-", "-"]);
}

#[test]
fn empty_report_renders_headers_only() {
    let report = ConditionReport::empty(5, SuiteConfig::default());
    let text = render_text(&report);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Shape accuracy (IoU3D >= 0.750)");
    assert_eq!(lines[1], "method");
    assert_eq!(lines[2], "");
    assert_eq!(*lines.last().unwrap(), "seed 5");
    let accounting = lines.iter().position(|l| l.starts_with("Sample accounting")).unwrap();
    assert_eq!(lines[accounting + 1].split_whitespace().collect::<Vec<_>>(), ["method", "condition", "samples", "fitted", "posed"]);
    assert_eq!(lines[accounting + 2], "");
    assert!(!text.contains("Accuracy drop"));
}

#[test]
fn text_and_structured_agree_after_rounding() {
    let data = samples(3, 11);
    let report = run_suite_on(&[Method::Ransac], &data, &[Condition::Normal, Condition::Outlier], &SuiteConfig::default(), None, 1)
        .unwrap();
    let structured = report_render(&report, "structured").unwrap();
    let back = parse_structured(&structured).unwrap();
    assert_eq!(back, report);
    let text = report_render(&back, "text").unwrap();
    let acc_line = text.lines().nth(2).unwrap();
    let expected: Vec<String> = std::iter::once("ransac".to_string())
        .chain(back.rows.iter().map(|r| format!("{:.3}", r.metrics.shape_accuracy)))
        .collect();
    assert_eq!(acc_line.split_whitespace().collect::<Vec<_>>(), expected);
    assert!(matches!(report_render(&report, "yaml"), Err(GraspError::UnknownFormat(_))));
}

#[test]
fn timing_rejects_zero_repetitions_and_counts_measurements() {
    let data = samples(3, 12);
    let est = Estimator::PointNet(PointNetEstimator::from_checkpoint(&small_checkpoint()).unwrap());
    assert!(timing_probe(&est, &data, 0).is_err());
    assert!(timing_probe(&est, &[], 2).is_err());
    let t = timing_probe(&est, &data, 2).unwrap();
    assert_eq!((t.full.count, t.preprocess.count), (6, 6));
    assert!(t.preprocess.median <= t.full.median);
    assert!(t.full.median <= t.full.p95);
}

#[test]
fn config_roundtrips_through_toml() {
    let cfg = Config::default();
    assert_eq!(Config::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    let partial = Config::from_toml("[suite.thresholds]\niou = 0.5\n").unwrap();
    assert_eq!(partial.suite.thresholds.iou, 0.5);
    assert_eq!(partial.suite.thresholds.orientation_deg, 8.0);
    assert!(Config::from_toml("[suite]\nbogus = 1\n").is_err());
    assert!(Config::from_toml("[suite.hough]\ncentre_bin = 0.01\n").is_err());
}
