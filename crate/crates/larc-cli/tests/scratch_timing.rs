//! Scratch measurements (removed before finalizing).

use larc_cli::config::{InvariantMode, Method, RunConfig, StreamConfig};
use larc_cli::runner;
use larc_cli::stream::{ClusterSpec, ScoreDistribution, SyntheticSpec};
use larc_core::kernels::{KernelFamily, KernelSpec};
use larc_core::losses::LossKind;

fn two_cluster_config(method: Method, l: f64, horizon: usize, holdout: usize) -> RunConfig {
    RunConfig {
        schema: 1,
        method,
        alpha: 0.1,
        eta1: 1.0,
        lambda: Some(1e-4),
        max_coefficients: None,
        kernel: Some(KernelSpec::new(KernelFamily::Rbf, 1.0, l).unwrap()),
        mondrian_cells: None,
        loss: LossKind::Miscoverage,
        stream: StreamConfig::Synthetic {
            spec: SyntheticSpec {
                clusters: vec![
                    ClusterSpec {
                        center: vec![-2.0],
                        covariate_spread: 0.25,
                        score_distribution: ScoreDistribution::Uniform { lo: 0.0, hi: 1.0 },
                    },
                    ClusterSpec {
                        center: vec![2.0],
                        covariate_spread: 0.25,
                        score_distribution: ScoreDistribution::Beta { a: 8.0, b: 2.0 },
                    },
                ],
                mix: vec![0.5, 0.5],
                horizon,
                seed: 20250,
            },
            holdout,
        },
        weightings: vec![],
        seed: 0,
        output_dir: None,
        invariant_mode: InvariantMode::Enforce,
        max_steps: None,
    }
}

#[test]
#[ignore]
fn timing_and_criterion5_shape() {
    for (label, cfg) in [
        ("arc", two_cluster_config(Method::Arc, 1.0, 20_000, 10_000)),
        ("larc l=0.5", two_cluster_config(Method::Larc, 0.5, 20_000, 10_000)),
    ] {
        let start = std::time::Instant::now();
        let out = runner::execute(&cfg).unwrap();
        let elapsed = start.elapsed();
        println!(
            "{label}: {:?} steps={} final_risk={:.4} per_group={:?} violations={}",
            elapsed,
            out.summary.steps,
            out.summary.final_cum_risk,
            out.holdout_eval.per_group,
            out.summary.violation_count,
        );
    }
}

#[test]
#[ignore]
fn criterion5_margin_with_imbalanced_mix() {
    for (label, mix) in [("mix 0.5/0.5", vec![0.5, 0.5]), ("mix 0.6/0.4", vec![0.6, 0.4])] {
        for (method, l) in [(Method::Arc, 1.0), (Method::Larc, 0.5)] {
            let mut cfg = two_cluster_config(method, l, 20_000, 10_000);
            if let StreamConfig::Synthetic { spec, .. } = &mut cfg.stream {
                spec.mix = mix.clone();
            }
            let out = runner::execute(&cfg).unwrap();
            println!(
                "{label} {:?}: final={:.4} per_group={:?}",
                method, out.summary.final_cum_risk, out.holdout_eval.per_group
            );
        }
    }
}

#[test]
#[ignore]
fn criterion10_seasonal_shape() {
    use larc_cli::stream::{seasonal_series, write_series_csv};
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("seasonal.csv");
    write_series_csv(&path, &seasonal_series(45_312, 77)).unwrap();

    let base = |method: Method, l: f64| RunConfig {
        schema: 1,
        method,
        alpha: 0.1,
        eta1: 1.0,
        lambda: Some(1e-4),
        max_coefficients: None,
        kernel: Some(KernelSpec::new(KernelFamily::Rbf, 1.0, l).unwrap()),
        mondrian_cells: None,
        loss: LossKind::Miscoverage,
        stream: StreamConfig::Csv {
            path: path.clone(),
            window_short: 24,
            window_long: 48,
            daily_feature_days: 7,
            domain_radius: 2.7,
        },
        weightings: vec![],
        seed: 0,
        output_dir: None,
        invariant_mode: InvariantMode::Enforce,
        max_steps: None,
    };

    for (label, cfg) in [
        ("arc", base(Method::Arc, 1.0)),
        ("larc l=0.5", base(Method::Larc, 0.5)),
        ("larc l=2", base(Method::Larc, 2.0)),
        ("larc l=10", base(Method::Larc, 10.0)),
    ] {
        let start = std::time::Instant::now();
        let out = runner::execute(&cfg).unwrap();
        let pg = &out.holdout_eval.per_group;
        let gap = (pg[&0] - pg[&1]).abs();
        println!(
            "{label}: {:?} steps={} final={:.4} coverage={:.4} weekday={:.4} weekend={:.4} gap={:.4}",
            start.elapsed(),
            out.summary.steps,
            out.summary.final_cum_risk,
            1.0 - out.summary.final_cum_risk,
            pg[&0],
            pg[&1],
            gap
        );
    }
}
