//! Numeric invariants of the threshold iterates: RKHS-norm bound, uniform
//! threshold box, flatness bound, and Gram-matrix positive semidefiniteness.

use larc_core::kernels::{KernelFamily, KernelSpec};
use larc_core::metrics;
use larc_core::threshold::{bound_box, LarcConfig, LarcState};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn config(kernel: KernelSpec, lambda: f64) -> LarcConfig {
    LarcConfig {
        alpha: 0.1,
        eta1: 1.0,
        lambda,
        loss_bound: 1.0,
        score_bound: 1.0,
        kernel,
        max_coefficients: None,
    }
}

/// Miscoverage-driven run: scores are uniform, the loss is the indicator of
/// the score exceeding the current threshold at the covariate.
fn drive_miscoverage(
    state: &mut LarcState,
    steps: usize,
    seed: u64,
    mut per_step: impl FnMut(&LarcState),
) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..steps {
        let x = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let score: f64 = rng.random_range(0.0..1.0);
        let g = state.predict_threshold(&x).unwrap();
        let loss = if score > g { 1.0 } else { 0.0 };
        state.update(&x, loss).unwrap();
        per_step(state);
    }
}

#[test]
fn rkhs_norm_bounded_along_500_step_run() {
    // kappa = 1, B = 1, lambda = 1e-4: every intermediate Gram-computed norm
    // must stay at or below B sqrt(kappa) / lambda = 1e4 (with float slack).
    let kernel = KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0).unwrap();
    let cfg = config(kernel, 1e-4);
    let bound = cfg.loss_bound * cfg.kernel.amplitude().sqrt() / cfg.lambda;
    let mut state = LarcState::new(cfg).unwrap();
    drive_miscoverage(&mut state, 500, 101, |state| {
        let norm = state.rkhs_norm().unwrap();
        assert!(norm <= bound + 1e-9, "norm {norm} above bound {bound}");
    });
}

#[test]
fn threshold_values_stay_in_bound_box() {
    let kernel = KernelSpec::new(KernelFamily::Rbf, 1.0, 0.5).unwrap();
    let cfg = config(kernel, 1e-2);
    let domain_radius = 2.0f64.sqrt(); // covariates live in [-1,1]^2
    let (g_min, g_max) = bound_box(&cfg, domain_radius);
    let probes: Vec<Vec<f64>> = (0..25)
        .map(|i| {
            let a = -1.0 + (i % 5) as f64 * 0.5;
            let b = -1.0 + (i / 5) as f64 * 0.5;
            vec![a, b]
        })
        .collect();
    let mut state = LarcState::new(cfg).unwrap();
    drive_miscoverage(&mut state, 400, 103, |state| {
        for probe in &probes {
            let g = state.predict_threshold(probe).unwrap();
            assert!(
                g >= g_min - 1e-9 && g <= g_max + 1e-9,
                "g({probe:?}) = {g} outside [{g_min}, {g_max}]"
            );
        }
    });
}

#[test]
fn kernel_part_is_flat_within_lipschitz_budget() {
    let kernel = KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0).unwrap();
    let cfg = config(kernel, 1e-2);
    let domain_radius = 2.0f64.sqrt();
    let rho = cfg.kernel.lipschitz_constant();
    let kappa = cfg.kernel.amplitude();
    let global = 2.0 * cfg.loss_bound * (rho * kappa * domain_radius).sqrt() / cfg.lambda;
    let probes: Vec<Vec<f64>> = (0..10)
        .map(|i| vec![-1.0 + (i as f64) * 0.22, 0.3])
        .collect();
    let mut state = LarcState::new(cfg).unwrap();
    drive_miscoverage(&mut state, 300, 107, |state| {
        let norm = state.rkhs_norm_tracked();
        for (i, a) in probes.iter().enumerate() {
            let fa = state.eval_f(a).unwrap();
            for b in probes.iter().skip(i + 1) {
                let fb = state.eval_f(b).unwrap();
                let gap = (fa - fb).abs();
                assert!(gap <= global + 1e-9);
                // Pairwise form through the kernel metric:
                // |f(x)-f(x')| <= ||f||_H sqrt(2 rho ||x-x'||).
                let dist = larc_core::kernels::euclidean_distance(a, b).unwrap();
                let pairwise = norm * (2.0 * rho * dist).sqrt();
                assert!(gap <= pairwise + 1e-9, "gap {gap} vs pairwise {pairwise}");
            }
        }
    });
}

#[test]
fn gram_matrices_are_positive_semidefinite() {
    let mut rng = ChaCha12Rng::seed_from_u64(109);
    for family in [KernelFamily::Rbf, KernelFamily::Cauchy, KernelFamily::Triangular] {
        let kernel = KernelSpec::new(family, 1.0, 1.3).unwrap();
        for n in [1usize, 5, 20, 50] {
            let points: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
                .collect();
            let gram = kernel.gram(&points).unwrap();
            let flat: Vec<f64> = gram.iter().flatten().copied().collect();
            let m = DMatrix::from_row_slice(n, n, &flat);
            let eigs = m.symmetric_eigenvalues();
            for e in eigs.iter() {
                assert!(*e >= -1e-9, "{family:?} n={n}: eigenvalue {e}");
            }
        }
    }
}

#[test]
fn profile_lipschitz_holds_on_dense_grid() {
    let mut rng = ChaCha12Rng::seed_from_u64(113);
    for family in [KernelFamily::Rbf, KernelFamily::Cauchy, KernelFamily::Triangular] {
        let kernel = KernelSpec::new(family, 2.0, 0.8).unwrap();
        let rho = kernel.lipschitz_constant();
        let grid: Vec<f64> = (0..10_000).map(|i| i as f64 * 6.0 / 9_999.0).collect();
        for window in grid.windows(2) {
            let gap = (kernel.eval_radial(window[0]) - kernel.eval_radial(window[1])).abs();
            assert!(gap <= rho * (window[1] - window[0]) + 1e-12);
        }
        for _ in 0..1000 {
            let z1: f64 = rng.random_range(0.0..6.0);
            let z2: f64 = rng.random_range(0.0..6.0);
            let gap = (kernel.eval_radial(z1) - kernel.eval_radial(z2)).abs();
            assert!(gap <= rho * (z1 - z2).abs() + 1e-12, "{family:?} {z1} {z2}");
        }
    }
}

#[test]
fn scalar_trajectory_bound_holds_for_arc_style_run() {
    // Long scalar run (the kappa = 0 reduction) against the closed bound at
    // every prefix; also the miscoverage-specific constant at eta1 = 1.
    use larc_core::controllers::ArcState;
    let mut rng = ChaCha12Rng::seed_from_u64(127);
    let mut arc = ArcState::new(0.1, 1.0, 1.0).unwrap();
    let mut loss_sum = 0.0;
    for t in 1..=45_312u64 {
        let score: f64 = rng.random_range(0.0..1.0);
        let loss = if score > arc.threshold { 1.0 } else { 0.0 };
        arc.update(loss).unwrap();
        loss_sum += loss;
        let deviation = (loss_sum / t as f64 - 0.1).abs();
        let generic = metrics::scalar_trajectory_bound(1.0, 1.0, 1.0, t);
        assert!(deviation <= generic + 1e-12, "t={t}: {deviation} vs {generic}");
        // (S_max + eta1 B) / sqrt(T) for the miscoverage loss at eta1 = 1.
        let miscoverage_constant = (1.0 + 1.0) / (t as f64).sqrt();
        assert!(deviation <= miscoverage_constant + 1e-12);
    }
}
