//! Online enforcement of the risk-control invariants.
//!
//! A monitor rides along a calibration run and checks, after every update,
//! the quantities the theory pins down:
//!
//! 1. trajectory: `|L̄(T) − α|` against the deterministic bound;
//! 2. RKHS norm: `‖f_t‖_H ≤ B√κ/λ`;
//! 3. threshold range: `g_t` inside `[G_min, G_max]` on a probe grid;
//! 4. flatness: `|f_t(x) − f_t(x')| ≤ 2B√(ρκD)/λ` over probe pairs.
//!
//! Probe values of `f_t` are maintained incrementally from the update deltas
//! (O(probes) kernel evaluations per step), so monitoring a long run costs a
//! small constant factor over the run itself.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{scalar_trajectory_bound, theorem2_bound};
use crate::threshold::{bound_box, LarcConfig, LarcState, UpdateDelta};

/// Absolute slack granted to the norm/range/flatness checks for float error.
pub const NUMERIC_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvariantKind {
    Trajectory,
    RkhsNorm,
    ThresholdRange,
    Flatness,
}

/// One violated invariant, with the offending value and its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub step: u64,
    pub kind: InvariantKind,
    pub value: f64,
    pub bound: f64,
}

impl Violation {
    pub fn describe(&self) -> String {
        alloc::format!(
            "step {}: {:?} invariant violated: value {} exceeds bound {}",
            self.step,
            self.kind,
            self.value,
            self.bound
        )
    }
}

/// Monitor for an L-ARC run.
pub struct LarcMonitor {
    alpha: f64,
    rkhs_bound: f64,
    g_min: f64,
    g_max: f64,
    flatness_bound: f64,
    /// Precomputed `√T`-coefficient of the trajectory bound.
    transient: f64,
    asymptotic_gap: f64,
    probes: Vec<Vec<f64>>,
    probe_f: Vec<f64>,
    kernel: crate::kernels::KernelSpec,
    loss_sum: f64,
}

impl LarcMonitor {
    /// `domain_radius` must dominate the covariate norms of the stream the
    /// run will see; `probes` should lie inside that ball.
    pub fn new(config: &LarcConfig, domain_radius: f64, probes: Vec<Vec<f64>>) -> Self {
        let (g_min, g_max) = bound_box(config, domain_radius);
        let kappa = config.kernel.amplitude();
        let rho = config.kernel.lipschitz_constant();
        let b = config.loss_bound;
        let bound_at_1 = theorem2_bound(config, domain_radius, 1);
        let asymptotic_gap = kappa * b;
        LarcMonitor {
            alpha: config.alpha,
            rkhs_bound: b * crate::math::sqrt(kappa) / config.lambda,
            g_min,
            g_max,
            flatness_bound: 2.0 * b * crate::math::sqrt(rho * kappa * domain_radius)
                / config.lambda,
            transient: bound_at_1 - asymptotic_gap,
            asymptotic_gap,
            probe_f: alloc::vec![0.0; probes.len()],
            probes,
            kernel: config.kernel,
            loss_sum: 0.0,
        }
    }

    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.rkhs_bound, self.g_min, self.g_max, self.flatness_bound)
    }

    /// Trajectory bound value at horizon `t`.
    pub fn trajectory_bound(&self, t: u64) -> f64 {
        self.transient / crate::math::sqrt(t as f64) + self.asymptotic_gap
    }

    /// Ingest one completed update and report any violated invariants.
    pub fn record_step(
        &mut self,
        x_t: &[f64],
        loss: f64,
        delta: &UpdateDelta,
        state: &LarcState,
    ) -> Result<Vec<Violation>> {
        // Advance the cached probe evaluations of f to the post-update state.
        for (probe, value) in self.probes.iter().zip(self.probe_f.iter_mut()) {
            let mut v = delta.decay * *value;
            if let Some((dropped_x, dropped_coeff)) = &delta.dropped {
                v -= dropped_coeff * self.kernel.eval(dropped_x, probe)?;
            }
            v += delta.new_coeff * self.kernel.eval(x_t, probe)?;
            *value = v;
        }
        self.loss_sum += loss;

        let t = delta.step;
        let mut violations = Vec::new();

        let deviation = (self.loss_sum / t as f64 - self.alpha).abs();
        let trajectory_bound = self.trajectory_bound(t);
        if deviation > trajectory_bound + 1e-12 {
            violations.push(Violation {
                step: t,
                kind: InvariantKind::Trajectory,
                value: deviation,
                bound: trajectory_bound,
            });
        }

        let norm = state.rkhs_norm_tracked();
        if norm > self.rkhs_bound + NUMERIC_TOLERANCE {
            violations.push(Violation {
                step: t,
                kind: InvariantKind::RkhsNorm,
                value: norm,
                bound: self.rkhs_bound,
            });
        }

        let constant = state.constant();
        let mut f_lo = f64::INFINITY;
        let mut f_hi = f64::NEG_INFINITY;
        for &f in &self.probe_f {
            f_lo = f_lo.min(f);
            f_hi = f_hi.max(f);
            let g = f + constant;
            if g > self.g_max + NUMERIC_TOLERANCE || g < self.g_min - NUMERIC_TOLERANCE {
                violations.push(Violation {
                    step: t,
                    kind: InvariantKind::ThresholdRange,
                    value: g,
                    bound: if g > self.g_max { self.g_max } else { self.g_min },
                });
                break;
            }
        }
        if !self.probe_f.is_empty() && f_hi - f_lo > self.flatness_bound + NUMERIC_TOLERANCE {
            violations.push(Violation {
                step: t,
                kind: InvariantKind::Flatness,
                value: f_hi - f_lo,
                bound: self.flatness_bound,
            });
        }

        Ok(violations)
    }

    /// Current probe evaluations of `f_t` (test hook).
    pub fn probe_values(&self) -> &[f64] {
        &self.probe_f
    }
}

/// Monitor for a scalar-threshold run (ARC, or one Mondrian cell): only the
/// trajectory bound applies.
pub struct ScalarMonitor {
    alpha: f64,
    transient: f64,
    loss_sum: f64,
    steps: u64,
}

impl ScalarMonitor {
    pub fn new(alpha: f64, score_bound: f64, eta1: f64, loss_bound: f64) -> Self {
        ScalarMonitor {
            alpha,
            transient: scalar_trajectory_bound(score_bound, eta1, loss_bound, 1),
            loss_sum: 0.0,
            steps: 0,
        }
    }

    pub fn trajectory_bound(&self, t: u64) -> f64 {
        self.transient / crate::math::sqrt(t as f64)
    }

    pub fn record_step(&mut self, loss: f64) -> Option<Violation> {
        self.loss_sum += loss;
        self.steps += 1;
        let deviation = (self.loss_sum / self.steps as f64 - self.alpha).abs();
        let bound = self.trajectory_bound(self.steps);
        if deviation > bound + 1e-12 {
            Some(Violation {
                step: self.steps,
                kind: InvariantKind::Trajectory,
                value: deviation,
                bound,
            })
        } else {
            None
        }
    }
}
