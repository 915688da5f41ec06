//! Risk accounting: cumulative-risk trajectories, the deterministic
//! trajectory bound, and localized/group-conditional hold-out risk.
//!
//! The deterministic guarantee bounds how far the running mean loss can sit
//! from the target at any horizon:
//!
//! ```text
//! |L̄(T) − α| ≤ (1/√T) (S_max/η₁ + 4B√(ρκD)/(η₁λ) + 2B(2κ+1)) + κB
//! ```
//!
//! for covariates inside the ball of radius `D`. At `κ = 0` the asymptotic
//! gap vanishes and the rate reduces to the scalar-threshold one.
//!
//! The statistical guarantee concerns the time-averaged threshold `ḡ_T` and a
//! non-negative weighting function `w = f_w + c_w` with positive mean: the
//! `w`-reweighted hold-out risk converges below `α + κB‖f_w‖_H / E[w]`. The
//! gap is zero for constant weightings (marginal risk) and grows with how
//! localized `w` is.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::StreamEvent;
use crate::kernels::KernelSpec;
use crate::losses::{self, LossKind};
use crate::math;
use crate::threshold::LarcConfig;

/// Per-step log entry of a calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub threshold_at_x: f64,
    pub loss: f64,
    pub eta: f64,
    pub group: u32,
}

/// A calibration trajectory: step records with `t` strictly increasing
/// from 1 and losses inside `[0, B]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub steps: Vec<StepRecord>,
}

impl RunRecord {
    pub fn validate(&self, loss_bound: f64) -> Result<()> {
        for (i, step) in self.steps.iter().enumerate() {
            if step.t != i as u64 + 1 {
                return Err(Error::InvalidConfig(
                    "step indices must increase from 1".into(),
                ));
            }
            if step.loss < 0.0 || step.loss > loss_bound {
                return Err(Error::LossOutOfRange {
                    loss: step.loss,
                    bound: loss_bound,
                });
            }
        }
        Ok(())
    }

    /// Prefix means `L̄(T) = (1/T) Σ_{t ≤ T} L_t` for every `T`.
    pub fn cumulative_risk(&self) -> Vec<f64> {
        cumulative_risk(self.steps.iter().map(|s| s.loss))
    }
}

/// Prefix means of a loss sequence.
pub fn cumulative_risk(losses: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut sum = 0.0;
    for (i, loss) in losses.into_iter().enumerate() {
        sum += loss;
        out.push(sum / (i as f64 + 1.0));
    }
    out
}

/// Deterministic trajectory bound at horizon `T` (see module docs).
pub fn theorem2_bound(config: &LarcConfig, domain_radius: f64, t: u64) -> f64 {
    let kappa = config.kernel.amplitude();
    let rho = config.kernel.lipschitz_constant();
    let b = config.loss_bound;
    let transient = config.score_bound / config.eta1
        + 4.0 * b * math::sqrt(rho * kappa * domain_radius) / (config.eta1 * config.lambda)
        + 2.0 * b * (2.0 * kappa + 1.0);
    transient / math::sqrt(t as f64) + kappa * b
}

/// Trajectory bound for a scalar (zero-amplitude) threshold at horizon `T`:
/// `(S_max/η₁ + 2B) / √T`. Valid for any `η₁ > 0`.
pub fn scalar_trajectory_bound(score_bound: f64, eta1: f64, loss_bound: f64, t: u64) -> f64 {
    (score_bound / eta1 + 2.0 * loss_bound) / math::sqrt(t as f64)
}

/// A kernel-expansion weighting function `w(x) = Σ_i β_i k(c_i, x) + c_w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Vec<f64>,
    pub beta: f64,
}

/// Weighting function defining a localized risk target. Must be non-negative
/// with positive mean on the evaluation sample; [`WeightingFn::validate_on`]
/// checks both empirically.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightingFn {
    pub bumps: Vec<Bump>,
    pub constant: f64,
    pub kernel: KernelSpec,
}

impl WeightingFn {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut w = self.constant;
        for bump in &self.bumps {
            w += bump.beta * self.kernel.eval(&bump.center, x)?;
        }
        Ok(w)
    }

    /// RKHS norm of the kernel part, `‖f_w‖_H = √(βᵀ K β)` over the bump
    /// centers; zero when there are no bumps.
    pub fn f_norm(&self) -> Result<f64> {
        if self.bumps.is_empty() {
            return Ok(0.0);
        }
        let centers: Vec<Vec<f64>> = self.bumps.iter().map(|b| b.center.clone()).collect();
        let gram = self.kernel.gram(&centers)?;
        let mut quad = 0.0;
        for (i, row) in gram.iter().enumerate() {
            for (j, kij) in row.iter().enumerate() {
                quad += self.bumps[i].beta * kij * self.bumps[j].beta;
            }
        }
        if quad < -1e-12 {
            return Err(Error::IndefiniteGram(quad));
        }
        Ok(math::sqrt(quad.max(0.0)))
    }

    /// Empirical check that `w ≥ 0` on the sample and its mean is positive.
    pub fn validate_on(&self, sample: &[StreamEvent]) -> Result<()> {
        if sample.is_empty() {
            return Err(Error::EmptyInput("weighting validation sample"));
        }
        let mut sum = 0.0;
        for ev in sample {
            let w = self.eval(&ev.x)?;
            if w < 0.0 {
                return Err(Error::InvalidConfig(
                    "weighting function is negative on the sample".into(),
                ));
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(Error::NonPositiveWeight(sum));
        }
        Ok(())
    }
}

/// Empirical localized risk `Σ w(x_i) L_i / Σ w(x_i)` of a threshold
/// predictor over a hold-out sample.
pub fn localized_risk<P>(
    holdout: &[StreamEvent],
    mut predictor: P,
    kind: LossKind,
    score_bound: f64,
    w: &WeightingFn,
) -> Result<f64>
where
    P: FnMut(&[f64]) -> Result<f64>,
{
    let mut weighted = 0.0;
    let mut total = 0.0;
    for ev in holdout {
        let weight = w.eval(&ev.x)?;
        let threshold = predictor(&ev.x)?;
        let outcome = losses::evaluate(kind, &ev.scores, ev.truth.as_deref(), threshold, score_bound)?;
        weighted += weight * outcome.loss;
        total += weight;
    }
    if total <= 0.0 {
        return Err(Error::NonPositiveWeight(total));
    }
    Ok(weighted / total)
}

/// Localization gap `κ B ‖f_w‖_H / mean(w)` with the mean taken empirically
/// over the hold-out sample. Constant weightings have zero gap.
pub fn theorem1_gap(w: &WeightingFn, holdout: &[StreamEvent], loss_bound: f64) -> Result<f64> {
    if holdout.is_empty() {
        return Err(Error::EmptyInput("hold-out sample"));
    }
    let f_norm = w.f_norm()?;
    if f_norm == 0.0 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for ev in holdout {
        sum += w.eval(&ev.x)?;
    }
    let mean = sum / holdout.len() as f64;
    if mean <= 0.0 {
        return Err(Error::NonPositiveWeight(mean));
    }
    Ok(w.kernel.amplitude() * loss_bound * f_norm / mean)
}

/// Per-group mean hold-out loss of a threshold predictor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroupRisks {
    /// Group tag → (mean loss, sample count), ordered by tag.
    pub risks: alloc::collections::BTreeMap<u32, (f64, usize)>,
    /// Requested groups that had no hold-out sample and were omitted.
    pub empty_groups: Vec<u32>,
}

/// Mean loss per subpopulation tag. Groups listed in `expected` but absent
/// from the hold-out are flagged in `empty_groups` rather than failing.
pub fn group_conditional_risk<P>(
    holdout: &[StreamEvent],
    mut predictor: P,
    kind: LossKind,
    score_bound: f64,
    expected: Option<&[u32]>,
) -> Result<GroupRisks>
where
    P: FnMut(&[f64]) -> Result<f64>,
{
    let mut sums: alloc::collections::BTreeMap<u32, (f64, usize)> =
        alloc::collections::BTreeMap::new();
    for ev in holdout {
        let threshold = predictor(&ev.x)?;
        let outcome = losses::evaluate(kind, &ev.scores, ev.truth.as_deref(), threshold, score_bound)?;
        let entry = sums.entry(ev.group).or_insert((0.0, 0));
        entry.0 += outcome.loss;
        entry.1 += 1;
    }
    let mut out = GroupRisks::default();
    for (group, (sum, count)) in sums {
        out.risks.insert(group, (sum / count as f64, count));
    }
    if let Some(expected) = expected {
        for g in expected {
            if !out.risks.contains_key(g) {
                out.empty_groups.push(*g);
            }
        }
    }
    Ok(out)
}
