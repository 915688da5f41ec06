//! The L-ARC threshold model: a kernel expansion updated online.
//!
//! L-ARC keeps a threshold *function* `g_t(·) = f_t(·) + c_t`, with `f_t` in
//! the RKHS of a stationary kernel and `c_t` a scalar offset. Starting from
//! `f_1 = 0`, `c_1 = 0`, each observed covariate `x_t` with loss `L_t` applies
//!
//! ```text
//! c_{t+1} = c_t + η_t (L_t − α)
//! f_{t+1} = (1 − λ η_t) f_t + η_t (L_t − α) k(x_t, ·)
//! ```
//!
//! with learning rate `η_t = η₁ t^{−1/2}` and regularization `λ`. In
//! coefficient form `g_{t+1}(·) = Σ_i a^i_{t+1} k(X_i, ·) + c_{t+1}` where the
//! newest coefficient is `a^t_{t+1} = η_t (L_t − α)` and every older one is
//! scaled by `(1 − η_t λ)`. A loss above target therefore raises the threshold
//! (and enlarges future sets) around `x_t` while slightly lowering it
//! elsewhere.
//!
//! Two facts about the iterates are enforced as runtime invariants elsewhere:
//! `‖f_t‖_H ≤ B√κ/λ` at every step, and `g_t` stays inside the box computed by
//! [`bound_box`]. The state also maintains running sums so that the
//! time-averaged threshold `ḡ_T = (1/T) Σ_{t≤T} g_t` — the object carrying the
//! localized statistical guarantee — is available in O(support) time.
//!
//! Memory grows linearly in `t` unless `max_coefficients` caps the expansion,
//! in which case the oldest support point is dropped before each append. The
//! oldest coefficients are geometrically damped, so they contribute least.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::math;

/// Learning rate `η_t = η₁ t^{−1/2}` for step `t ≥ 1`.
#[inline]
pub fn learning_rate(eta1: f64, t: u64) -> f64 {
    eta1 / math::sqrt(t as f64)
}

/// Hyperparameters of the L-ARC update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LarcConfig {
    /// Target risk level `α ∈ (0, 1)`.
    pub alpha: f64,
    /// Learning-rate scale `η₁` (the first step size).
    pub eta1: f64,
    /// Regularization `λ > 0`; must satisfy `η₁ λ < 1` so that `η_t < 1/λ`
    /// holds for every `t` (the constraint is tightest at `t = 1`).
    pub lambda: f64,
    /// Loss bound `B`.
    pub loss_bound: f64,
    /// Score bound `S_max`.
    pub score_bound: f64,
    pub kernel: KernelSpec,
    /// Optional coefficient budget `M_max`; `None` keeps the full expansion.
    #[serde(default)]
    pub max_coefficients: Option<usize>,
}

impl LarcConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        for (name, v) in [
            ("alpha", self.alpha),
            ("eta1", self.eta1),
            ("lambda", self.lambda),
            ("loss_bound", self.loss_bound),
            ("score_bound", self.score_bound),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.eta1 <= 0.0 || self.lambda <= 0.0 {
            return Err(Error::InvalidConfig(
                "eta1 and lambda must be positive".into(),
            ));
        }
        if self.eta1 * self.lambda >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "eta1 * lambda = {} violates eta_t < 1/lambda",
                self.eta1 * self.lambda
            )));
        }
        if self.loss_bound < self.alpha {
            return Err(Error::InvalidConfig(format!(
                "loss bound {} is below alpha {}",
                self.loss_bound, self.alpha
            )));
        }
        if self.score_bound <= 0.0 {
            return Err(Error::InvalidConfig("score_bound must be positive".into()));
        }
        if let Some(m) = self.max_coefficients {
            if m == 0 {
                return Err(Error::InvalidConfig(
                    "max_coefficients must be at least 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// What a single update did; enough for an external observer to replay the
/// effect on cached function evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDelta {
    /// The step index `t` just completed (1-based).
    pub step: u64,
    /// Learning rate `η_t` used.
    pub eta: f64,
    /// Coefficient decay `1 − η_t λ` applied to pre-existing coefficients.
    pub decay: f64,
    /// Coefficient attached to the new support point, `η_t (L_t − α)`.
    pub new_coeff: f64,
    /// Support point evicted by the coefficient budget, with its coefficient
    /// *after* this step's decay was applied.
    pub dropped: Option<(Vec<f64>, f64)>,
}

/// Serialized snapshot of an [`LarcState`] (checkpoint/resume wire format).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSnapshot {
    pub step: u64,
    pub constant: f64,
    pub support: Vec<Vec<f64>>,
    pub coeffs: Vec<f64>,
    pub avg_coeff_sums: Vec<f64>,
    pub avg_constant_sum: f64,
}

/// The L-ARC threshold function and its running time-average sums.
///
/// Single-writer: [`update`](Self::update) is strictly sequential. Reads
/// ([`predict_threshold`](Self::predict_threshold), …) take `&self` and may
/// run concurrently while no update is in flight.
#[derive(Debug, Clone)]
pub struct LarcState {
    config: LarcConfig,
    support: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    constant: f64,
    /// Per support point, `Σ_{τ ≤ t} a^i_τ` over the functions `g_1 .. g_t`.
    avg_coeff_sums: Vec<f64>,
    /// `Σ_{τ ≤ t} c_τ` over the functions `g_1 .. g_t`.
    avg_constant_sum: f64,
    step: u64,
    /// Incrementally tracked `‖f_t‖²_H`; cross-checked against the Gram form.
    fnorm_sq: f64,
}

impl LarcState {
    /// Fresh state: `f_1 = 0`, `c_1 = 0`; the threshold is identically zero.
    pub fn new(config: LarcConfig) -> Result<Self> {
        config.validate()?;
        Ok(LarcState {
            config,
            support: Vec::new(),
            coeffs: Vec::new(),
            constant: 0.0,
            avg_coeff_sums: Vec::new(),
            avg_constant_sum: 0.0,
            step: 0,
            fnorm_sq: 0.0,
        })
    }

    pub fn config(&self) -> &LarcConfig {
        &self.config
    }

    /// Number of updates performed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// The scalar component `c_t`.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Kernel part `f_t(x) = Σ_i a^i_t k(X_i, x)`.
    pub fn eval_f(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (point, coeff) in self.support.iter().zip(self.coeffs.iter()) {
            acc += coeff * self.config.kernel.eval(point, x)?;
        }
        Ok(acc)
    }

    /// Threshold `g_t(x) = f_t(x) + c_t`.
    pub fn predict_threshold(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_f(x)? + self.constant)
    }

    /// Time-averaged threshold `ḡ_T(x) = (1/T) Σ_{t ≤ T} g_t(x)` with
    /// `T = step()`.
    ///
    /// `g_1 ≡ 0` is included in the average: the sums accumulate each `g_t`
    /// as it stood when it produced the step-`t` prediction, i.e. before the
    /// step-`t` update folded in. Under a coefficient budget the sums of
    /// evicted points are discarded with them, so the average is that of the
    /// truncated model only.
    pub fn averaged_threshold(&self, x: &[f64]) -> Result<f64> {
        if self.step == 0 {
            return Err(Error::AverageUndefined);
        }
        let mut acc = self.avg_constant_sum;
        for (point, sum) in self.support.iter().zip(self.avg_coeff_sums.iter()) {
            acc += sum * self.config.kernel.eval(point, x)?;
        }
        Ok(acc / self.step as f64)
    }

    /// One online step: observe covariate `x_t` and realized loss `L_t`.
    ///
    /// Applies the decay/append recursion above, keeping the time-average
    /// sums and the tracked RKHS norm in sync. When the coefficient budget is
    /// full, the oldest support point is dropped before the append.
    pub fn update(&mut self, x: &[f64], loss: f64) -> Result<UpdateDelta> {
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        if loss < 0.0 || loss > self.config.loss_bound {
            return Err(Error::LossOutOfRange {
                loss,
                bound: self.config.loss_bound,
            });
        }
        if let Some(first) = self.support.first() {
            if first.len() != x.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: x.len(),
                });
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariate"));
        }

        let t = self.step + 1;
        let eta = learning_rate(self.config.eta1, t);
        let decay = 1.0 - eta * self.config.lambda;
        let new_coeff = eta * (loss - self.config.alpha);
        let kappa = self.config.kernel.amplitude();

        // f_t(x_t) before any mutation; used by the norm recursion.
        let f_at_x = self.eval_f(x)?;

        // Fold the pre-update function g_t into the time-average sums.
        self.avg_constant_sum += self.constant;
        for (sum, coeff) in self.avg_coeff_sums.iter_mut().zip(self.coeffs.iter()) {
            *sum += *coeff;
        }

        // Decay existing coefficients and shift the constant.
        for coeff in self.coeffs.iter_mut() {
            *coeff *= decay;
        }
        self.constant += eta * (loss - self.config.alpha);

        // ‖(1−ηλ) f_t‖² = (1−ηλ)² ‖f_t‖².
        self.fnorm_sq *= decay * decay;
        let mut f_scaled_at_x = decay * f_at_x;

        // Budget eviction happens before the append so the support never
        // exceeds max_coefficients.
        let mut dropped = None;
        if let Some(budget) = self.config.max_coefficients {
            if self.support.len() >= budget {
                let old_point = self.support.remove(0);
                let old_coeff = self.coeffs.remove(0);
                self.avg_coeff_sums.remove(0);
                // Decayed f at the evicted point, evicted term included:
                // the remaining expansion plus old_coeff * k(X_old, X_old).
                let f_scaled_at_old = self.eval_f(&old_point)? + old_coeff * kappa;
                // ‖f − a k(X, ·)‖² = ‖f‖² − 2a f(X) + a² κ.
                self.fnorm_sq += -2.0 * old_coeff * f_scaled_at_old + old_coeff * old_coeff * kappa;
                f_scaled_at_x -= old_coeff * self.config.kernel.eval(&old_point, x)?;
                dropped = Some((old_point, old_coeff));
            }
        }

        // ‖f + a k(x, ·)‖² = ‖f‖² + 2a f(x) + a² κ.
        self.fnorm_sq += 2.0 * new_coeff * f_scaled_at_x + new_coeff * new_coeff * kappa;

        self.support.push(x.to_vec());
        self.coeffs.push(new_coeff);
        self.avg_coeff_sums.push(0.0);
        self.step = t;

        Ok(UpdateDelta {
            step: t,
            eta,
            decay,
            new_coeff,
            dropped,
        })
    }

    /// RKHS norm `‖f_t‖_H = √(aᵀ K a)` computed from the Gram matrix.
    ///
    /// This is the definitional (quadratic-cost) route; it errors if the
    /// quadratic form comes out negative beyond numerical tolerance. For the
    /// O(1)-per-step tracked value see [`rkhs_norm_tracked`](Self::rkhs_norm_tracked).
    pub fn rkhs_norm(&self) -> Result<f64> {
        if self.support.is_empty() {
            return Ok(0.0);
        }
        let gram = self.config.kernel.gram(&self.support)?;
        let mut quad = 0.0;
        for (i, row) in gram.iter().enumerate() {
            for (j, kij) in row.iter().enumerate() {
                quad += self.coeffs[i] * kij * self.coeffs[j];
            }
        }
        let scale: f64 = self
            .coeffs
            .iter()
            .map(|a| a * a * self.config.kernel.amplitude())
            .sum();
        if quad < -1e-9 * scale.max(1.0) {
            return Err(Error::IndefiniteGram(quad));
        }
        Ok(math::sqrt(quad.max(0.0)))
    }

    /// Incrementally maintained `‖f_t‖_H` (exact up to float roundoff).
    pub fn rkhs_norm_tracked(&self) -> f64 {
        math::sqrt(self.fnorm_sq.max(0.0))
    }

    /// Snapshot for serialization; [`from_snapshot`](Self::from_snapshot)
    /// restores it.
    pub fn snapshot(&self) -> ThresholdSnapshot {
        ThresholdSnapshot {
            step: self.step,
            constant: self.constant,
            support: self.support.clone(),
            coeffs: self.coeffs.clone(),
            avg_coeff_sums: self.avg_coeff_sums.clone(),
            avg_constant_sum: self.avg_constant_sum,
        }
    }

    /// Restore a state from a snapshot; the tracked RKHS norm is recomputed
    /// from the Gram matrix.
    pub fn from_snapshot(config: LarcConfig, snapshot: ThresholdSnapshot) -> Result<Self> {
        config.validate()?;
        let n = snapshot.support.len();
        if snapshot.coeffs.len() != n || snapshot.avg_coeff_sums.len() != n {
            return Err(Error::InvalidConfig(
                "snapshot arrays have inconsistent lengths".into(),
            ));
        }
        if n as u64 > snapshot.step {
            return Err(Error::InvalidConfig(
                "snapshot has more support points than steps".into(),
            ));
        }
        let mut state = LarcState {
            config,
            support: snapshot.support,
            coeffs: snapshot.coeffs,
            constant: snapshot.constant,
            avg_coeff_sums: snapshot.avg_coeff_sums,
            avg_constant_sum: snapshot.avg_constant_sum,
            step: snapshot.step,
            fnorm_sq: 0.0,
        };
        let norm = state.rkhs_norm()?;
        state.fnorm_sq = norm * norm;
        Ok(state)
    }
}

/// Uniform box `[G_min, G_max]` that every threshold value `g_t(x)` respects
/// for covariates inside the ball of radius `domain_radius`:
///
/// ```text
/// G_max = S_max + 2B√(ρκD)/λ + η₁ B (2κ + 1)
/// G_min = −2B√(ρκD)/λ − η₁ B (2κ + 1)
/// ```
pub fn bound_box(config: &LarcConfig, domain_radius: f64) -> (f64, f64) {
    let rho = config.kernel.lipschitz_constant();
    let kappa = config.kernel.amplitude();
    let b = config.loss_bound;
    let spread = 2.0 * b * math::sqrt(rho * kappa * domain_radius) / config.lambda;
    let step_term = config.eta1 * b * (2.0 * kappa + 1.0);
    (
        -spread - step_term,
        config.score_bound + spread + step_term,
    )
}
