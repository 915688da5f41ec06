//! Prediction-set construction and the bounded monotone losses.
//!
//! Everything funnels through one set rule: keep candidate `i` iff
//! `scores[i] ≤ threshold` (closed inequality). Tasks whose natural rule is
//! "keep if value *exceeds* the threshold" — beam SNR predictions, classifier
//! probabilities — are mapped onto it by the affine flip
//! [`value_set_to_score_set`], which keeps the update sign uniform: a high
//! loss raises the threshold, which must always enlarge the set.
//!
//! All three losses are bounded by `B = 1` and non-increasing when the kept
//! set grows, which is exactly what the risk-control updates require.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which loss the run optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1{score of the true label > threshold}`.
    Miscoverage,
    /// False-negative ratio `1 − |kept ∩ truth| / |truth|`.
    Fnr,
    /// Best-in-set ratio regret `1 − max_{kept} value / max value`.
    BestRatioRegret,
}

/// Loss selection plus its bounds (`B`, `S_max`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub bound: f64,
    pub score_bound: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, score_bound: f64) -> Result<Self> {
        if !(score_bound.is_finite() && score_bound > 0.0) {
            return Err(Error::InvalidConfig("score_bound must be positive".into()));
        }
        // The three supported losses are all ratios or indicators: B = 1.
        Ok(LossSpec {
            kind,
            bound: 1.0,
            score_bound,
        })
    }
}

/// A constructed prediction set and its realized loss.
#[derive(Debug, Clone, PartialEq)]
pub struct SetOutcome {
    pub kept: Vec<usize>,
    pub loss: f64,
}

/// Indices with `scores[i] ≤ threshold`. Errors on non-finite scores.
pub fn build_set(scores: &[f64], threshold: f64) -> Result<Vec<usize>> {
    let mut kept = Vec::new();
    for (i, s) in scores.iter().enumerate() {
        if !s.is_finite() {
            return Err(Error::NonFinite("score"));
        }
        if *s <= threshold {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Miscoverage: 1 if the true label's score exceeds the threshold, else 0.
/// The boundary is covered (set membership uses `≤`).
#[inline]
pub fn miscoverage(score_of_truth: f64, threshold: f64) -> f64 {
    if score_of_truth > threshold {
        1.0
    } else {
        0.0
    }
}

/// False-negative ratio `1 − |kept ∩ truth| / |truth|`.
///
/// `truth` must be nonempty — the ratio is undefined otherwise and this
/// fails loudly rather than picking a convention.
pub fn fnr(kept: &[usize], truth: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    let hit = truth.iter().filter(|t| kept.contains(t)).count();
    Ok(1.0 - hit as f64 / truth.len() as f64)
}

/// Best-in-set ratio regret `1 − max_{i ∈ kept} values[i] / max_i values[i]`.
///
/// An empty kept set scores the supremum 1, consistent with monotonicity.
/// Values must be strictly positive for the ratio to make sense.
pub fn best_ratio_regret(kept: &[usize], values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("ratio regret needs candidates"));
    }
    let mut best = f64::NEG_INFINITY;
    for &v in values {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::NonPositiveValue(v));
        }
        best = best.max(v);
    }
    let mut best_kept = f64::NEG_INFINITY;
    for &i in kept {
        best_kept = best_kept.max(values[i]);
    }
    if best_kept == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    Ok(1.0 - best_kept / best)
}

/// Affine flip from "keep if value > g" to the canonical "keep if score ≤ g'"
/// rule: `s_i = value_bound − values[i]`, clipped at zero.
///
/// Thresholding values at `g` equals thresholding the flipped scores at
/// `value_bound − g`; the boundary candidate lands inside the set under the
/// canonical closed rule.
pub fn value_set_to_score_set(values: &[f64], value_bound: f64) -> Result<Vec<f64>> {
    let mut scores = Vec::with_capacity(values.len());
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite("value"));
        }
        if v > value_bound {
            return Err(Error::ValueAboveBound {
                value: v,
                bound: value_bound,
            });
        }
        scores.push((value_bound - v).max(0.0));
    }
    Ok(scores)
}

/// Build the set at `threshold` and score it under `kind`.
///
/// - `Miscoverage` expects a single truth score per event.
/// - `Fnr` expects per-candidate scores and a nonempty truth index set.
/// - `BestRatioRegret` expects flipped scores (`value = score_bound − s`).
pub fn evaluate(
    kind: LossKind,
    scores: &[f64],
    truth: Option<&[usize]>,
    threshold: f64,
    score_bound: f64,
) -> Result<SetOutcome> {
    let kept = build_set(scores, threshold)?;
    let loss = match kind {
        LossKind::Miscoverage => {
            if scores.len() != 1 {
                return Err(Error::InvalidConfig(
                    "miscoverage events carry exactly one truth score".into(),
                ));
            }
            miscoverage(scores[0], threshold)
        }
        LossKind::Fnr => fnr(&kept, truth.ok_or(Error::EmptyTruth)?)?,
        LossKind::BestRatioRegret => {
            let values: Vec<f64> = scores.iter().map(|s| score_bound - s).collect();
            best_ratio_regret(&kept, &values)?
        }
    };
    Ok(SetOutcome { kept, loss })
}
