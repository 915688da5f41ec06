//! Stream events consumed by the calibration loop and the evaluators.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Which side of the calibration/hold-out partition an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Calibration,
    Holdout,
}

/// One observation: covariate, candidate scores, optional truth set, plus
/// evaluation-only tags.
///
/// `scores` holds per-candidate nonconformity scores, or a single truth
/// score for miscoverage streams. `group` is a subpopulation tag that
/// controllers never read; only the risk evaluators do.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamEvent {
    pub t: u64,
    pub x: Vec<f64>,
    pub scores: Vec<f64>,
    pub truth: Option<Vec<usize>>,
    pub group: u32,
    pub split: Split,
}
