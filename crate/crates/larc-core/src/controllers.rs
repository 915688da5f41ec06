//! Scalar ARC, partitioned (Mondrian) ARC, and a uniform controller facade.
//!
//! ARC tracks a single threshold with `λ_{t+1} = λ_t + η_t (L_t − α)` and a
//! decaying step size `η_t = η₁ t^{−1/2}`. The threshold starts at zero so
//! that every method here begins from the same predictor. Mondrian ARC runs
//! one independent ARC instance per cell of a covariate partition; L-ARC with
//! a zero-amplitude kernel reduces to ARC exactly, constant-for-constant.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::euclidean_distance;
use crate::threshold::{learning_rate, LarcState, UpdateDelta};

/// Scalar ARC threshold state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcState {
    pub threshold: f64,
    pub step: u64,
    pub alpha: f64,
    pub eta1: f64,
    pub loss_bound: f64,
}

impl ArcState {
    pub fn new(alpha: f64, eta1: f64, loss_bound: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        if eta1 <= 0.0 || !eta1.is_finite() {
            return Err(Error::InvalidConfig("eta1 must be positive".into()));
        }
        if loss_bound < alpha || !loss_bound.is_finite() {
            return Err(Error::InvalidConfig(
                "loss bound must be finite and at least alpha".into(),
            ));
        }
        Ok(ArcState {
            threshold: 0.0,
            step: 0,
            alpha,
            eta1,
            loss_bound,
        })
    }

    /// `λ_{t+1} = λ_t + η_t (L_t − α)` with `η_t = η₁ (step+1)^{−1/2}`.
    pub fn update(&mut self, loss: f64) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        if loss < 0.0 || loss > self.loss_bound {
            return Err(Error::LossOutOfRange {
                loss,
                bound: self.loss_bound,
            });
        }
        let eta = learning_rate(self.eta1, self.step + 1);
        self.threshold += eta * (loss - self.alpha);
        self.step += 1;
        Ok(())
    }
}

/// Axis-aligned box, inclusive on both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    fn contains(&self, x: &[f64]) -> Result<bool> {
        if self.lo.len() != x.len() || self.hi.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lo.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(v, (lo, hi))| lo <= v && v <= hi))
    }
}

/// Covariate partition for Mondrian ARC. Every covariate maps to exactly one
/// cell index in `0..cell_count()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Partition {
    /// Everything in one cell (degenerate Mondrian = plain ARC).
    Single,
    /// First matching box wins; points outside every box fall into an
    /// implicit overflow cell with index `boxes.len()`.
    Boxes { boxes: Vec<BoxRegion> },
    /// Near/far split around a center: cell 0 within `radius`, cell 1 beyond.
    Radius { center: Vec<f64>, radius: f64 },
}

impl Partition {
    pub fn cell_count(&self) -> usize {
        match self {
            Partition::Single => 1,
            Partition::Boxes { boxes } => boxes.len() + 1,
            Partition::Radius { .. } => 2,
        }
    }

    pub fn cell_of(&self, x: &[f64]) -> Result<usize> {
        match self {
            Partition::Single => Ok(0),
            Partition::Boxes { boxes } => {
                for (i, b) in boxes.iter().enumerate() {
                    if b.contains(x)? {
                        return Ok(i);
                    }
                }
                Ok(boxes.len())
            }
            Partition::Radius { center, radius } => {
                let d = euclidean_distance(center, x)?;
                Ok(if d <= *radius { 0 } else { 1 })
            }
        }
    }
}

/// One ARC instance per partition cell; cells evolve independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MondrianState {
    pub partition: Partition,
    pub cells: Vec<ArcState>,
}

impl MondrianState {
    pub fn new(partition: Partition, alpha: f64, eta1: f64, loss_bound: f64) -> Result<Self> {
        let cells = (0..partition.cell_count())
            .map(|_| ArcState::new(alpha, eta1, loss_bound))
            .collect::<Result<Vec<_>>>()?;
        Ok(MondrianState { partition, cells })
    }

    /// Route the observation to the cell containing `x`; no other cell moves.
    pub fn observe(&mut self, x: &[f64], loss: f64) -> Result<()> {
        let cell = self.partition.cell_of(x)?;
        let cells = self.cells.len();
        self.cells
            .get_mut(cell)
            .ok_or(Error::CellOutOfRange { cell, cells })?
            .update(loss)
    }

    pub fn threshold_at(&self, x: &[f64]) -> Result<f64> {
        let cell = self.partition.cell_of(x)?;
        let cells = self.cells.len();
        self.cells
            .get(cell)
            .map(|c| c.threshold)
            .ok_or(Error::CellOutOfRange { cell, cells })
    }
}

/// Any of the three calibration methods behind one interface, so a harness
/// can drive them interchangeably. Deterministic given the observation
/// history.
#[derive(Debug, Clone)]
pub enum Controller {
    Arc(ArcState),
    Mondrian(MondrianState),
    Larc(LarcState),
}

impl Controller {
    /// Threshold applied to the scores at covariate `x`.
    pub fn threshold_at(&self, x: &[f64]) -> Result<f64> {
        match self {
            Controller::Arc(state) => Ok(state.threshold),
            Controller::Mondrian(state) => state.threshold_at(x),
            Controller::Larc(state) => state.predict_threshold(x),
        }
    }

    /// Feed back the realized loss for the prediction made at `x`.
    ///
    /// Returns the update delta for L-ARC (callers tracking function
    /// diagnostics need it); scalar methods return `None`.
    pub fn observe(&mut self, x: &[f64], loss: f64) -> Result<Option<UpdateDelta>> {
        match self {
            Controller::Arc(state) => {
                state.update(loss)?;
                Ok(None)
            }
            Controller::Mondrian(state) => {
                state.observe(x, loss)?;
                Ok(None)
            }
            Controller::Larc(state) => Ok(Some(state.update(x, loss)?)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelFamily, KernelSpec};
    use crate::threshold::LarcConfig;
    use alloc::vec;

    #[test]
    fn arc_update_substitution() {
        // λ = 0.5, η_t = 0.1 (via eta1 = 0.1 at t = 1), α = 0.1, loss = 1 → 0.59.
        let mut state = ArcState::new(0.1, 0.1, 1.0).unwrap();
        state.threshold = 0.5;
        state.update(1.0).unwrap();
        assert!((state.threshold - 0.59).abs() < 1e-15);
    }

    #[test]
    fn arc_loss_at_alpha_is_a_fixed_point() {
        let mut state = ArcState::new(0.1, 1.0, 1.0).unwrap();
        state.threshold = 0.42;
        state.update(0.1).unwrap();
        assert_eq!(state.threshold, 0.42);
    }

    #[test]
    fn arc_step_size_bounds_threshold_moves() {
        let mut state = ArcState::new(0.3, 0.7, 1.0).unwrap();
        for i in 0..200 {
            let before = state.threshold;
            let eta = learning_rate(state.eta1, state.step + 1);
            let loss = if i % 3 == 0 { 1.0 } else { 0.0 };
            state.update(loss).unwrap();
            let max_move = eta * state.alpha.max(state.loss_bound - state.alpha);
            assert!((state.threshold - before).abs() <= max_move + 1e-15);
        }
    }

    #[test]
    fn arc_closed_form_matches_recursion() {
        // λ_T = λ_1 + Σ η_τ (L_τ − α), accumulated independently.
        let alpha = 0.2;
        let eta1 = 0.9;
        let mut state = ArcState::new(alpha, eta1, 1.0).unwrap();
        let mut closed = 0.0;
        for t in 1..=500u64 {
            let loss = ((t * 2654435761) % 97) as f64 / 96.0;
            state.update(loss).unwrap();
            closed += learning_rate(eta1, t) * (loss - alpha);
        }
        assert!((state.threshold - closed).abs() < 1e-12);
    }

    #[test]
    fn arc_rejects_out_of_range_loss() {
        let mut state = ArcState::new(0.1, 1.0, 1.0).unwrap();
        assert!(state.update(1.2).is_err());
        assert!(state.update(-0.2).is_err());
        assert_eq!(state.step, 0);
    }

    #[test]
    fn mondrian_cells_are_isolated() {
        let partition = Partition::Boxes {
            boxes: vec![BoxRegion {
                lo: vec![-1e9],
                hi: vec![0.0],
            }],
        };
        let mut state = MondrianState::new(partition, 0.1, 1.0, 1.0).unwrap();
        for _ in 0..10 {
            state.observe(&[-0.5], 1.0).unwrap();
        }
        assert!(state.cells[0].threshold > 0.0);
        assert_eq!(state.cells[1].threshold, 0.0);
        assert_eq!(state.cells[1].step, 0);
    }

    #[test]
    fn mondrian_cell_equals_standalone_arc_on_substream() {
        // Interleaved stream split by sign of the first coordinate: each
        // cell's trajectory must equal a fresh ARC run on its sub-stream.
        let partition = Partition::Boxes {
            boxes: vec![BoxRegion {
                lo: vec![-1e9, -1e9],
                hi: vec![0.0, 1e9],
            }],
        };
        let mut mondrian = MondrianState::new(partition, 0.1, 0.5, 1.0).unwrap();
        let mut oracle_neg = ArcState::new(0.1, 0.5, 1.0).unwrap();
        let mut oracle_pos = ArcState::new(0.1, 0.5, 1.0).unwrap();

        for t in 0..200 {
            let x = [if t % 3 == 0 { -1.0 } else { 1.0 }, t as f64];
            let loss = ((t * 37) % 11) as f64 / 10.0;
            mondrian.observe(&x, loss).unwrap();
            if t % 3 == 0 {
                oracle_neg.update(loss).unwrap();
            } else {
                oracle_pos.update(loss).unwrap();
            }
        }
        assert_eq!(mondrian.cells[0].threshold, oracle_neg.threshold);
        assert_eq!(mondrian.cells[1].threshold, oracle_pos.threshold);
    }

    #[test]
    fn single_cell_mondrian_is_plain_arc() {
        let mut mondrian = MondrianState::new(Partition::Single, 0.1, 1.0, 1.0).unwrap();
        let mut arc = ArcState::new(0.1, 1.0, 1.0).unwrap();
        for t in 0..100 {
            let loss = ((t * 7) % 5) as f64 / 4.0;
            mondrian.observe(&[t as f64], loss).unwrap();
            arc.update(loss).unwrap();
        }
        assert_eq!(mondrian.cells[0], arc);
    }

    #[test]
    fn radius_partition_splits_near_far() {
        let p = Partition::Radius {
            center: vec![0.0, 0.0],
            radius: 2.0,
        };
        assert_eq!(p.cell_of(&[1.0, 1.0]).unwrap(), 0);
        assert_eq!(p.cell_of(&[3.0, 0.0]).unwrap(), 1);
        assert_eq!(p.cell_count(), 2);
    }

    #[test]
    fn threshold_at_trivial_lookups() {
        let arc = Controller::Arc(ArcState::new(0.1, 1.0, 1.0).unwrap());
        assert_eq!(arc.threshold_at(&[123.0]).unwrap(), 0.0);

        let larc_cfg = LarcConfig {
            alpha: 0.1,
            eta1: 1.0,
            lambda: 1e-4,
            loss_bound: 1.0,
            score_bound: 1.0,
            kernel: KernelSpec::new(KernelFamily::Rbf, 1.0, 1.0).unwrap(),
            max_coefficients: None,
        };
        let larc = Controller::Larc(LarcState::new(larc_cfg).unwrap());
        assert_eq!(larc.threshold_at(&[123.0]).unwrap(), 0.0);

        let mut mondrian = MondrianState::new(
            Partition::Radius {
                center: vec![0.0],
                radius: 1.0,
            },
            0.1,
            1.0,
            1.0,
        )
        .unwrap();
        mondrian.cells[0].threshold = 0.2;
        mondrian.cells[1].threshold = 0.7;
        let ctrl = Controller::Mondrian(mondrian);
        assert_eq!(ctrl.threshold_at(&[0.5]).unwrap(), 0.2);
        assert_eq!(ctrl.threshold_at(&[5.0]).unwrap(), 0.7);
    }

    #[test]
    fn zero_amplitude_larc_tracks_arc_exactly() {
        // With κ = 0 every kernel term vanishes, so the L-ARC constant must
        // reproduce the ARC threshold bit-for-bit.
        let cfg = LarcConfig {
            alpha: 0.1,
            eta1: 0.7,
            lambda: 1e-3,
            loss_bound: 1.0,
            score_bound: 1.0,
            kernel: KernelSpec::new(KernelFamily::Rbf, 0.0, 1.0).unwrap(),
            max_coefficients: None,
        };
        let mut larc = LarcState::new(cfg).unwrap();
        let mut arc = ArcState::new(0.1, 0.7, 1.0).unwrap();
        for t in 0..300u64 {
            let x = [(t % 13) as f64 * 0.5 - 3.0];
            let loss = ((t * 31) % 7) as f64 / 6.0;
            larc.update(&x, loss).unwrap();
            arc.update(loss).unwrap();
            assert_eq!(larc.constant(), arc.threshold);
            assert_eq!(larc.predict_threshold(&x).unwrap(), arc.threshold);
            assert_eq!(larc.eval_f(&x).unwrap(), 0.0);
        }
    }
}
