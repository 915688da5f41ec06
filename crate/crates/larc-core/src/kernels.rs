//! Stationary kernels and the constants that drive every localization bound.
//!
//! All kernels here are radial: `k(x, x') = k̃(‖x − x'‖)` for a non-negative,
//! decreasing profile `k̃` with `k̃(0) = κ` (the amplitude) and `k̃(z) → 0` as
//! `z → ∞`. Two constants of the profile appear throughout the risk bounds:
//!
//! - `κ`, the peak value, which sets the localization level and the
//!   irreducible long-run gap `κB`;
//! - `ρ`, the tight Lipschitz constant of `k̃`, which controls how fast the
//!   learned threshold function can vary across the covariate space.
//!
//! Profiles, with `z = ‖x − x'‖` and length scale `l`:
//!
//! | family     | `k̃(z)`               | tight `ρ = sup |k̃'(z)|` |
//! |------------|-----------------------|--------------------------|
//! | RBF        | `κ exp(−z²/l)`        | `κ √(2/(l·e))`           |
//! | Cauchy     | `κ / (1 + z²/l)`      | `(3√3/8) κ / √l`         |
//! | Triangular | `κ max(0, 1 − z/l)`   | `κ / l`                  |
//!
//! Note the RBF exponent is `−z²/l`, with no factor 2 in the denominator, so
//! `l` carries squared-covariate units. Solving `ρ = κ√(2/(l·e))` for the
//! length scale gives `l = (2/e)(κ/ρ)²`.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Radial profile family of a stationary kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    Rbf,
    Cauchy,
    Triangular,
}

/// A stationary kernel `k(x, x') = κ · k̃(‖x − x'‖ ; l)`.
///
/// Immutable after construction; shared freely across threads.
///
/// `amplitude` is `κ` in loss-scale units. The usual requirement is `κ > 0`;
/// `κ = 0` is additionally accepted because the zero-amplitude kernel is the
/// exact reduction of L-ARC to scalar ARC and is useful for cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub amplitude: f64,
    pub length_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, amplitude: f64, length_scale: f64) -> Result<Self> {
        let spec = KernelSpec {
            family,
            amplitude,
            length_scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Check the construction invariants (`κ ≥ 0`, `l > 0`, both finite).
    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || !self.length_scale.is_finite() {
            return Err(Error::NonFinite("kernel parameter"));
        }
        if self.amplitude < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "kernel amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if self.length_scale <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "kernel length scale must be positive, got {}",
                self.length_scale
            )));
        }
        Ok(())
    }

    /// Peak value `κ = k(x, x)`.
    #[inline]
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Radial profile `k̃(z)` for `z ≥ 0`.
    #[inline]
    pub fn eval_radial(&self, z: f64) -> f64 {
        let l = self.length_scale;
        match self.family {
            KernelFamily::Rbf => self.amplitude * math::exp(-(z * z) / l),
            KernelFamily::Cauchy => self.amplitude / (1.0 + (z * z) / l),
            KernelFamily::Triangular => self.amplitude * (1.0 - z / l).max(0.0),
        }
    }

    /// Evaluate `k(x, x')`.
    ///
    /// Errors on dimension mismatch or non-finite coordinates.
    pub fn eval(&self, x: &[f64], x2: &[f64]) -> Result<f64> {
        Ok(self.eval_radial(euclidean_distance(x, x2)?))
    }

    /// Tight Lipschitz constant `ρ` of the radial profile.
    ///
    /// These are the exact suprema of `|k̃'(z)|` over `z ≥ 0`, not loose
    /// bounds: `ρ` enters the trajectory bound multiplicatively, so anything
    /// looser would weaken the runtime-checkable invariants.
    pub fn lipschitz_constant(&self) -> f64 {
        let l = self.length_scale;
        match self.family {
            // |k̃'(z)| = (2z/l) κ e^{−z²/l} peaks at z = √(l/2).
            KernelFamily::Rbf => self.amplitude * math::sqrt(2.0 / (l * core::f64::consts::E)),
            // |k̃'(z)| = (2z/l) κ / (1 + z²/l)² peaks at z = √(l/3).
            KernelFamily::Cauchy => 3.0 * math::sqrt(3.0) / 8.0 * self.amplitude / math::sqrt(l),
            // Constant slope on the support.
            KernelFamily::Triangular => self.amplitude / l,
        }
    }

    /// Gram matrix `K[i][j] = k(p_i, p_j)`.
    ///
    /// Symmetric with `κ` on the diagonal; positive semidefinite up to
    /// numerical tolerance.
    pub fn gram(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if points.is_empty() {
            return Err(Error::EmptyInput("gram matrix needs at least one point"));
        }
        let n = points.len();
        let mut k = alloc::vec![alloc::vec![0.0; n]; n];
        for i in 0..n {
            k[i][i] = self.amplitude;
            for j in (i + 1)..n {
                let v = self.eval(&points[i], &points[j])?;
                k[i][j] = v;
                k[j][i] = v;
            }
        }
        Ok(k)
    }
}

/// `‖x − y‖`, validating dimensions and finiteness.
pub fn euclidean_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let mut sq = 0.0;
    for (a, b) in x.iter().zip(y.iter()) {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("covariate"));
        }
        let d = a - b;
        sq += d * d;
    }
    Ok(math::sqrt(sq))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rbf(amplitude: f64, length_scale: f64) -> KernelSpec {
        KernelSpec::new(KernelFamily::Rbf, amplitude, length_scale).unwrap()
    }

    #[test]
    fn rbf_zero_distance_is_amplitude() {
        let k = rbf(1.0, 1.0);
        let x = [0.3, -0.7];
        assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn rbf_unit_distance() {
        let k = rbf(1.0, 1.0);
        let v = k.eval(&[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367_879_4).abs() < 1e-7);
    }

    #[test]
    fn triangular_compact_support() {
        let k = KernelSpec::new(KernelFamily::Triangular, 2.0, 1.0).unwrap();
        assert_eq!(k.eval(&[0.0], &[1.5]).unwrap(), 0.0);
        assert_eq!(k.eval(&[0.0], &[1.0]).unwrap(), 0.0);
        assert!((k.eval(&[0.0], &[0.5]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let k = rbf(1.0, 1.0);
        assert!(matches!(
            k.eval(&[0.0, 1.0], &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn eval_rejects_non_finite() {
        let k = rbf(1.0, 1.0);
        assert!(k.eval(&[f64::NAN], &[0.0]).is_err());
        assert!(k.eval(&[0.0], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn negative_amplitude_rejected_zero_allowed() {
        assert!(KernelSpec::new(KernelFamily::Rbf, -0.1, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::Rbf, 0.0, 1.0).is_ok());
        assert!(KernelSpec::new(KernelFamily::Rbf, 1.0, 0.0).is_err());
    }

    /// Grid-search oracle for the profile slope supremum: maximizes
    /// |k̃(z+h) − k̃(z)| / h over a fine grid, independent of the closed form.
    fn slope_supremum(kernel: &KernelSpec, z_max: f64) -> f64 {
        let n = 2_000_000;
        let h = z_max / n as f64;
        let mut sup: f64 = 0.0;
        let mut prev = kernel.eval_radial(0.0);
        for i in 1..=n {
            let cur = kernel.eval_radial(i as f64 * h);
            sup = sup.max((cur - prev).abs() / h);
            prev = cur;
        }
        sup
    }

    #[test]
    fn rbf_lipschitz_matches_grid_search() {
        let k = rbf(1.0, 1.0);
        let rho = k.lipschitz_constant();
        assert!((rho - (2.0f64 / core::f64::consts::E).sqrt()).abs() < 1e-12);
        assert!((rho - slope_supremum(&k, 6.0)).abs() < 1e-6);
    }

    #[test]
    fn cauchy_lipschitz_matches_grid_search() {
        let k = KernelSpec::new(KernelFamily::Cauchy, 1.3, 0.7).unwrap();
        let rho = k.lipschitz_constant();
        assert!((rho - slope_supremum(&k, 8.0)).abs() < 1e-6);
    }

    #[test]
    fn triangular_lipschitz_is_slope() {
        let k = KernelSpec::new(KernelFamily::Triangular, 1.0, 2.0).unwrap();
        assert_eq!(k.lipschitz_constant(), 0.5);
    }

    #[test]
    fn rbf_lipschitz_scales_with_amplitude() {
        let k1 = rbf(1.0, 1.0);
        let k3 = rbf(3.0, 1.0);
        assert!((k3.lipschitz_constant() - 3.0 * k1.lipschitz_constant()).abs() < 1e-15);
    }

    #[test]
    fn gram_single_point() {
        let k = rbf(0.8, 1.0);
        let g = k.gram(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(g, vec![vec![0.8]]);
    }

    #[test]
    fn gram_identical_points() {
        let k = rbf(1.0, 1.0);
        let g = k.gram(&[vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(g, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn gram_empty_rejected() {
        let k = rbf(1.0, 1.0);
        assert!(k.gram(&[]).is_err());
    }

    #[test]
    fn coercive_tail_against_explicit_bounds() {
        // Explicit tail bounds checked at a large finite distance:
        //   RBF:        k̃(z) ≤ κ e^{−z²/l}
        //   Cauchy:     k̃(z) ≤ κ l / z²
        //   Triangular: k̃(z) = 0 for z ≥ l
        let z = 50.0;
        let rbf = rbf(1.0, 1.0);
        assert!(rbf.eval_radial(z) <= (-z * z).exp() + f64::MIN_POSITIVE);
        let cauchy = KernelSpec::new(KernelFamily::Cauchy, 2.0, 3.0).unwrap();
        assert!(cauchy.eval_radial(z) <= 2.0 * 3.0 / (z * z));
        let tri = KernelSpec::new(KernelFamily::Triangular, 2.0, 3.0).unwrap();
        assert_eq!(tri.eval_radial(z), 0.0);
    }
}
