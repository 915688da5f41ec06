//! Run configuration: a rigid, versioned JSON schema.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use larc_core::controllers::Partition;
use larc_core::kernels::KernelSpec;
use larc_core::losses::LossKind;
use larc_core::threshold::LarcConfig;
use serde::{Deserialize, Serialize};

use crate::stream::{AdversarialKind, CsvOptions, SyntheticSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Arc,
    Mondrian,
    Larc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvariantMode {
    /// Abort the run on the first violated bound (exit code 2).
    Enforce,
    /// Log violations into the summary and keep going.
    Record,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StreamConfig {
    Synthetic {
        #[serde(flatten)]
        spec: SyntheticSpec,
        /// Extra i.i.d. events generated for hold-out evaluation.
        #[serde(default)]
        holdout: usize,
    },
    Adversarial {
        kind: AdversarialKind,
        horizon: usize,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "default_window_short")]
        window_short: usize,
        #[serde(default = "default_window_long")]
        window_long: usize,
        #[serde(default = "default_feature_days")]
        daily_feature_days: usize,
        /// Declared covariate-norm bound; validated against the data.
        domain_radius: f64,
    },
}

fn default_window_short() -> usize {
    24
}
fn default_window_long() -> usize {
    48
}
fn default_feature_days() -> usize {
    7
}

impl StreamConfig {
    pub fn csv_options(&self) -> Option<CsvOptions> {
        match self {
            StreamConfig::Csv {
                window_short,
                window_long,
                daily_feature_days,
                ..
            } => Some(CsvOptions {
                window_short: *window_short,
                window_long: *window_long,
                daily_feature_days: *daily_feature_days,
            }),
            _ => None,
        }
    }
}

/// Weighting function for localized hold-out evaluation; the kernel defaults
/// to the run kernel when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightingConfig {
    pub id: String,
    #[serde(default)]
    pub centers: Vec<Vec<f64>>,
    #[serde(default)]
    pub betas: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub method: Method,
    pub alpha: f64,
    pub eta1: f64,
    /// Regularization; required for L-ARC, ignored by the scalar methods.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub max_coefficients: Option<usize>,
    /// Kernel; required for L-ARC (weightings may also borrow it).
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    /// Partition for Mondrian ARC; defaults to a single cell.
    #[serde(default)]
    pub mondrian_cells: Option<Partition>,
    pub loss: LossKind,
    pub stream: StreamConfig,
    #[serde(default)]
    pub weightings: Vec<WeightingConfig>,
    /// Evaluation seed (probe-grid placement); distinct from the stream seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_invariant_mode")]
    pub invariant_mode: InvariantMode,
    /// Optional cap on the number of calibration events consumed.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

fn default_invariant_mode() -> InvariantMode {
    InvariantMode::Enforce
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            bail!(
                "unsupported schema version {} (expected {})",
                self.schema,
                SCHEMA_VERSION
            );
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1)");
        }
        if !(self.eta1 > 0.0 && self.eta1.is_finite()) {
            bail!("eta1 must be positive");
        }
        match &self.stream {
            StreamConfig::Synthetic { spec, .. } => spec.validate()?,
            StreamConfig::Adversarial { horizon, .. } => {
                if *horizon == 0 {
                    bail!("adversarial horizon must be positive");
                }
            }
            StreamConfig::Csv { domain_radius, .. } => {
                let options = self.stream.csv_options().expect("csv stream");
                options.validate()?;
                if !(domain_radius.is_finite() && *domain_radius > 0.0) {
                    bail!("csv streams must declare a positive domain_radius");
                }
            }
        }
        match self.method {
            Method::Larc => {
                let kernel = self
                    .kernel
                    .ok_or_else(|| anyhow::anyhow!("method larc requires a kernel"))?;
                kernel.validate().map_err(anyhow::Error::from)?;
                let lambda = self
                    .lambda
                    .ok_or_else(|| anyhow::anyhow!("method larc requires lambda"))?;
                if !(lambda > 0.0 && lambda.is_finite()) {
                    bail!("lambda must be positive");
                }
                if self.eta1 * lambda >= 1.0 {
                    bail!("eta1 * lambda must stay below 1");
                }
            }
            Method::Mondrian | Method::Arc => {}
        }
        for w in &self.weightings {
            if w.centers.len() != w.betas.len() {
                bail!("weighting {}: centers/betas length mismatch", w.id);
            }
            if w.kernel.is_none() && self.kernel.is_none() {
                bail!("weighting {} needs a kernel (none configured)", w.id);
            }
            if w.constant < 0.0 {
                bail!("weighting {}: constant part must be non-negative", w.id);
            }
        }
        Ok(())
    }

    /// Assemble the L-ARC configuration once the stream's score bound is
    /// known. Only valid for `method: larc`.
    pub fn larc_config(&self, score_bound: f64) -> Result<LarcConfig> {
        let config = LarcConfig {
            alpha: self.alpha,
            eta1: self.eta1,
            lambda: self.lambda.context("method larc requires lambda")?,
            loss_bound: 1.0,
            score_bound,
            kernel: self.kernel.context("method larc requires a kernel")?,
            max_coefficients: self.max_coefficients,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "schema": 1,
            "method": "larc",
            "alpha": 0.1,
            "eta1": 1.0,
            "lambda": 1e-4,
            "kernel": {"family": "rbf", "amplitude": 1.0, "length_scale": 1.0},
            "loss": "miscoverage",
            "stream": {
                "type": "synthetic",
                "clusters": [{
                    "center": [0.0],
                    "covariate_spread": 0.3,
                    "score_distribution": {"family": "uniform", "lo": 0.0, "hi": 1.0}
                }],
                "mix": [1.0],
                "horizon": 100,
                "seed": 7,
                "holdout": 50
            }
        })
    }

    #[test]
    fn minimal_config_parses_and_validates() {
        let config: RunConfig = serde_json::from_value(minimal_json()).unwrap();
        config.validate().unwrap();
        assert_eq!(config.invariant_mode, InvariantMode::Enforce);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut json = minimal_json();
        json["surprise"] = serde_json::json!(true);
        assert!(serde_json::from_value::<RunConfig>(json).is_err());
    }

    #[test]
    fn schema_version_is_pinned() {
        let mut json = minimal_json();
        json["schema"] = serde_json::json!(2);
        let config: RunConfig = serde_json::from_value(json).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn larc_requires_kernel_and_lambda() {
        let mut json = minimal_json();
        json.as_object_mut().unwrap().remove("kernel");
        let config: RunConfig = serde_json::from_value(json).unwrap();
        assert!(config.validate().is_err());

        let mut json = minimal_json();
        json.as_object_mut().unwrap().remove("lambda");
        let config: RunConfig = serde_json::from_value(json).unwrap();
        assert!(config.validate().is_err());
    }

    #[test]
    fn eta_lambda_product_checked_at_config_level() {
        let mut json = minimal_json();
        json["lambda"] = serde_json::json!(2.0);
        let config: RunConfig = serde_json::from_value(json).unwrap();
        assert!(config.validate().is_err());
    }
}
