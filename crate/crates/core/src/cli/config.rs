// SPDX-License-Identifier: MIT OR Apache-2.0

//! TOML configuration. Every key is optional; command-line flags override
//! the file.
//!
//! ```toml
//! seed = 0
//!
//! [model]
//! kind = "mlp"       # or "logreg" with feature_dim and class_count
//! layer_dims = [2, 16, 2]
//! activation = "tanh"
//!
//! [train]
//! optimizer = "sgd"  # or "newton"
//! epochs = 30
//! lr = 0.05
//! batch_size = 32
//! momentum = 0.9
//! l2_ridge = 0.0
//! checkpoint_epochs = []
//!
//! [ensemble]
//! members = 5
//! alpha = 0.5
//!
//! [projection]
//! k = 256
//! distribution = "rademacher"
//! block_count = 100
//! shared_seed = false
//! last_layer_only = false
//!
//! [trak]             # estimator terms
//! reweight = true
//! use_q = true
//! r_weighting = false
//! leverage = false
//! averaging = "out"
//!
//! [threshold]
//! mode = "off"       # "soft_lambda" | "top_k_per_row"
//! grid = []
//! cv_fraction = 0.5
//!
//! [runs]
//! m = 64
//! reps = 3
//! alpha = 0.5
//!
//! [lasso]
//! l1 = 0.0
//!
//! [influence]
//! mode = "exact_hessian"   # or "ggn"
//! damping = { kind = "relative", value = 1e-3 }
//!
//! [lds]
//! bootstrap_resamples = 1000
//! confidence = 0.95
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::attribution::{Damping, HessianMode, LassoConfig, ThresholdConfig, TrakOptions};
use crate::error::{Error, Result};
use crate::evaluation::LdsOptions;
use crate::linalg::Distribution;
use crate::models::{Activation, ModelKind, ModelSpec};
use crate::training::{LrSchedule, Optimizer, TrainConfig};

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub model: Option<ModelSection>,
    pub train: TrainSection,
    pub ensemble: EnsembleSection,
    pub projection: ProjectionSection,
    pub trak: TrakOptions,
    pub threshold: ThresholdConfig,
    pub runs: RunsSection,
    pub lasso: LassoSection,
    pub influence: InfluenceSection,
    pub lds: LdsOptions,
}

/// Model architecture. For `mlp`, `feature_dim` and `class_count` default to
/// the ends of `layer_dims`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(default)]
    pub layer_dims: Vec<usize>,
    pub feature_dim: Option<usize>,
    pub class_count: Option<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl ModelSection {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let spec = match self.kind {
            ModelKind::Mlp => {
                let spec = ModelSpec::mlp(&self.layer_dims, self.activation);
                if self.feature_dim.is_some_and(|d| d != spec.feature_dim)
                    || self.class_count.is_some_and(|c| c != spec.class_count)
                {
                    return Err(Error::invalid("feature_dim/class_count disagree with layer_dims"));
                }
                spec
            }
            ModelKind::Logreg => {
                if !self.layer_dims.is_empty() {
                    return Err(Error::invalid("layer_dims is only valid for mlp"));
                }
                let d = self
                    .feature_dim
                    .ok_or_else(|| Error::invalid("logreg needs feature_dim"))?;
                let c = self
                    .class_count
                    .ok_or_else(|| Error::invalid("logreg needs class_count"))?;
                ModelSpec::logreg(d, c)
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub optimizer: Option<Optimizer>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub momentum: Option<f64>,
    pub l2_ridge: Option<f64>,
    pub schedule: Option<LrSchedule>,
    pub checkpoint_epochs: Vec<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub members: usize,
    pub alpha: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { members: 5, alpha: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSection {
    pub k: usize,
    pub distribution: Distribution,
    pub block_count: Option<usize>,
    pub shared_seed: bool,
    /// Restrict gradients to the final layer's parameters.
    pub last_layer_only: bool,
}

impl Default for ProjectionSection {
    fn default() -> Self {
        ProjectionSection {
            k: 256,
            distribution: Distribution::default(),
            block_count: None,
            shared_seed: false,
            last_layer_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunsSection {
    pub m: usize,
    pub reps: usize,
    pub alpha: f64,
}

impl Default for RunsSection {
    fn default() -> Self {
        RunsSection {
            m: 64,
            reps: 3,
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoSection {
    pub l1: f64,
    pub max_sweeps: Option<usize>,
}

impl LassoSection {
    pub fn to_config(&self) -> LassoConfig {
        let mut c = LassoConfig::new(self.l1);
        if let Some(s) = self.max_sweeps {
            c.max_sweeps = s;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InfluenceSection {
    pub mode: HessianMode,
    pub damping: Damping,
}

impl Default for InfluenceSection {
    fn default() -> Self {
        InfluenceSection {
            mode: HessianMode::ExactHessian,
            damping: Damping::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::invalid("config has no [model] section"))?
            .to_spec()
    }

    /// Newton for binary logistic regression, SGD otherwise, with any keys
    /// from `[train]` applied on top.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let spec = self.model()?;
        let t = &self.train;
        let optimizer = t.optimizer.unwrap_or(if spec.is_binary_logreg() {
            Optimizer::Newton
        } else {
            Optimizer::Sgd
        });
        let mut c = match optimizer {
            Optimizer::Newton => TrainConfig::newton(),
            Optimizer::Sgd => TrainConfig::sgd(30, 0.05, 32, 0),
        };
        c.seed = self.seed;
        if let Some(v) = t.epochs {
            c.epochs = v;
        }
        if let Some(v) = t.lr {
            c.lr = v;
        }
        if let Some(v) = t.batch_size {
            c.batch_size = v;
        }
        if let Some(v) = t.momentum {
            c.momentum = v;
        }
        if let Some(v) = t.l2_ridge {
            c.l2_ridge = v;
        }
        if let Some(v) = t.schedule {
            c.schedule = v;
        }
        if let Some(v) = t.tol {
            c.tol = v;
        }
        c.checkpoint_epochs = t.checkpoint_epochs.clone();
        c.validate()?;
        Ok(c)
    }
}
