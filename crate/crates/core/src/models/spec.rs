// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_finite, check_len, Error, Result};
use crate::models::Dataset;

pub const MAX_MLP_LAYERS: usize = 3;
pub const MAX_MLP_PARAMS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Logreg,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

/// Architecture of a toy model.
///
/// Parameter layout (flat `θ`):
///
/// * `logreg`, `c = 2`: `θ ∈ R^d`; margin `θ·x + b` is the class-1 minus
///   class-0 logit.
/// * `logreg`, `c > 2`: `W ∈ R^{c×d}` row-major (one row per class).
/// * `mlp` with `layer_dims = [d, h₁, …, c]`: for each layer in order, its
///   weight matrix `W ∈ R^{out×in}` row-major followed by its bias `b ∈ R^{out}`.
///   Hidden layers apply the activation; the last layer emits logits.
///
/// Neither logreg variant has an intercept; append a constant feature for one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub layer_dims: Vec<usize>,
    pub class_count: usize,
    pub feature_dim: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl ModelSpec {
    pub fn logreg(feature_dim: usize, class_count: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Logreg,
            layer_dims: Vec::new(),
            class_count,
            feature_dim,
            activation: Activation::Relu,
        }
    }

    /// `layer_dims = [d, h₁, …, c]`.
    pub fn mlp(layer_dims: &[usize], activation: Activation) -> Self {
        ModelSpec {
            kind: ModelKind::Mlp,
            layer_dims: layer_dims.to_vec(),
            class_count: layer_dims.last().copied().unwrap_or(0),
            feature_dim: layer_dims.first().copied().unwrap_or(0),
            activation,
        }
    }

    pub fn is_binary_logreg(&self) -> bool {
        self.kind == ModelKind::Logreg && self.class_count == 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::invalid("class_count must be at least 2"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim must be positive"));
        }
        if self.kind == ModelKind::Mlp {
            let dims = &self.layer_dims;
            if dims.len() < 2 || dims.contains(&0) {
                return Err(Error::invalid("mlp layer_dims must be [d, hidden.., c], all > 0"));
            }
            if dims[0] != self.feature_dim || *dims.last().unwrap() != self.class_count {
                return Err(Error::invalid(
                    "mlp layer_dims must start at feature_dim and end at class_count",
                ));
            }
            if dims.len() - 1 > MAX_MLP_LAYERS {
                return Err(Error::invalid(format!("mlp limited to {MAX_MLP_LAYERS} weight layers")));
            }
            if self.param_count() > MAX_MLP_PARAMS {
                return Err(Error::invalid(format!(
                    "mlp limited to {MAX_MLP_PARAMS} parameters, got {}",
                    self.param_count()
                )));
            }
        }
        Ok(())
    }

    pub fn check_dataset(&self, data: &Dataset) -> Result<()> {
        check_len("dataset feature_dim", self.feature_dim, data.feature_dim())?;
        check_len("dataset class_count", self.class_count, data.class_count())?;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            ModelKind::Logreg if self.class_count == 2 => self.feature_dim,
            ModelKind::Logreg => self.class_count * self.feature_dim,
            ModelKind::Mlp => self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
        }
    }

    /// `(weight_offset, bias_offset, in, out)` for each MLP layer.
    pub(crate) fn layer_offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut off = 0;
        self.layer_dims
            .windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let entry = (off, off + i * o, i, o);
                off += i * o + o;
                entry
            })
            .collect()
    }

    /// Parameter indices of the final layer (weights and bias). For logreg
    /// this is every parameter.
    pub fn last_layer_params(&self) -> Vec<usize> {
        match self.kind {
            ModelKind::Logreg => (0..self.param_count()).collect(),
            ModelKind::Mlp => {
                let (w, _, i, o) = *self.layer_offsets().last().expect("validated mlp");
                (w..w + i * o + o).collect()
            }
        }
    }

    /// Width of [`crate::models::representation`].
    pub fn representation_dim(&self) -> usize {
        match self.kind {
            ModelKind::Logreg => self.feature_dim,
            ModelKind::Mlp => self.layer_dims[self.layer_dims.len() - 2],
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn content_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("ModelSpec serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Flat parameter vector laid out per [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub theta: Vec<f64>,
}

impl ModelParams {
    pub fn new(spec: &ModelSpec, theta: Vec<f64>) -> Result<Self> {
        check_len("ModelParams", spec.param_count(), theta.len())?;
        check_finite("ModelParams", &theta)?;
        Ok(ModelParams { theta })
    }

    pub fn zeros(spec: &ModelSpec) -> Self {
        ModelParams {
            theta: vec![0.0; spec.param_count()],
        }
    }

    /// Seeded initialization: zeros for logreg, Glorot-uniform (tanh) or
    /// He-uniform (relu) weights with zero biases for MLPs.
    pub fn init(spec: &ModelSpec, seed: u64) -> Self {
        let mut theta = vec![0.0; spec.param_count()];
        if spec.kind == ModelKind::Mlp {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (w, _, i, o) in spec.layer_offsets() {
                let bound = match spec.activation {
                    Activation::Tanh => (6.0 / (i + o) as f64).sqrt(),
                    Activation::Relu => (6.0 / i as f64).sqrt(),
                };
                for t in &mut theta[w..w + i * o] {
                    *t = rng.gen_range(-bound..bound);
                }
            }
        }
        ModelParams { theta }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        check_len("ModelParams", spec.param_count(), self.theta.len())
    }
}
