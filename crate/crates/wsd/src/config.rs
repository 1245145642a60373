//! Training configuration. Defaults: embedding 100, hidden 74 per
//! direction, dropouts 0.5, dropword 0.1, noise 0.2·σᵢ, SGD with momentum
//! 0.1, learning rate 2.0, decay 0.96.

use serde::{Deserialize, Serialize};

use crate::error::WsdError;
use crate::reg::RegConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub embed_dim: usize,
    /// LSTM hidden size per direction.
    pub hidden: usize,
    /// Width of the linear hidden layer a. Not pinned by the original
    /// experiments; defaults to the embedding size.
    pub hidden_layer: usize,
    pub reg: RegConfig,
    pub momentum: f64,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub max_epochs: usize,
    /// Early-stopping patience in epochs; 0 disables early stopping.
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Initialize the forget-gate bias to 1.0 instead of U(-0.1, 0.1).
    pub forget_bias_one: bool,
    /// Worker threads for mini-batch gradient evaluation.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            embed_dim: 100,
            hidden: 74,
            hidden_layer: 100,
            reg: RegConfig::default(),
            momentum: 0.1,
            learning_rate: 2.0,
            lr_decay: 0.96,
            max_epochs: 100,
            patience: 10,
            batch_size: 1,
            seed: 42,
            forget_bias_one: true,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), WsdError> {
        if self.embed_dim == 0 || self.hidden == 0 || self.hidden_layer == 0 {
            return Err(WsdError::Config("dimensions must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(WsdError::Config("learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lr_decay) || self.lr_decay == 0.0 {
            return Err(WsdError::Config("lr decay must be in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(WsdError::Config("momentum must be in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(WsdError::Config("batch size must be positive".into()));
        }
        self.reg.validate().map_err(WsdError::Config)
    }
}

/// Experiment variants, each disabling exactly one model ingredient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    /// Dropword probability forced to 0; everything else unchanged.
    NoDropword,
    /// Pretrained embeddings ignored; all embeddings from N(0, 0.1).
    NoPretrained,
    /// Context tokens permuted uniformly at random per presentation, target
    /// kept in place; applied at evaluation time too.
    ShuffledContext,
}

impl std::str::FromStr for AblationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(AblationMode::Full),
            "no-dropword" | "no_dropword" => Ok(AblationMode::NoDropword),
            "no-pretrained" | "no_pretrained" => Ok(AblationMode::NoPretrained),
            "shuffled" | "shuffled_context" => Ok(AblationMode::ShuffledContext),
            other => Err(format!(
                "unknown mode `{other}` (expected full | no-dropword | no-pretrained | shuffled)"
            )),
        }
    }
}
