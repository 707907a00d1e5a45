use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ScmrlConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub pretrain_epochs: usize,
    pub joint_epochs: usize,
    /// Capped at the sample count.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            pretrain_epochs: 200,
            joint_epochs: 100,
            batch_size: 256,
            learning_rate: 1e-3,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self, k: usize) -> Result<()> {
        let min = k.max(2);
        if self.batch_size < min {
            return Err(Error::Config(format!("batch_size must be at least max(2, k) = {min}, got {}", self.batch_size)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Ablations of the joint objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    /// Semantic term off.
    NoSem,
    /// Reconstruction dropped from the joint phase; pretraining still runs.
    NoRec,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::NoSem, Variant::NoRec];

    pub fn apply(self, config: &ScmrlConfig) -> ScmrlConfig {
        let mut out = config.clone();
        match self {
            Variant::Full => {}
            Variant::NoSem => out.lambda2 = 0.0,
            Variant::NoRec => out.joint_reconstruction = false,
        }
        out
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoSem => "no_sem",
            Variant::NoRec => "no_rec",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation variant {s:?} (full, no_sem, no_rec)")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
