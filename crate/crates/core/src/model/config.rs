use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture and objective weights.
///
/// The unified representation shares the latent width of the per-view codes,
/// since both pass through one shared classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScmrlConfig {
    /// Input width of every view; the view count is its length.
    pub input_dims: Vec<usize>,
    pub latent_dim: usize,
    /// Number of classes (clusters).
    pub k: usize,
    /// Encoder hidden widths; decoders mirror them.
    pub encoder_hidden: Vec<usize>,
    pub degrader_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    /// Weight of the degradation term.
    pub lambda1: f64,
    /// Weight of the semantic-consistency term.
    pub lambda2: f64,
    /// Contrastive temperature.
    pub tau: f64,
    /// Treat per-view codes as constant targets in the degradation term.
    pub stop_grad_degradation: bool,
    /// Include the reconstruction term during joint training.
    pub joint_reconstruction: bool,
}

impl Default for ScmrlConfig {
    fn default() -> Self {
        Self {
            input_dims: Vec::new(),
            latent_dim: 64,
            k: 2,
            encoder_hidden: vec![256, 128],
            degrader_hidden: vec![128],
            classifier_hidden: vec![128],
            lambda1: 1.0,
            lambda2: 1.0,
            tau: 0.5,
            stop_grad_degradation: true,
            joint_reconstruction: true,
        }
    }
}

impl ScmrlConfig {
    pub fn new(input_dims: Vec<usize>, k: usize) -> Self {
        Self {
            input_dims,
            k,
            ..Self::default()
        }
    }

    /// Number of views.
    pub fn m(&self) -> usize {
        self.input_dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.m() < 2 {
            return fail(format!("need at least two views, got {}", self.m()));
        }
        if self.input_dims.iter().any(|&d| d == 0) {
            return fail("every view needs a positive input width".into());
        }
        if self.k < 2 {
            return fail(format!("need at least two classes, got {}", self.k));
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be positive".into());
        }
        let hidden = [&self.encoder_hidden, &self.degrader_hidden, &self.classifier_hidden];
        if hidden.iter().any(|h| h.iter().any(|&w| w == 0)) {
            return fail("hidden widths must be positive".into());
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail(format!("tau must be positive, got {}", self.tau));
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn encoder_dims(&self, view: usize) -> Vec<usize> {
        let mut dims = vec![self.input_dims[view]];
        dims.extend(&self.encoder_hidden);
        dims.push(self.latent_dim);
        dims
    }

    pub fn decoder_dims(&self, view: usize) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(self.encoder_hidden.iter().rev());
        dims.push(self.input_dims[view]);
        dims
    }

    pub fn degrader_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(&self.degrader_hidden);
        dims.push(self.latent_dim);
        dims
    }

    pub fn classifier_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(&self.classifier_hidden);
        dims.push(self.k);
        dims
    }
}
