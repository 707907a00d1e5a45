//! Finite-difference verification of every objective term.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScmrlConfig;
use super::reference::objective;
use super::scmrl::{reconstruction_loss, total_loss_with, ScmrlGrads, ScmrlModel};
use crate::error::Result;
use crate::nn::{finite_diff_check, DoubleDouble, GradCheckReport, Matrix, MlpGrads};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossTerm {
    Rec,
    Deg,
    Sem,
    Total,
}

impl LossTerm {
    pub const ALL: [LossTerm; 4] = [LossTerm::Rec, LossTerm::Deg, LossTerm::Sem, LossTerm::Total];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Rec => "rec",
            LossTerm::Deg => "deg",
            LossTerm::Sem => "sem",
            LossTerm::Total => "total",
        }
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Copy of `model` whose objective equals the single requested term.
fn isolate(model: &ScmrlModel, term: LossTerm) -> Result<ScmrlModel> {
    let cfg = model.config();
    let (l1, l2, rec) = match term {
        LossTerm::Rec => (0.0, 0.0, true),
        LossTerm::Deg => (1.0, 0.0, false),
        LossTerm::Sem => (0.0, 1.0, false),
        LossTerm::Total => (cfg.lambda1, cfg.lambda2, cfg.joint_reconstruction),
    };
    let mut out = model.clone();
    out.set_objective(l1, l2, cfg.tau, rec)?;
    Ok(out)
}

/// Optionally mutates analytic gradients before comparison; used to build
/// negative controls.
pub type GradientTamper<'a> = &'a dyn Fn(&mut ScmrlGrads);

/// Compares the analytic gradient of `term` (with respect to every network
/// parameter and the batch rows of `H`) against central differences.
///
/// The numeric side evaluates the brute-force objective in double-double
/// precision. When the degradation targets are detached, the probe holds them
/// at their unperturbed values so both sides differentiate the same function.
pub fn check_term(
    model: &ScmrlModel,
    views: &[Matrix],
    h_batch: &Matrix,
    term: LossTerm,
    step: f64,
    tamper: Option<GradientTamper<'_>>,
) -> Result<GradCheckReport> {
    let isolated = isolate(model, term)?;
    let n_params = isolated.num_params();
    let mut params = isolated.flat_params();
    params.extend_from_slice(h_batch.as_slice());

    let frozen = if isolated.config().stop_grad_degradation {
        Some(isolated.encode_all(views)?)
    } else {
        None
    };

    let mut analytic = if term == LossTerm::Rec {
        let r = reconstruction_loss(&isolated, views)?;
        let mut grads = total_loss_with(&isolated, views, h_batch, frozen.as_deref())?.1;
        grads.encoders = r.encoders;
        grads.decoders = r.decoders;
        grads
    } else {
        total_loss_with(&isolated, views, h_batch, frozen.as_deref())?.1
    };
    if let Some(tamper) = tamper {
        tamper(&mut analytic);
    }
    let analytic = analytic.flatten();

    let mut probe = isolated.clone();
    let rows = h_batch.rows();
    let cols = h_batch.cols();
    finite_diff_check(
        |p| {
            probe.set_flat_params(&p[..n_params])?;
            let h = Matrix::from_vec(rows, cols, p[n_params..].to_vec())?;
            let loss = objective::<DoubleDouble>(&probe, views, &h, frozen.as_deref());
            Ok(if term == LossTerm::Rec { loss.rec } else { loss.total })
        },
        &params,
        &analytic,
        step,
    )
}

/// Human-readable location of a flat parameter index.
pub fn describe_index(model: &ScmrlModel, index: usize) -> String {
    let mut offset = 0;
    let m = model.m();
    for (n, net) in model.networks().enumerate() {
        let size = net.num_params();
        if index < offset + size {
            let (role, v) = match n / m {
                0 => ("encoder", n % m),
                1 => ("decoder", n % m),
                2 => ("degrader", n % m),
                _ => ("classifier", 0),
            };
            let mut local = index - offset;
            for (l, layer) in net.layers().iter().enumerate() {
                let w = layer.weight.as_slice().len();
                if local < w {
                    return format!("{role}[{v}].layer[{l}].weight[{}][{}]", local / layer.out_dim(), local % layer.out_dim());
                }
                local -= w;
                if local < layer.bias.len() {
                    return format!("{role}[{v}].layer[{l}].bias[{local}]");
                }
                local -= layer.bias.len();
            }
        }
        offset += size;
    }
    let local = index - offset;
    let d = model.config().latent_dim;
    format!("H.batch_row[{}][{}]", local / d, local % d)
}

/// Flips the sign of one classifier weight gradient; a negative control.
pub fn flip_classifier_sign(grads: &mut ScmrlGrads) {
    let first: &mut MlpGrads = &mut grads.classifier;
    first.weights[0].scale(-1.0);
}

/// Shape of the randomized instance used for gradient verification.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyInstanceSpec {
    pub batch: usize,
    pub input_dims: Vec<usize>,
    pub latent_dim: usize,
    pub k: usize,
    pub hidden: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau: f64,
    pub stop_grad_degradation: bool,
}

impl Default for TinyInstanceSpec {
    fn default() -> Self {
        Self {
            batch: 6,
            input_dims: vec![5, 6],
            latent_dim: 4,
            k: 3,
            hidden: 5,
            lambda1: 1.0,
            lambda2: 1.0,
            tau: 0.5,
            stop_grad_degradation: true,
        }
    }
}

/// A small model with random weights and biases, random inputs and random
/// `H` rows. Biases are drawn away from zero so that no rectifier input sits
/// exactly on its kink (a dead layer would otherwise feed exact zeros forward).
pub fn random_instance(spec: &TinyInstanceSpec, seed: u64) -> Result<(ScmrlModel, Vec<Matrix>, Matrix)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ScmrlConfig {
        input_dims: spec.input_dims.clone(),
        latent_dim: spec.latent_dim,
        k: spec.k,
        encoder_hidden: vec![spec.hidden],
        degrader_hidden: vec![spec.hidden],
        classifier_hidden: vec![spec.hidden],
        lambda1: spec.lambda1,
        lambda2: spec.lambda2,
        tau: spec.tau,
        stop_grad_degradation: spec.stop_grad_degradation,
        joint_reconstruction: true,
    };
    let mut model = ScmrlModel::new(cfg, spec.batch, &mut rng)?;
    let mut params = model.flat_params();
    for p in params.iter_mut() {
        if *p == 0.0 {
            *p = rng.random_range(-0.5..0.5);
        }
    }
    model.set_flat_params(&params)?;
    let views = spec
        .input_dims
        .iter()
        .map(|&d| Matrix::from_vec(spec.batch, d, (0..spec.batch * d).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect::<Result<Vec<_>>>()?;
    let d = spec.latent_dim;
    let h = Matrix::from_vec(spec.batch, d, (0..spec.batch * d).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    Ok((model, views, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_term_passes_with_and_without_detached_targets() {
        for seed in 0..6 {
            for stop in [true, false] {
                let spec = TinyInstanceSpec { stop_grad_degradation: stop, ..TinyInstanceSpec::default() };
                let (model, views, h) = random_instance(&spec, seed).unwrap();
                for term in LossTerm::ALL {
                    let r = check_term(&model, &views, &h, term, 1e-6, None).unwrap();
                    assert!(r.max_rel_error < 1e-4, "seed {seed} stop {stop} {term}: {r:?} at {}", describe_index(&model, r.worst_index));
                }
            }
        }
    }

    #[test]
    fn injected_sign_error_is_caught() {
        let (model, views, h) = random_instance(&TinyInstanceSpec::default(), 42).unwrap();
        let r = check_term(&model, &views, &h, LossTerm::Sem, 1e-6, Some(&flip_classifier_sign)).unwrap();
        assert!(r.max_rel_error > 1e-2);
        assert!(describe_index(&model, r.worst_index).starts_with("classifier"));
    }
}
