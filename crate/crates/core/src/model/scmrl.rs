//! The full computation graph: per-view autoencoders, degradation networks,
//! the shared classifier and the trainable unified representation `H`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ScmrlConfig;
use super::semantic::{semantic_loss, SemanticMatrix};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Mlp, MlpGrads, OutputActivation};

#[derive(Debug, Clone, PartialEq)]
pub struct ScmrlModel {
    config: ScmrlConfig,
    pub encoders: Vec<Mlp>,
    pub decoders: Vec<Mlp>,
    pub degraders: Vec<Mlp>,
    pub classifier: Mlp,
    /// One trainable row per sample, `N x latent_dim`.
    pub h: Matrix,
}

/// Per-term loss values for one batch (or an aggregate of batches).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rec: f64,
    pub deg: f64,
    pub sem: f64,
    pub total: f64,
    pub per_view_rec: Vec<f64>,
    pub l_sum: f64,
    pub l_reg: f64,
}

/// Gradients for every trainable tensor touched by a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ScmrlGrads {
    pub encoders: Vec<MlpGrads>,
    pub decoders: Vec<MlpGrads>,
    pub degraders: Vec<MlpGrads>,
    pub classifier: MlpGrads,
    /// Gradient for the batch rows of `H`, in batch order.
    pub h_rows: Matrix,
}

impl ScmrlGrads {
    fn zeros(model: &ScmrlModel, batch: usize) -> Self {
        Self {
            encoders: model.encoders.iter().map(MlpGrads::zeros_like).collect(),
            decoders: model.decoders.iter().map(MlpGrads::zeros_like).collect(),
            degraders: model.degraders.iter().map(MlpGrads::zeros_like).collect(),
            classifier: MlpGrads::zeros_like(&model.classifier),
            h_rows: Matrix::zeros(batch, model.config.latent_dim),
        }
    }

    /// Flattened in [`ScmrlModel::flat_params`] order followed by `h_rows`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in self.encoders.iter().chain(&self.decoders).chain(&self.degraders) {
            g.flatten_into(&mut out);
        }
        self.classifier.flatten_into(&mut out);
        out.extend_from_slice(self.h_rows.as_slice());
        out
    }
}

impl ScmrlModel {
    /// Freshly initialised networks and an all-zero `H` with `n_samples` rows.
    pub fn new<R: Rng + ?Sized>(config: ScmrlConfig, n_samples: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let m = config.m();
        let mut encoders = Vec::with_capacity(m);
        let mut decoders = Vec::with_capacity(m);
        let mut degraders = Vec::with_capacity(m);
        for v in 0..m {
            encoders.push(Mlp::new(&config.encoder_dims(v), OutputActivation::Identity, rng)?);
            decoders.push(Mlp::new(&config.decoder_dims(v), OutputActivation::Identity, rng)?);
        }
        for _ in 0..m {
            degraders.push(Mlp::new(&config.degrader_dims(), OutputActivation::Identity, rng)?);
        }
        let classifier = Mlp::new(&config.classifier_dims(), OutputActivation::Softmax, rng)?;
        let h = Matrix::zeros(n_samples, config.latent_dim);
        Ok(Self {
            config,
            encoders,
            decoders,
            degraders,
            classifier,
            h,
        })
    }

    /// Assembles a model from explicit parts, checking every width.
    pub fn from_parts(
        config: ScmrlConfig,
        encoders: Vec<Mlp>,
        decoders: Vec<Mlp>,
        degraders: Vec<Mlp>,
        classifier: Mlp,
        h: Matrix,
    ) -> Result<Self> {
        config.validate()?;
        let m = config.m();
        let d = config.latent_dim;
        let counts = [encoders.len(), decoders.len(), degraders.len()];
        if counts.iter().any(|&c| c != m) {
            return Err(Error::shape("ScmrlModel::from_parts", format!("{m} networks per role"), format!("{counts:?}")));
        }
        for v in 0..m {
            let checks = [
                (&encoders[v], config.input_dims[v], d, "encoder"),
                (&decoders[v], d, config.input_dims[v], "decoder"),
                (&degraders[v], d, d, "degrader"),
            ];
            for (net, i, o, role) in checks {
                if net.in_dim() != i || net.out_dim() != o {
                    return Err(Error::shape(
                        "ScmrlModel::from_parts",
                        format!("{role} {v} mapping {i} -> {o}"),
                        format!("{} -> {}", net.in_dim(), net.out_dim()),
                    ));
                }
            }
        }
        if classifier.in_dim() != d || classifier.out_dim() != config.k || classifier.output_activation() != OutputActivation::Softmax {
            return Err(Error::shape(
                "ScmrlModel::from_parts",
                format!("softmax classifier {d} -> {}", config.k),
                format!("{} -> {}", classifier.in_dim(), classifier.out_dim()),
            ));
        }
        if h.cols() != d {
            return Err(Error::shape("ScmrlModel::from_parts", format!("H with {d} columns"), h.cols()));
        }
        Ok(Self {
            config,
            encoders,
            decoders,
            degraders,
            classifier,
            h,
        })
    }

    pub fn config(&self) -> &ScmrlConfig {
        &self.config
    }

    /// Replaces the objective weights without touching the architecture.
    pub fn set_objective(&mut self, lambda1: f64, lambda2: f64, tau: f64, joint_reconstruction: bool) -> Result<()> {
        let cfg = ScmrlConfig {
            lambda1,
            lambda2,
            tau,
            joint_reconstruction,
            ..self.config.clone()
        };
        cfg.validate()?;
        self.config = cfg;
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.config.m()
    }

    pub fn n_samples(&self) -> usize {
        self.h.rows()
    }

    fn check_view(&self, view: usize) -> Result<()> {
        if view >= self.m() {
            return Err(Error::shape("view index", format!("< {}", self.m()), view));
        }
        Ok(())
    }

    /// Latent codes of one view.
    pub fn encode(&self, view: usize, x: &Matrix) -> Result<Matrix> {
        self.check_view(view)?;
        self.encoders[view].predict(x)
    }

    pub fn encode_all(&self, views: &[Matrix]) -> Result<Vec<Matrix>> {
        if views.len() != self.m() {
            return Err(Error::shape("encode_all", format!("{} views", self.m()), views.len()));
        }
        views.iter().enumerate().map(|(v, x)| self.encode(v, x)).collect()
    }

    /// Pseudo-label matrix of a batch of latent rows. `head` labels the
    /// output; use `m` for the unified representation.
    pub fn classify(&self, rows: &Matrix, head: usize) -> Result<SemanticMatrix> {
        if head > self.m() {
            return Err(Error::shape("classify head", format!("<= {}", self.m()), head));
        }
        SemanticMatrix::new(self.classifier.predict(rows)?, head)
    }

    /// Sets `H` to the per-sample mean of the encoded views.
    pub fn initialize_h(&mut self, views: &[Matrix]) -> Result<()> {
        let zs = self.encode_all(views)?;
        let h = init_unified(&zs)?;
        if h.rows() != self.h.rows() {
            return Err(Error::shape("initialize_h", format!("{} samples", self.h.rows()), h.rows()));
        }
        self.h = h;
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.networks().map(Mlp::num_params).sum()
    }

    /// Encoders, decoders, degraders, then the classifier.
    pub fn networks(&self) -> impl Iterator<Item = &Mlp> {
        self.encoders
            .iter()
            .chain(&self.decoders)
            .chain(&self.degraders)
            .chain(std::iter::once(&self.classifier))
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for net in self.networks() {
            out.extend(net.flat_params());
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<usize> {
        let mut offset = 0;
        for net in self
            .encoders
            .iter_mut()
            .chain(&mut self.decoders)
            .chain(&mut self.degraders)
            .chain(std::iter::once(&mut self.classifier))
        {
            offset += net.set_flat_params(&values[offset..])?;
        }
        Ok(offset)
    }
}

/// Element-wise mean of the per-view codes, summed in view order.
pub fn init_unified(zs: &[Matrix]) -> Result<Matrix> {
    if zs.len() < 2 {
        return Err(Error::Config(format!("need at least two views, got {}", zs.len())));
    }
    let shape = zs[0].shape();
    if let Some(bad) = zs.iter().find(|z| z.shape() != shape) {
        return Err(Error::shape(
            "init_unified",
            format!("{}x{}", shape.0, shape.1),
            format!("{}x{}", bad.rows(), bad.cols()),
        ));
    }
    let mut h = zs[0].clone();
    for z in &zs[1..] {
        h.add_assign(z)?;
    }
    let m = zs.len() as f64;
    h.as_mut_slice().iter_mut().for_each(|v| *v /= m);
    Ok(h)
}

fn check_batch(model: &ScmrlModel, views: &[Matrix]) -> Result<usize> {
    if views.len() != model.m() {
        return Err(Error::shape("batch views", format!("{} views", model.m()), views.len()));
    }
    let rows = views[0].rows();
    if let Some(bad) = views.iter().find(|x| x.rows() != rows) {
        return Err(Error::shape("batch views", format!("{rows} rows in every view"), bad.rows()));
    }
    if rows == 0 {
        return Err(Error::shape("batch views", "at least one row", 0));
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ReconstructionOutput {
    /// Batch mean of the summed squared reconstruction errors.
    pub value: f64,
    pub per_view: Vec<f64>,
    pub encoders: Vec<MlpGrads>,
    pub decoders: Vec<MlpGrads>,
}

/// Within-view reconstruction loss with gradients for encoders and decoders.
pub fn reconstruction_loss(model: &ScmrlModel, views: &[Matrix]) -> Result<ReconstructionOutput> {
    let batch = check_batch(model, views)?;
    let inv_b = 1.0 / batch as f64;
    let mut out = ReconstructionOutput {
        value: 0.0,
        per_view: Vec::with_capacity(views.len()),
        encoders: Vec::with_capacity(views.len()),
        decoders: Vec::with_capacity(views.len()),
    };
    for (v, x) in views.iter().enumerate() {
        let (z, enc_tape) = model.encoders[v].forward(x)?;
        let (xhat, dec_tape) = model.decoders[v].forward(&z)?;
        let mut resid = xhat.sub(x)?;
        let value = resid.sum_squares() * inv_b;
        if !value.is_finite() {
            return Err(Error::numeric(format!("reconstruction loss of view {v}")));
        }
        resid.scale(2.0 * inv_b);
        let (dec_g, dz) = model.decoders[v].backward(dec_tape, &resid)?;
        let (enc_g, _) = model.encoders[v].backward(enc_tape, &dz)?;
        out.value += value;
        out.per_view.push(value);
        out.encoders.push(enc_g);
        out.decoders.push(dec_g);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct DegradationOutput {
    pub value: f64,
    pub degraders: Vec<MlpGrads>,
    pub h_rows: Matrix,
    /// Gradient with respect to each view's codes (used when the codes are
    /// not treated as constant targets).
    pub codes: Vec<Matrix>,
}

/// Degradation loss: every view's code should be recoverable from `H`.
pub fn degradation_loss(model: &ScmrlModel, zs: &[Matrix], h_batch: &Matrix) -> Result<DegradationOutput> {
    if zs.len() != model.m() {
        return Err(Error::shape("degradation_loss", format!("{} views", model.m()), zs.len()));
    }
    let d = model.config.latent_dim;
    for z in zs {
        if z.shape() != h_batch.shape() || z.cols() != d {
            return Err(Error::shape(
                "degradation_loss",
                format!("{}x{d}", h_batch.rows()),
                format!("{}x{}", z.rows(), z.cols()),
            ));
        }
    }
    let inv_b = 1.0 / h_batch.rows() as f64;
    let mut out = DegradationOutput {
        value: 0.0,
        degraders: Vec::with_capacity(zs.len()),
        h_rows: Matrix::zeros(h_batch.rows(), d),
        codes: Vec::with_capacity(zs.len()),
    };
    for (v, z) in zs.iter().enumerate() {
        let (g, tape) = model.degraders[v].forward(h_batch)?;
        let mut resid = g.sub(z)?;
        let value = resid.sum_squares() * inv_b;
        if !value.is_finite() {
            return Err(Error::numeric(format!("degradation loss of view {v}")));
        }
        out.value += value;
        resid.scale(2.0 * inv_b);
        let (grads, dh) = model.degraders[v].backward(tape, &resid)?;
        out.h_rows.add_assign(&dh)?;
        out.codes.push(resid.scaled(-1.0));
        out.degraders.push(grads);
    }
    Ok(out)
}

/// Evaluates the full objective on a batch and returns per-term values plus
/// gradients for every trainable tensor.
///
/// `h_batch` holds the rows of `H` for the batch samples, aligned with the
/// view rows. `deg_targets`, when given, replaces the per-view codes used as
/// degradation targets; the gradient oracle uses it to hold the targets fixed
/// while probing encoder weights.
pub fn total_loss_with(
    model: &ScmrlModel,
    views: &[Matrix],
    h_batch: &Matrix,
    deg_targets: Option<&[Matrix]>,
) -> Result<(LossBreakdown, ScmrlGrads)> {
    let batch = check_batch(model, views)?;
    if h_batch.shape() != (batch, model.config.latent_dim) {
        return Err(Error::shape(
            "total_loss H rows",
            format!("{batch}x{}", model.config.latent_dim),
            format!("{}x{}", h_batch.rows(), h_batch.cols()),
        ));
    }
    let cfg = &model.config;
    let m = model.m();
    let inv_b = 1.0 / batch as f64;
    let rec_weight = if cfg.joint_reconstruction { 1.0 } else { 0.0 };
    let mut grads = ScmrlGrads::zeros(model, batch);
    let mut breakdown = LossBreakdown::default();

    let mut zs = Vec::with_capacity(m);
    let mut enc_tapes = Vec::with_capacity(m);
    let mut dz: Vec<Matrix> = Vec::with_capacity(m);
    for (v, x) in views.iter().enumerate() {
        let (z, tape) = model.encoders[v].forward(x)?;
        dz.push(Matrix::zeros(z.rows(), z.cols()));
        zs.push(z);
        enc_tapes.push(tape);
    }

    // Reconstruction.
    for (v, x) in views.iter().enumerate() {
        let (xhat, tape) = model.decoders[v].forward(&zs[v])?;
        let mut resid = xhat.sub(x)?;
        let value = resid.sum_squares() * inv_b;
        breakdown.per_view_rec.push(value);
        breakdown.rec += value;
        if rec_weight != 0.0 {
            resid.scale(2.0 * inv_b * rec_weight);
            let (g, d) = model.decoders[v].backward(tape, &resid)?;
            grads.decoders[v] = g;
            dz[v].add_assign(&d)?;
        }
    }

    // Degradation.
    let targets = deg_targets.unwrap_or(&zs);
    let deg = degradation_loss(model, targets, h_batch)?;
    breakdown.deg = deg.value;
    if cfg.lambda1 != 0.0 {
        for (slot, mut g) in grads.degraders.iter_mut().zip(deg.degraders) {
            scale_grads(&mut g, cfg.lambda1);
            *slot = g;
        }
        grads.h_rows.axpy(cfg.lambda1, &deg.h_rows)?;
        if !cfg.stop_grad_degradation && deg_targets.is_none() {
            for (d, c) in dz.iter_mut().zip(&deg.codes) {
                d.axpy(cfg.lambda1, c)?;
            }
        }
    }

    // Semantic consistency over m view heads plus the unified head.
    let mut heads = Vec::with_capacity(m + 1);
    let mut cls_tapes = Vec::with_capacity(m + 1);
    for input in zs.iter().chain(std::iter::once(h_batch)) {
        let (q, tape) = model.classifier.forward(input)?;
        heads.push(q);
        cls_tapes.push(tape);
    }
    let head_refs: Vec<&Matrix> = heads.iter().collect();
    let sem = semantic_loss(&head_refs, cfg.tau)?;
    breakdown.sem = sem.value;
    breakdown.l_sum = sem.l_sum;
    breakdown.l_reg = sem.l_reg;
    if cfg.lambda2 != 0.0 {
        for (idx, (tape, mut dq)) in cls_tapes.into_iter().zip(sem.grads).enumerate() {
            dq.scale(cfg.lambda2);
            let (g, dinput) = model.classifier.backward(tape, &dq)?;
            grads.classifier.add_assign(&g)?;
            if idx < m {
                dz[idx].add_assign(&dinput)?;
            } else {
                grads.h_rows.add_assign(&dinput)?;
            }
        }
    }

    for (v, (tape, d)) in enc_tapes.into_iter().zip(&dz).enumerate() {
        let (g, _) = model.encoders[v].backward(tape, d)?;
        grads.encoders[v] = g;
    }

    breakdown.total = rec_weight * breakdown.rec + cfg.lambda1 * breakdown.deg + cfg.lambda2 * breakdown.sem;
    if !breakdown.total.is_finite() {
        return Err(Error::numeric("total loss"));
    }
    Ok((breakdown, grads))
}

/// [`total_loss_with`] for the batch rows `indices` of the model's own `H`.
pub fn total_loss(model: &ScmrlModel, views: &[Matrix], indices: &[usize]) -> Result<(LossBreakdown, ScmrlGrads)> {
    if let Some(&bad) = indices.iter().find(|&&i| i >= model.n_samples()) {
        return Err(Error::shape("total_loss indices", format!("< {}", model.n_samples()), bad));
    }
    let h_batch = model.h.select_rows(indices);
    total_loss_with(model, views, &h_batch, None)
}

fn scale_grads(g: &mut MlpGrads, alpha: f64) {
    for w in &mut g.weights {
        w.scale(alpha);
    }
    for b in &mut g.biases {
        b.iter_mut().for_each(|v| *v *= alpha);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> ScmrlConfig {
        ScmrlConfig {
            input_dims: vec![3, 4],
            latent_dim: 2,
            k: 2,
            encoder_hidden: vec![5],
            degrader_hidden: vec![3],
            classifier_hidden: vec![4],
            ..ScmrlConfig::default()
        }
    }

    fn identity_net(d: usize, output: OutputActivation) -> Mlp {
        Mlp::from_layers(vec![Dense { weight: Matrix::identity(d), bias: vec![0.0; d] }], output).unwrap()
    }

    /// Two views of width 2, latent 2, every network a single identity layer.
    fn identity_model(n: usize) -> ScmrlModel {
        let cfg = ScmrlConfig {
            input_dims: vec![2, 2],
            latent_dim: 2,
            encoder_hidden: vec![],
            degrader_hidden: vec![],
            classifier_hidden: vec![],
            ..ScmrlConfig::default()
        };
        let id = || identity_net(2, OutputActivation::Identity);
        ScmrlModel::from_parts(
            cfg,
            vec![id(), id()],
            vec![id(), id()],
            vec![id(), id()],
            identity_net(2, OutputActivation::Softmax),
            Matrix::zeros(n, 2),
        )
        .unwrap()
    }

    #[test]
    fn identity_encoder_and_zero_input() {
        let model = identity_model(2);
        let x = Matrix::from_rows(&[[1.0, 2.0], [0.5, 0.0]]).unwrap();
        assert_eq!(model.encode(0, &x).unwrap(), x);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let random = ScmrlModel::new(small_config(), 3, &mut rng).unwrap();
        let z = random.encode(1, &Matrix::zeros(2, 4)).unwrap();
        assert!(z.as_slice().iter().all(|v| *v == 0.0));
        assert!(random.encode(0, &Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn encoding_leaves_parameters_untouched() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = ScmrlModel::new(small_config(), 3, &mut rng).unwrap();
        let before = model.flat_params();
        let mut x = Matrix::from_rows(&[[0.1, 0.2, 0.3]]).unwrap();
        let a = model.encode(0, &x).unwrap();
        x.set(0, 1, 0.9);
        let b = model.encode(0, &x).unwrap();
        assert_ne!(a, b);
        assert_eq!(model.flat_params(), before);
    }

    #[test]
    fn perfect_autoencoder_has_zero_reconstruction() {
        let model = identity_model(2);
        let x = Matrix::from_rows(&[[1.0, 2.0], [0.5, 0.0]]).unwrap();
        let r = reconstruction_loss(&model, &[x.clone(), x]).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.encoders.iter().all(MlpGrads::is_zero));
    }

    #[test]
    fn reconstruction_hand_cases() {
        // Zero decoder gives xhat = 0, so the loss is |x|^2 per view.
        let mut model = identity_model(1);
        for l in model.decoders[0].layers_mut() {
            l.weight = Matrix::zeros(2, 2);
        }
        let x1 = Matrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let r = reconstruction_loss(&model, &[x1.clone(), Matrix::zeros(1, 2)]).unwrap();
        assert_eq!(r.value, 1.0);
        // Views contributing 1.0 and 2.5.
        for l in model.decoders[1].layers_mut() {
            l.weight = Matrix::zeros(2, 2);
        }
        let x2 = Matrix::from_rows(&[[1.5, 0.5]]).unwrap();
        let r = reconstruction_loss(&model, &[x1, x2]).unwrap();
        assert_eq!(r.per_view, vec![1.0, 2.5]);
        assert_eq!(r.value, 3.5);
    }

    #[test]
    fn degradation_hand_cases() {
        let model = identity_model(1);
        let z = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let exact = degradation_loss(&model, &[z.clone(), z.clone()], &z).unwrap();
        assert_eq!(exact.value, 0.0);
        let off = degradation_loss(&model, &[z.clone(), z], &Matrix::zeros(1, 2)).unwrap();
        // Each view: |[1,1] - G([0,0])|^2 = 2.
        assert_eq!(off.value, 4.0);
    }

    #[test]
    fn unified_initialization_is_view_mean() {
        let z1 = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let z2 = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        assert_eq!(init_unified(&[z1.clone(), z2]).unwrap().row(0), &[2.0, 3.0]);
        assert_eq!(init_unified(&[z1.clone(), z1.clone()]).unwrap(), z1);
        assert!(init_unified(&[z1.clone()]).is_err());
        assert!(init_unified(&[z1, Matrix::zeros(2, 2)]).is_err());
    }

    #[test]
    fn zero_final_classifier_layer_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut model = ScmrlModel::new(ScmrlConfig { k: 3, ..small_config() }, 2, &mut rng).unwrap();
        let last = model.classifier.layers().len() - 1;
        model.classifier.layers_mut()[last].weight = Matrix::zeros(4, 3);
        let rows = Matrix::from_rows(&[[0.3, -1.0], [0.3, -1.0], [2.0, 5.0]]).unwrap();
        let q = model.classify(&rows, 2).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((q.get(r, c) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        assert_eq!(q.row(0), q.row(1));
    }

    #[test]
    fn disabled_terms_leave_only_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut model = ScmrlModel::new(small_config(), 4, &mut rng).unwrap();
        model.set_objective(0.0, 0.0, 0.5, true).unwrap();
        let x1 = Matrix::from_vec(4, 3, (0..12).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let x2 = Matrix::from_vec(4, 4, (0..16).map(|i| (i as f64 * 0.7).cos()).collect()).unwrap();
        let views = [x1, x2];
        model.initialize_h(&views).unwrap();
        let (b, g) = total_loss(&model, &views, &[0, 1, 2, 3]).unwrap();
        assert_eq!(b.total, b.rec);
        assert!(g.degraders.iter().all(MlpGrads::is_zero));
        assert!(g.classifier.is_zero());
        assert!(b.deg > 0.0);
    }

    #[test]
    fn flat_params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = ScmrlModel::new(small_config(), 2, &mut rng).unwrap();
        let mut other = ScmrlModel::new(small_config(), 2, &mut rng).unwrap();
        assert_ne!(model.flat_params(), other.flat_params());
        other.set_flat_params(&model.flat_params()).unwrap();
        assert_eq!(model.flat_params(), other.flat_params());
    }
}
