//! Brute-force evaluation of the objective, generic over precision.
//!
//! Every cosine is recomputed from scratch inside the class loops and the
//! contrastive denominator is summed over all columns with `e^{1/tau}`
//! subtracted afterwards. Nothing here is shared with the optimized path.

use super::scmrl::ScmrlModel;
use super::semantic::{NORM_FLOOR, PROB_FLOOR};
use crate::nn::reference::{lift, mlp_forward, Rows};
use crate::nn::{Matrix, Real};

#[derive(Debug, Clone, Copy)]
pub struct ReferenceLoss<R> {
    pub rec: R,
    pub deg: R,
    pub sem: R,
    pub l_sum: R,
    pub l_reg: R,
    pub total: R,
}

fn cosine<R: Real>(a: &Rows<R>, b: &Rows<R>, c: usize, w: usize) -> R {
    let (mut dot, mut na, mut nb) = (R::zero(), R::zero(), R::zero());
    for (ra, rb) in a.iter().zip(b) {
        dot = dot + ra[c] * rb[w];
        na = na + ra[c] * ra[c];
        nb = nb + rb[w] * rb[w];
    }
    dot / (na.sqrt() * nb.sqrt()).max(R::from_f64(NORM_FLOOR))
}

/// `l_two(i, j)` and `f(i, j, c)` for every class.
pub fn pair_loss<R: Real>(qi: &Rows<R>, qj: &Rows<R>, tau: f64) -> (R, Vec<R>) {
    let k = qi[0].len();
    let t = R::from_f64(tau);
    let e_self = (R::from_f64(1.0) / t).exp();
    let mut value = R::zero();
    let mut fs = Vec::with_capacity(k);
    for c in 0..k {
        let mut denom = R::zero();
        for w in 0..k {
            denom = denom + (cosine(qi, qi, c, w) / t).exp() + (cosine(qi, qj, c, w) / t).exp();
        }
        denom = denom - e_self;
        let f = (cosine(qi, qj, c, c) / t).exp() / denom;
        value = value - f.ln();
        fs.push(f);
    }
    (value, fs)
}

/// `(l_sum, l_reg)` over all heads.
pub fn semantic_terms<R: Real>(heads: &[Rows<R>], tau: f64) -> (R, R) {
    let k = heads[0][0].len();
    let half_over_k = R::from_f64(0.5 / k as f64);
    let mut l_sum = R::zero();
    for (i, qi) in heads.iter().enumerate() {
        for (j, qj) in heads.iter().enumerate() {
            if i != j {
                l_sum = l_sum + half_over_k * pair_loss(qi, qj, tau).0;
            }
        }
    }
    let mut l_reg = R::zero();
    for q in heads {
        let inv_b = R::from_f64(1.0 / q.len() as f64);
        for c in 0..k {
            let mut p = R::zero();
            for row in q {
                p = p + row[c];
            }
            p = p * inv_b;
            l_reg = l_reg + p * p.max(R::from_f64(PROB_FLOOR)).ln();
        }
    }
    (l_sum, l_reg)
}

fn mean_squared_error<R: Real>(a: &Rows<R>, b: &Rows<R>) -> R {
    let mut s = R::zero();
    for (ra, rb) in a.iter().zip(b) {
        for (&x, &y) in ra.iter().zip(rb) {
            s = s + (x - y) * (x - y);
        }
    }
    s / R::from_f64(a.len() as f64)
}

/// Objective on one batch. `deg_targets` replaces the encoded views as the
/// degradation targets when given.
pub fn objective<R: Real>(
    model: &ScmrlModel,
    views: &[Matrix],
    h_batch: &Matrix,
    deg_targets: Option<&[Matrix]>,
) -> ReferenceLoss<R> {
    let cfg = model.config();
    let xs: Vec<Rows<R>> = views.iter().map(lift).collect();
    let zs: Vec<Rows<R>> = xs.iter().zip(&model.encoders).map(|(x, e)| mlp_forward(e, x)).collect();
    let h: Rows<R> = lift(h_batch);

    let mut rec = R::zero();
    for ((x, z), dec) in xs.iter().zip(&zs).zip(&model.decoders) {
        rec = rec + mean_squared_error(&mlp_forward(dec, z), x);
    }

    let targets: Vec<Rows<R>> = match deg_targets {
        Some(t) => t.iter().map(lift).collect(),
        None => zs.clone(),
    };
    let mut deg = R::zero();
    for (t, g) in targets.iter().zip(&model.degraders) {
        deg = deg + mean_squared_error(&mlp_forward(g, &h), t);
    }

    let heads: Vec<Rows<R>> = zs.iter().chain(std::iter::once(&h)).map(|x| mlp_forward(&model.classifier, x)).collect();
    let (l_sum, l_reg) = semantic_terms(&heads, cfg.tau);
    let sem = l_sum + l_reg;

    let rec_weight = if cfg.joint_reconstruction { 1.0 } else { 0.0 };
    let total = R::from_f64(rec_weight) * rec + R::from_f64(cfg.lambda1) * deg + R::from_f64(cfg.lambda2) * sem;
    ReferenceLoss { rec, deg, sem, l_sum, l_reg, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gradcheck::{random_instance, TinyInstanceSpec};
    use crate::model::scmrl::total_loss_with;
    use crate::model::semantic::pairwise_contrastive_loss;
    use crate::nn::DoubleDouble;

    #[test]
    fn identity_pair_closed_form() {
        let q = lift::<DoubleDouble>(&Matrix::identity(2));
        let (v, f) = pair_loss(&q, &q, 0.5);
        let expected = 2.0 * (1.0 + 2.0 * (-2.0f64).exp()).ln();
        assert!((v.to_f64() - expected).abs() < 1e-14);
        assert!(f.iter().all(|f| f.to_f64() > 0.0 && f.to_f64() <= 1.0));
        let fast = pairwise_contrastive_loss(&Matrix::identity(2), &Matrix::identity(2), 0.5).unwrap();
        assert!((fast.value - v.to_f64()).abs() < 1e-12);
    }

    #[test]
    fn matches_optimized_objective() {
        for seed in 0..3 {
            let (model, views, h) = random_instance(&TinyInstanceSpec::default(), seed).unwrap();
            let (fast, _) = total_loss_with(&model, &views, &h, None).unwrap();
            let slow = objective::<f64>(&model, &views, &h, None);
            for (a, b) in [(fast.rec, slow.rec), (fast.deg, slow.deg), (fast.sem, slow.sem), (fast.total, slow.total)] {
                assert!((a - b).abs() < 1e-10, "seed {seed}: {a} vs {b}");
            }
        }
    }
}
