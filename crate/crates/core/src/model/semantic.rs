//! Column-wise semantic contrastive objective over pseudo-label matrices.
//!
//! Every head contributes a `batch x k` row-stochastic matrix `Q`. Its columns
//! (one per class, each of batch length) are the units being contrasted:
//! the same class column across two heads is a positive pair, every other
//! column pairing is a negative.
//!
//! The within-head self term `exp(cos(q_c, q_c)/tau)` and the `e^{1/tau}`
//! correction cancel exactly whenever `q_c` is non-zero, so the denominator is
//! accumulated without either. This keeps `f(i, j, c)` in `(0, 1]` even when
//! a class column vanishes, where the literal form would go negative.

use std::ops::Deref;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Floor applied to the product of column norms in the cosine denominator.
pub const NORM_FLOOR: f64 = 1e-12;
/// Floor applied to mean class probabilities before the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Pseudo-label matrix for one head. Head `m` (zero-based) is the unified
/// representation; heads `0..m` are the views.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticMatrix {
    q: Matrix,
    head: usize,
}

impl SemanticMatrix {
    /// Wraps `q` after checking that it is row-stochastic within 1e-9.
    pub fn new(q: Matrix, head: usize) -> Result<Self> {
        for (r, row) in q.iter_rows().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Invalid(format!(
                    "row {r} of head {head} is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(Self { q, head })
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn into_matrix(self) -> Matrix {
        self.q
    }
}

impl Deref for SemanticMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.q
    }
}

/// Cosine similarity of column `c` of `a` and column `w` of `b`.
pub fn column_cosine(a: &Matrix, b: &Matrix, c: usize, w: usize) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for r in 0..a.rows() {
        let (x, y) = (a.get(r, c), b.get(r, w));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    dot / (na.sqrt() * nb.sqrt()).max(NORM_FLOOR)
}

/// Column norms plus the cosine matrices needed by the contrastive terms.
struct CosineTable {
    k: usize,
    norms: Vec<Vec<f64>>,
    /// `cos[a][b]` is the k x k matrix of cosines between columns of heads a and b,
    /// filled lazily for the ordered pairs that are used.
    cos: Vec<Vec<Option<Matrix>>>,
    denom: Vec<Vec<Option<Matrix>>>,
}

impl CosineTable {
    fn new(heads: &[&Matrix]) -> Self {
        let k = heads[0].cols();
        let norms = heads
            .iter()
            .map(|q| {
                let mut n = vec![0.0; k];
                for row in q.iter_rows() {
                    for (acc, v) in n.iter_mut().zip(row) {
                        *acc += v * v;
                    }
                }
                n.iter_mut().for_each(|v| *v = v.sqrt());
                n
            })
            .collect();
        let h = heads.len();
        Self {
            k,
            norms,
            cos: vec![vec![None; h]; h],
            denom: vec![vec![None; h]; h],
        }
    }

    fn ensure(&mut self, heads: &[&Matrix], a: usize, b: usize) -> Result<()> {
        if self.cos[a][b].is_some() {
            return Ok(());
        }
        let mut dots = heads[a].t_matmul(heads[b])?;
        let mut denom = Matrix::zeros(self.k, self.k);
        for c in 0..self.k {
            for w in 0..self.k {
                let d = (self.norms[a][c] * self.norms[b][w]).max(NORM_FLOOR);
                denom.set(c, w, d);
                dots.set(c, w, dots.get(c, w) / d);
            }
        }
        self.cos[a][b] = Some(dots);
        self.denom[a][b] = Some(denom);
        Ok(())
    }

    fn get(&self, a: usize, b: usize) -> &Matrix {
        self.cos[a][b].as_ref().expect("cosines computed before use")
    }
}

/// Computes `l_two(i, j)` from the table and adds `scale * dl/dcos` into `dcos`.
/// Returns the loss value and `f(i, j, c)` for each class.
fn pair_term(
    table: &CosineTable,
    i: usize,
    j: usize,
    tau: f64,
    scale: f64,
    dcos: &mut [Vec<Option<Matrix>>],
) -> (f64, Vec<f64>) {
    let k = table.k;
    let within = table.get(i, i);
    let across = table.get(i, j);
    let mut value = 0.0;
    let mut fs = Vec::with_capacity(k);
    let mut d_within = Matrix::zeros(k, k);
    let mut d_across = Matrix::zeros(k, k);
    for c in 0..k {
        let mut denom = 0.0;
        for w in 0..k {
            if w != c {
                denom += (within.get(c, w) / tau).exp();
            }
            denom += (across.get(c, w) / tau).exp();
        }
        let numer = (across.get(c, c) / tau).exp();
        fs.push(numer / denom);
        value += denom.ln() - across.get(c, c) / tau;
        let inv = scale / (tau * denom);
        for w in 0..k {
            if w != c {
                d_within.set(c, w, inv * (within.get(c, w) / tau).exp());
            }
            d_across.set(c, w, inv * (across.get(c, w) / tau).exp());
        }
        d_across.set(c, c, d_across.get(c, c) - scale / tau);
    }
    add_into(dcos, i, i, d_within);
    add_into(dcos, i, j, d_across);
    (value, fs)
}

fn add_into(slots: &mut [Vec<Option<Matrix>>], a: usize, b: usize, m: Matrix) {
    match &mut slots[a][b] {
        Some(acc) => acc.add_assign(&m).expect("same k x k shape"),
        slot @ None => *slot = Some(m),
    }
}

/// Pushes cosine-level gradients back onto the head matrices.
fn backprop_cosines(
    heads: &[&Matrix],
    table: &CosineTable,
    dcos: &[Vec<Option<Matrix>>],
    grads: &mut [Matrix],
) -> Result<()> {
    let k = table.k;
    for (a, row) in dcos.iter().enumerate() {
        for (b, g) in row.iter().enumerate() {
            let Some(g) = g else { continue };
            let cos = table.get(a, b);
            let denom = table.denom[a][b].as_ref().expect("computed with cosines");
            // M = G / denom; dA += B M^T, dB += A M
            let mut m = Matrix::zeros(k, k);
            let mut row_coef = vec![0.0; k];
            let mut col_coef = vec![0.0; k];
            for c in 0..k {
                for w in 0..k {
                    let gcw = g.get(c, w);
                    if gcw == 0.0 {
                        continue;
                    }
                    let d = denom.get(c, w);
                    m.set(c, w, gcw / d);
                    let p = table.norms[a][c] * table.norms[b][w];
                    if p > NORM_FLOOR {
                        let t = gcw * cos.get(c, w);
                        row_coef[c] += t / (table.norms[a][c] * table.norms[a][c]);
                        col_coef[w] += t / (table.norms[b][w] * table.norms[b][w]);
                    }
                }
            }
            let da = heads[b].matmul_t(&m)?;
            let db = heads[a].matmul(&m)?;
            grads[a].add_assign(&da)?;
            grads[b].add_assign(&db)?;
            for r in 0..heads[a].rows() {
                for c in 0..k {
                    let v = grads[a].get(r, c) - row_coef[c] * heads[a].get(r, c);
                    grads[a].set(r, c, v);
                }
            }
            for r in 0..heads[b].rows() {
                for w in 0..k {
                    let v = grads[b].get(r, w) - col_coef[w] * heads[b].get(r, w);
                    grads[b].set(r, w, v);
                }
            }
        }
    }
    Ok(())
}

fn check_heads(heads: &[&Matrix], min_heads: usize) -> Result<(usize, usize)> {
    if heads.len() < min_heads {
        return Err(Error::Usage(format!(
            "semantic loss needs at least {min_heads} heads, got {}",
            heads.len()
        )));
    }
    let (rows, k) = heads[0].shape();
    if let Some(bad) = heads.iter().find(|q| q.shape() != (rows, k)) {
        return Err(Error::shape(
            "semantic heads",
            format!("{rows}x{k}"),
            format!("{}x{}", bad.rows(), bad.cols()),
        ));
    }
    if rows < 2 || k < 1 {
        return Err(Error::shape("semantic heads", "batch >= 2 and k >= 1", format!("{rows}x{k}")));
    }
    Ok((rows, k))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be positive, got {tau}")))
    }
}

#[derive(Debug, Clone)]
pub struct PairLoss {
    pub value: f64,
    /// `f(i, j, c)` for every class `c`.
    pub f: Vec<f64>,
    pub grad_i: Matrix,
    pub grad_j: Matrix,
}

/// Directed contrastive loss `l_two(i, j)` between two heads.
pub fn pairwise_contrastive_loss(qi: &Matrix, qj: &Matrix, tau: f64) -> Result<PairLoss> {
    check_tau(tau)?;
    let heads = [qi, qj];
    let (rows, k) = check_heads(&heads, 2)?;
    let mut table = CosineTable::new(&heads);
    table.ensure(&heads, 0, 0)?;
    table.ensure(&heads, 0, 1)?;
    let mut dcos = vec![vec![None; 2]; 2];
    let (value, f) = pair_term(&table, 0, 1, tau, 1.0, &mut dcos);
    let mut grads = vec![Matrix::zeros(rows, k), Matrix::zeros(rows, k)];
    backprop_cosines(&heads, &table, &dcos, &mut grads)?;
    let grad_j = grads.pop().expect("two heads");
    let grad_i = grads.pop().expect("two heads");
    Ok(PairLoss { value, f, grad_i, grad_j })
}

#[derive(Debug, Clone)]
pub struct SemanticLoss {
    /// `l_sum + l_reg`
    pub value: f64,
    pub l_sum: f64,
    pub l_reg: f64,
    /// Gradient of `value` with respect to each head matrix.
    pub grads: Vec<Matrix>,
}

/// Entropy-style regularizer over each head's batch-mean class distribution.
/// Returns the value and adds its gradient into `grads`.
fn mean_distribution_term(heads: &[&Matrix], grads: Option<&mut [Matrix]>) -> f64 {
    let mut value = 0.0;
    let mut per_head = Vec::with_capacity(heads.len());
    for q in heads {
        let means = q.column_means();
        let mut dmean = Vec::with_capacity(means.len());
        for &p in &means {
            let clamped = p.max(PROB_FLOOR);
            value += p * clamped.ln();
            dmean.push(clamped.ln() + if p >= PROB_FLOOR { 1.0 } else { 0.0 });
        }
        per_head.push(dmean);
    }
    if let Some(grads) = grads {
        for ((g, q), dmean) in grads.iter_mut().zip(heads).zip(per_head) {
            let inv_b = 1.0 / q.rows() as f64;
            for r in 0..q.rows() {
                for (v, d) in g.row_mut(r).iter_mut().zip(&dmean) {
                    *v += d * inv_b;
                }
            }
        }
    }
    value
}

/// `l_sum + l_reg` over all heads with gradients for every head.
pub fn semantic_loss(heads: &[&Matrix], tau: f64) -> Result<SemanticLoss> {
    check_tau(tau)?;
    let (rows, k) = check_heads(heads, 2)?;
    let h = heads.len();
    let mut table = CosineTable::new(heads);
    for i in 0..h {
        for j in 0..h {
            table.ensure(heads, i, j)?;
        }
    }
    let scale = 0.5 / k as f64;
    let mut dcos = vec![vec![None; h]; h];
    let mut l_sum = 0.0;
    for i in 0..h {
        for j in 0..h {
            if i != j {
                let (v, _) = pair_term(&table, i, j, tau, scale, &mut dcos);
                l_sum += scale * v;
            }
        }
    }
    let mut grads = vec![Matrix::zeros(rows, k); h];
    backprop_cosines(heads, &table, &dcos, &mut grads)?;
    let l_reg = mean_distribution_term(heads, Some(&mut grads));
    let value = l_sum + l_reg;
    if !value.is_finite() {
        return Err(Error::numeric("semantic loss"));
    }
    Ok(SemanticLoss { value, l_sum, l_reg, grads })
}

/// Regularizer value alone.
pub fn mean_distribution_regularizer(heads: &[&Matrix]) -> f64 {
    mean_distribution_term(heads, None)
}
