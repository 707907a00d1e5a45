//! Ground-truth multi-view generator.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::MultiViewDataset;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    pub k: usize,
    /// One entry per view.
    pub dims: Vec<usize>,
    /// Distance between every pair of class centres.
    pub separation: f64,
    /// Standard deviation of both the latent and the per-view noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 600,
            k: 3,
            dims: vec![20, 30],
            separation: 10.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn latent_dim(&self) -> usize {
        self.k.saturating_sub(1).max(2)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.dims.is_empty() {
            return fail("synthetic data needs at least one view".into());
        }
        if self.k == 0 || self.n < self.k {
            return fail(format!("need n >= k >= 1, got n = {}, k = {}", self.n, self.k));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return fail(format!("separation must be positive, got {}", self.separation));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail(format!("noise must be non-negative, got {}", self.noise));
        }
        let l = self.latent_dim();
        if let Some(d) = self.dims.iter().find(|&&d| d < l) {
            return fail(format!("view width {d} is below the latent dimension {l}"));
        }
        Ok(())
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_vec(rows, cols, data).expect("consistent length")
}

/// Orthonormalizes the columns of a square matrix (modified Gram-Schmidt).
fn orthonormal_columns(mut a: Matrix) -> Matrix {
    let n = a.cols();
    for j in 0..n {
        for p in 0..j {
            let dot: f64 = (0..a.rows()).map(|r| a.get(r, j) * a.get(r, p)).sum();
            for r in 0..a.rows() {
                a.set(r, j, a.get(r, j) - dot * a.get(r, p));
            }
        }
        let norm = (0..a.rows()).map(|r| a.get(r, j).powi(2)).sum::<f64>().sqrt();
        for r in 0..a.rows() {
            a.set(r, j, a.get(r, j) / norm);
        }
    }
    a
}

/// Vertices of a regular simplex with edge `separation`, randomly rotated in
/// `l` dimensions. Rows are centres.
fn simplex_centres<R: Rng + ?Sized>(k: usize, l: usize, separation: f64, rng: &mut R) -> Matrix {
    // e_c - mean lives in the (k-1)-dim sum-zero subspace of R^k; express it
    // in an orthonormal basis of that subspace. Edge length is sqrt(2).
    let mut basis = Matrix::zeros(k, k);
    for c in 0..k {
        basis.set(c, 0, 1.0);
        if c > 0 {
            basis.set(c, c, 1.0);
        }
    }
    let basis = orthonormal_columns(basis);
    let scale = separation / 2f64.sqrt();
    let mut coords = Matrix::zeros(k, l);
    for c in 0..k {
        for j in 1..k {
            coords.set(c, j - 1, basis.get(c, j) * scale);
        }
    }
    let rotation = orthonormal_columns(gaussian(rng, l, l));
    coords.matmul(&rotation).expect("l x l rotation")
}

/// Samples a labelled multi-view dataset. Classes sit on the vertices of a
/// regular simplex in `max(2, k - 1)` dimensions; each view is a random
/// affine image of the latent point plus noise.
pub fn synth_multiview(spec: &SynthSpec) -> Result<MultiViewDataset> {
    spec.validate()?;
    let mut rng = substream(spec.seed, Stream::Synth, 0);
    let l = spec.latent_dim();
    let centres = simplex_centres(spec.k, l, spec.separation, &mut rng);

    let mut labels: Vec<usize> = (0..spec.n).map(|j| j % spec.k).collect();
    labels.shuffle(&mut rng);

    let mut latent = Matrix::zeros(spec.n, l);
    for (j, &c) in labels.iter().enumerate() {
        for d in 0..l {
            let noise: f64 = rng.sample(StandardNormal);
            latent.set(j, d, centres.get(c, d) + spec.noise * noise);
        }
    }

    let mut views = Vec::with_capacity(spec.dims.len());
    for &dim in &spec.dims {
        let map = gaussian(&mut rng, l, dim);
        let offset: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = latent.matmul(&map)?;
        for j in 0..spec.n {
            for (v, b) in x.row_mut(j).iter_mut().zip(&offset) {
                let noise: f64 = rng.sample(StandardNormal);
                *v += b + spec.noise * noise;
            }
        }
        views.push(x);
    }
    MultiViewDataset::new(format!("synth-seed{}", spec.seed), views, Some(labels), spec.k)
}
