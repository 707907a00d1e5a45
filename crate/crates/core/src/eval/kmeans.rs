//! Lloyd's k-means with k-means++ seeding and restarts.

use rand::Rng;

use super::metrics::Partition;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub partition: Partition,
    pub centroids: Matrix,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub restarts: usize,
    pub seed: u64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus<R: Rng + ?Sized>(x: &Matrix, k: usize, rng: &mut R) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    centroids.row_mut(0).copy_from_slice(x.row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, row) in x.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(row, centroids.row(c)));
        }
    }
    centroids
}

/// Nearest centroid per row (lowest index on ties) and the squared distance.
fn assign(x: &Matrix, centroids: &Matrix) -> (Vec<usize>, Vec<f64>) {
    x.iter_rows()
        .map(|row| {
            let mut best = (0, f64::INFINITY);
            for (c, cen) in centroids.iter_rows().enumerate() {
                let d = sq_dist(row, cen);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// Moves the farthest point of a multi-member cluster into every empty one.
fn fill_empty(labels: &mut [usize], dist: &mut [f64], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let far = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("n >= k leaves a cluster with two members");
        labels[far] = empty;
        dist[far] = 0.0;
    }
}

fn update(x: &Matrix, labels: &[usize], k: usize) -> Matrix {
    let mut sums = Matrix::zeros(k, x.cols());
    let mut counts = vec![0usize; k];
    for (row, &l) in x.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(row) {
            *s += v;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        sums.row_mut(c).iter_mut().for_each(|s| *s /= count.max(1) as f64);
    }
    sums
}

fn lloyd(x: &Matrix, k: usize, max_iters: usize, mut centroids: Matrix) -> (Vec<usize>, Matrix, f64) {
    let mut labels: Vec<usize> = Vec::new();
    for _ in 0..max_iters.max(1) {
        let (mut next, mut dist) = assign(x, &centroids);
        fill_empty(&mut next, &mut dist, k);
        let stable = next == labels;
        labels = next;
        centroids = update(x, &labels, k);
        if stable {
            break;
        }
    }
    let wcss = x.iter_rows().zip(&labels).map(|(r, &l)| sq_dist(r, centroids.row(l))).sum();
    (labels, centroids, wcss)
}

/// Best-of-`restarts` clustering by WCSS. Restart `r` draws from its own
/// substream of `seed`, so results are reproducible and a larger restart
/// count only adds candidates.
pub fn kmeans(x: &Matrix, k: usize, restarts: usize, max_iters: usize, seed: u64) -> Result<KmeansResult> {
    if k == 0 || x.rows() < k {
        return Err(Error::Usage(format!("k-means needs 1 <= k <= N, got k = {k}, N = {}", x.rows())));
    }
    let mut best: Option<(Vec<usize>, Matrix, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = substream(seed, Stream::Kmeans, r as u64);
        let start = plus_plus(x, k, &mut rng);
        let candidate = lloyd(x, k, max_iters, start);
        if best.as_ref().is_none_or(|b| candidate.2 < b.2) {
            best = Some(candidate);
        }
    }
    let (labels, centroids, wcss) = best.expect("at least one restart");
    Ok(KmeansResult {
        partition: Partition { labels, k },
        centroids,
        wcss,
        restarts: restarts.max(1),
        seed,
    })
}
