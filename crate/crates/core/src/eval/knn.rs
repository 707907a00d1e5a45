//! k-nearest-neighbour classification and stratified splits.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Euclidean k-NN majority vote. Neighbours are ordered by distance, then by
/// training index. Vote ties go to the larger summed inverse distance, then
/// to the smaller label.
pub fn knn_classify(train_x: &Matrix, train_y: &[usize], test_x: &Matrix, k_neighbors: usize) -> Result<Vec<usize>> {
    if train_x.rows() == 0 {
        return Err(Error::Usage("k-NN needs a non-empty training set".into()));
    }
    if train_y.len() != train_x.rows() {
        return Err(Error::shape("knn_classify labels", train_x.rows(), train_y.len()));
    }
    if k_neighbors == 0 || train_x.rows() < k_neighbors {
        return Err(Error::Usage(format!(
            "k-NN with {k_neighbors} neighbours needs at least that many training rows, got {}",
            train_x.rows()
        )));
    }
    if test_x.cols() != train_x.cols() {
        return Err(Error::shape("knn_classify features", train_x.cols(), test_x.cols()));
    }
    let classes = train_y.iter().max().map_or(0, |m| m + 1);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(train_x.rows());
    let mut out = Vec::with_capacity(test_x.rows());
    for q in test_x.iter_rows() {
        order.clear();
        order.extend(train_x.iter_rows().enumerate().map(|(i, t)| {
            let d: f64 = q.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
            (d.sqrt(), i)
        }));
        order.select_nth_unstable_by(k_neighbors - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![(0usize, 0.0f64); classes];
        for &(d, i) in &order[..k_neighbors] {
            let slot = &mut votes[train_y[i]];
            slot.0 += 1;
            slot.1 += 1.0 / d;
        }
        let mut best = 0;
        for c in 1..classes {
            let (a, b) = (votes[c], votes[best]);
            if a.0 > b.0 || (a.0 == b.0 && a.1 > b.1) {
                best = c;
            }
        }
        out.push(best);
    }
    Ok(out)
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::shape("accuracy", truth.len(), pred.len()));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Per-class split into (train, test) index lists. Every class with at least
/// two members keeps one sample on each side.
pub fn stratified_split<R: Rng + ?Sized>(labels: &[usize], train_fraction: f64, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut group in members {
        group.shuffle(rng);
        let n = group.len();
        let take = if n >= 2 {
            ((train_fraction * n as f64).round() as usize).clamp(1, n - 1)
        } else {
            n
        };
        train.extend_from_slice(&group[..take]);
        test.extend_from_slice(&group[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
