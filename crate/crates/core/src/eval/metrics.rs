//! External clustering metrics over label vectors.
//!
//! Label ids are arbitrary; each vector is compacted to `0..r` before use.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix as Weights;

use crate::error::{Error, Result};

/// Labels paired with the number of label values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Invalid(format!("label {bad} not below k = {k}")));
        }
        Ok(Self { labels, k })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Relabels to `0..r` in order of first appearance; returns the count `r`.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

/// Counts `n[p][t]` of samples with compact predicted id `p` and true id `t`.
struct Contingency {
    counts: Vec<Vec<u64>>,
    n: u64,
}

impl Contingency {
    fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::shape("partition lengths", pred.len(), truth.len()));
        }
        let (p, rp) = compact(pred);
        let (t, rt) = compact(truth);
        let mut counts = vec![vec![0u64; rt]; rp];
        for (a, b) in p.iter().zip(&t) {
            counts[*a][*b] += 1;
        }
        Ok(Self { counts, n: pred.len() as u64 })
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        let cols = self.counts.first().map_or(0, Vec::len);
        (0..cols).map(|c| self.counts.iter().map(|r| r[c]).sum()).collect()
    }
}

/// Best matched fraction over one-to-one maps from predicted to true ids.
pub fn hungarian_acc(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = Contingency::new(pred, truth)?;
    if table.n == 0 {
        return Ok(1.0);
    }
    let side = table.counts.len().max(table.counts[0].len());
    let mut rows = vec![vec![0i64; side]; side];
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            rows[r][c] = v as i64;
        }
    }
    let weights = Weights::from_rows(rows).expect("square rows");
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / table.n as f64)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information over the geometric mean of the two entropies (nats).
/// When either entropy is zero the result is 1 for identical partitions and
/// 0 otherwise.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = Contingency::new(pred, truth)?;
    let n = table.n as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let (hp, ht) = (entropy(&rows, n), entropy(&cols, n));
    if hp == 0.0 || ht == 0.0 {
        return Ok(if rows.len() == cols.len() && rows.len() <= 1 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if v > 0 {
                let v = v as f64;
                mi += v / n * (n * v / (rows[r] as f64 * cols[c] as f64)).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

fn pairs(c: u64) -> u64 {
    c * c.saturating_sub(1) / 2
}

/// Pairwise F-measure. Two all-singleton partitions score 1; otherwise an
/// undefined precision or recall gives 0.
pub fn pairwise_fscore(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = Contingency::new(pred, truth)?;
    let tp: u64 = table.counts.iter().flatten().map(|&v| pairs(v)).sum();
    let pred_pairs: u64 = table.row_sums().into_iter().map(pairs).sum();
    let true_pairs: u64 = table.col_sums().into_iter().map(pairs).sum();
    if pred_pairs == 0 && true_pairs == 0 {
        return Ok(1.0);
    }
    if pred_pairs == 0 || true_pairs == 0 {
        return Ok(0.0);
    }
    let p = tp as f64 / pred_pairs as f64;
    let r = tp as f64 / true_pairs as f64;
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acc_hand_cases() {
        assert_eq!(hungarian_acc(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(hungarian_acc(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(hungarian_acc(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.5);
        // Rectangular: three predicted clusters, two classes.
        assert_eq!(hungarian_acc(&[0, 1, 2, 2], &[0, 0, 1, 1]).unwrap(), 0.75);
        assert!(hungarian_acc(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn nmi_hand_cases() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[3, 3, 3], &[1, 1, 1]).unwrap(), 1.0);
        // Contingency [[2,0],[1,1],[0,2]] over n = 6.
        let v = nmi(&[0, 0, 1, 1, 2, 2], &[0, 0, 0, 1, 1, 1]).unwrap();
        let mi = (2.0 / 6.0) * (2.0f64 * 6.0 / (2.0 * 3.0)).ln() * 2.0 + (1.0 / 6.0) * (6.0f64 / (2.0 * 3.0)).ln() * 2.0;
        let hp = 3f64.ln();
        let ht = 2f64.ln();
        assert!((v - mi / (hp * ht).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fscore_hand_cases() {
        assert_eq!(pairwise_fscore(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(pairwise_fscore(&[0, 1, 2, 3], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(pairwise_fscore(&[0, 1, 2], &[2, 1, 0]).unwrap(), 1.0);
        // Pairs: pred {01, 23}, truth {01, 02, 12}; TP {01}. P = 1/2, R = 1/3.
        let f = pairwise_fscore(&[0, 0, 1, 1], &[0, 0, 0, 1]).unwrap();
        assert!((f - 0.4).abs() < 1e-15);
    }
}
