use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Aligned views of the same `N` samples: row `j` of every view describes
/// sample `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    views: Vec<Matrix>,
    labels: Option<Vec<usize>>,
    k: usize,
}

impl MultiViewDataset {
    pub fn new(name: impl Into<String>, views: Vec<Matrix>, labels: Option<Vec<usize>>, k: usize) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Invalid("dataset has no views".into()));
        }
        let n = views[0].rows();
        for (i, v) in views.iter().enumerate() {
            if v.rows() != n {
                return Err(Error::Invalid(format!(
                    "row-count mismatch: view 0 has {n} rows, view {i} has {}",
                    v.rows()
                )));
            }
            if !v.is_finite() {
                return Err(Error::Invalid(format!("view {i} contains non-finite values")));
            }
        }
        if k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Invalid(format!("{} labels for {n} samples", labels.len())));
            }
            if let Some((j, &bad)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
                return Err(Error::Invalid(format!("label {bad} of sample {j} is not below k = {k}")));
            }
            let mut seen = vec![false; k];
            labels.iter().for_each(|&l| seen[l] = true);
            let empty: Vec<usize> = (0..k).filter(|&c| !seen[c]).collect();
            if !empty.is_empty() {
                log::warn!("classes {empty:?} have no samples");
            }
        }
        Ok(Self {
            name: name.into(),
            views,
            labels,
            k,
        })
    }

    pub fn n(&self) -> usize {
        self.views[0].rows()
    }

    pub fn m(&self) -> usize {
        self.views.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(Matrix::cols).collect()
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Rows `indices` of every view, in the given order.
    pub fn batch(&self, indices: &[usize]) -> Vec<Matrix> {
        self.views.iter().map(|v| v.select_rows(indices)).collect()
    }

    pub fn normalized(&self, mode: Normalization) -> Self {
        Self {
            views: self.views.iter().map(|v| normalize_view(v, mode)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    MinMax,
    ZScore,
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Self::MinMax),
            "zscore" => Ok(Self::ZScore),
            "none" => Ok(Self::None),
            other => Err(Error::Config(format!("unknown normalization {other:?}"))),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MinMax => "minmax",
            Self::ZScore => "zscore",
            Self::None => "none",
        })
    }
}

/// Per-column normalization; degenerate columns map to zero.
pub fn normalize_view(x: &Matrix, mode: Normalization) -> Matrix {
    let mut out = x.clone();
    if mode == Normalization::None || x.rows() == 0 {
        return out;
    }
    let n = x.rows() as f64;
    for c in 0..x.cols() {
        let col = x.column(c);
        let (shift, scale) = match mode {
            Normalization::MinMax => {
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
            Normalization::ZScore => {
                let mean = col.iter().sum::<f64>() / n;
                let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
            Normalization::None => unreachable!(),
        };
        for (r, v) in col.iter().enumerate() {
            out.set(r, c, if scale > 0.0 { (v - shift) / scale } else { 0.0 });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[f64]) -> Matrix {
        Matrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn minmax_endpoints_and_constant_columns() {
        let out = normalize_view(&col(&[0.0, 5.0, 10.0]), Normalization::MinMax);
        assert_eq!(out.as_slice(), &[0.0, 0.5, 1.0]);
        for mode in [Normalization::MinMax, Normalization::ZScore] {
            let out = normalize_view(&col(&[3.0, 3.0, 3.0]), mode);
            assert_eq!(out.as_slice(), &[0.0; 3]);
        }
        let x = col(&[0.25, -4.0, 9.5]);
        assert_eq!(normalize_view(&x, Normalization::None), x);
    }

    #[test]
    fn zscore_standardizes() {
        let out = normalize_view(&col(&[1.0, 2.0, 3.0, 4.0]), Normalization::ZScore);
        let mean: f64 = out.as_slice().iter().sum::<f64>() / 4.0;
        let var: f64 = out.as_slice().iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn construction_checks() {
        let a = Matrix::zeros(4, 2);
        let b = Matrix::zeros(5, 2);
        let err = MultiViewDataset::new("x", vec![a.clone(), b], None, 2).unwrap_err().to_string();
        assert!(err.contains('4') && err.contains('5'), "{err}");
        assert!(MultiViewDataset::new("x", vec![a.clone(), a.clone()], Some(vec![0, 1, 2, 0]), 2).is_err());
        let ds = MultiViewDataset::new("x", vec![a.clone(), a], Some(vec![0, 1, 1, 0]), 2).unwrap();
        assert_eq!((ds.n(), ds.m(), ds.k()), (4, 2, 2));
        assert_eq!("zscore".parse::<Normalization>().unwrap(), Normalization::ZScore);
        assert!("l2".parse::<Normalization>().is_err());
    }
}
