//! Repeated clustering and classification trials over one representation.

use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::kmeans::kmeans;
use super::knn::{accuracy, knn_classify, stratified_split};
use super::metrics::{hungarian_acc, nmi, pairwise_fscore};
use crate::error::{Error, Result};
use crate::model::{init_unified, ScmrlModel};
use crate::nn::Matrix;
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub cluster_trials: usize,
    pub restarts: usize,
    pub max_iters: usize,
    pub train_fractions: Vec<f64>,
    pub split_trials: usize,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        Self {
            cluster_trials: 10,
            restarts: 10,
            max_iters: 300,
            train_fractions: vec![0.8, 0.5, 0.2],
            split_trials: 30,
            k_neighbors: 5,
            seed: 0,
        }
    }
}

/// Mean and sample standard deviation of repeated trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, trials: 0 };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, trials: n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterMetrics {
    pub acc: f64,
    pub nmi: f64,
    pub fscore: f64,
    pub restarts: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train_fraction: f64,
    pub accuracies: Vec<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub clustering: Vec<ClusterMetrics>,
    pub acc: Summary,
    pub nmi: Summary,
    pub fscore: Summary,
    pub classification: Vec<SplitResult>,
}

impl RepresentationReport {
    /// `(metric, summary)` rows in a fixed order.
    pub fn rows(&self) -> Vec<(String, Summary)> {
        let mut rows = vec![
            ("acc".to_string(), self.acc),
            ("nmi".to_string(), self.nmi),
            ("fscore".to_string(), self.fscore),
        ];
        for split in &self.classification {
            let train = (split.train_fraction * 10.0).round() as u32;
            rows.push((format!("knn_acc_{}_{}", train, 10 - train), split.summary));
        }
        rows
    }
}

/// Seed of trial `index` in `stream`, drawn from the master seed.
pub fn trial_seed(master: u64, stream: Stream, index: u64) -> u64 {
    substream(master, stream, index).next_u64()
}

/// Clustering metrics of one k-means run on `x`.
pub fn cluster_once(x: &Matrix, labels: &[usize], k: usize, restarts: usize, max_iters: usize, seed: u64) -> Result<ClusterMetrics> {
    let r = kmeans(x, k, restarts, max_iters, seed)?;
    let pred = &r.partition.labels;
    Ok(ClusterMetrics {
        acc: hungarian_acc(pred, labels)?,
        nmi: nmi(pred, labels)?,
        fscore: pairwise_fscore(pred, labels)?,
        restarts,
        seed,
    })
}

/// Runs the clustering and classification trials of `protocol` on `x`.
pub fn evaluate_representation(x: &Matrix, labels: &[usize], k: usize, protocol: &EvalProtocol) -> Result<RepresentationReport> {
    if labels.len() != x.rows() {
        return Err(Error::shape("evaluate_representation labels", x.rows(), labels.len()));
    }
    let mut clustering = Vec::with_capacity(protocol.cluster_trials);
    for t in 0..protocol.cluster_trials {
        let seed = trial_seed(protocol.seed, Stream::Kmeans, t as u64);
        clustering.push(cluster_once(x, labels, k, protocol.restarts, protocol.max_iters, seed)?);
    }
    let pick = |f: fn(&ClusterMetrics) -> f64| Summary::of(&clustering.iter().map(f).collect::<Vec<_>>());
    let (acc, nmi_s, fscore) = (pick(|c| c.acc), pick(|c| c.nmi), pick(|c| c.fscore));

    let mut classification = Vec::with_capacity(protocol.train_fractions.len());
    for (f, &fraction) in protocol.train_fractions.iter().enumerate() {
        let mut accuracies = Vec::with_capacity(protocol.split_trials);
        for t in 0..protocol.split_trials {
            let mut rng = substream(protocol.seed, Stream::Splits, ((f as u64) << 32) | t as u64);
            let (train, test) = stratified_split(labels, fraction, &mut rng)?;
            let train_y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
            let test_y: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
            let pred = knn_classify(&x.select_rows(&train), &train_y, &x.select_rows(&test), protocol.k_neighbors)?;
            accuracies.push(accuracy(&pred, &test_y)?);
        }
        let summary = Summary::of(&accuracies);
        classification.push(SplitResult { train_fraction: fraction, accuracies, summary });
    }
    Ok(RepresentationReport { clustering, acc, nmi: nmi_s, fscore, classification })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    Concat,
    Average,
}

/// Representations built directly from the encoded views: their row-wise
/// concatenation or their element-wise mean.
pub fn fusion_baseline(model: &ScmrlModel, views: &[Matrix], mode: Fusion) -> Result<Matrix> {
    let zs = model.encode_all(views)?;
    match mode {
        Fusion::Concat => Matrix::hstack(&zs.iter().collect::<Vec<_>>()),
        Fusion::Average => init_unified(&zs),
    }
}

/// One row of the metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub dataset: String,
    pub variant: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
    pub seed: u64,
}

pub fn report_rows(dataset: &str, variant: &str, report: &RepresentationReport, seed: u64) -> Vec<MetricRow> {
    report
        .rows()
        .into_iter()
        .map(|(metric, s)| MetricRow {
            dataset: dataset.to_string(),
            variant: variant.to_string(),
            metric,
            mean: s.mean,
            std: s.std,
            trials: s.trials,
            seed,
        })
        .collect()
}

/// Writes rows with the header `dataset,variant,metric,mean,std,trials,seed`.
pub fn write_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::data(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ScmrlConfig;
    use crate::nn::{Dense, Mlp, OutputActivation};

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!((s.mean, s.std, s.trials), (2.0, 1.0, 3));
        assert_eq!(Summary::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn single_trial_matches_direct_call() {
        let x = Matrix::from_rows(&[[0.0], [0.2], [0.1], [5.0], [5.2], [5.1], [0.3], [5.3]]).unwrap();
        let y = [0, 0, 0, 1, 1, 1, 0, 1];
        let protocol = EvalProtocol { cluster_trials: 1, split_trials: 1, k_neighbors: 1, train_fractions: vec![0.5], ..EvalProtocol::default() };
        let r = evaluate_representation(&x, &y, 2, &protocol).unwrap();
        let direct = cluster_once(&x, &y, 2, 10, 300, trial_seed(0, Stream::Kmeans, 0)).unwrap();
        assert_eq!(r.clustering[0], direct);
        assert_eq!(r.acc.mean, direct.acc);
        assert_eq!(r, evaluate_representation(&x, &y, 2, &protocol).unwrap());
        assert_eq!(r.rows()[3].0, "knn_acc_5_5");
    }

    #[test]
    fn fusion_definitions() {
        let cfg = ScmrlConfig {
            input_dims: vec![2, 2],
            latent_dim: 2,
            encoder_hidden: vec![],
            degrader_hidden: vec![],
            classifier_hidden: vec![],
            ..ScmrlConfig::default()
        };
        let id = |o| Mlp::from_layers(vec![Dense { weight: Matrix::identity(2), bias: vec![0.0; 2] }], o).unwrap();
        let ident = || id(OutputActivation::Identity);
        let model = ScmrlModel::from_parts(cfg, vec![ident(), ident()], vec![ident(), ident()], vec![ident(), ident()], id(OutputActivation::Softmax), Matrix::zeros(1, 2)).unwrap();
        let views = [Matrix::from_rows(&[[1.0, 2.0]]).unwrap(), Matrix::from_rows(&[[3.0, 4.0]]).unwrap()];
        assert_eq!(fusion_baseline(&model, &views, Fusion::Concat).unwrap().row(0), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(fusion_baseline(&model, &views, Fusion::Average).unwrap().row(0), &[2.0, 3.0]);
    }
}
