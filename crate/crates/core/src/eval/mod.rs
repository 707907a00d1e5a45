//! Downstream evaluation: k-means clustering metrics, k-NN classification
//! and fusion baselines.

mod kmeans;
mod knn;
mod metrics;
mod protocol;

pub use kmeans::{kmeans, KmeansResult};
pub use knn::{accuracy, knn_classify, stratified_split};
pub use metrics::{hungarian_acc, nmi, pairwise_fscore, Partition};
pub use protocol::{
    cluster_once, evaluate_representation, fusion_baseline, report_rows, trial_seed, write_metrics_csv, ClusterMetrics,
    EvalProtocol, Fusion, MetricRow, RepresentationReport, SplitResult, Summary,
};
