//! Multi-view datasets: loading, normalization, batching and a synthetic
//! generator with known labels.

mod batch;
mod dataset;
mod io;
mod synth;

pub use batch::batch_iter;
pub use dataset::{normalize_view, MultiViewDataset, Normalization};
pub use io::{load_dataset, read_labels, read_matrix_csv, save_dataset, write_matrix_csv, DatasetManifest, ViewEntry};
pub use synth::{synth_multiview, SynthSpec};
