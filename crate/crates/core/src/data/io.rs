//! Manifest and CSV formats.
//!
//! Feature files hold one sample per row as comma-separated decimal floats.
//! A first row containing any non-numeric cell is taken as a header and
//! skipped. Label files hold one zero-based integer per line (same header
//! rule). The manifest is TOML:
//!
//! ```toml
//! name = "toy"
//! k = 3
//! normalization = "minmax"   # minmax | zscore | none
//! labels = "labels.csv"      # optional
//!
//! [[views]]
//! path = "view0.csv"
//! dim = 10
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{MultiViewDataset, Normalization};
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViewEntry {
    pub path: PathBuf,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub k: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    pub views: Vec<ViewEntry>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::data(path, format!("bad manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::data(path, e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Numeric records of a CSV file with their 1-based line numbers.
fn numeric_records(path: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut out = Vec::new();
    for (i, record) in reader(path)?.records().enumerate() {
        let record = record.map_err(|e| Error::data(path, e.to_string()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, usize> = record
            .iter()
            .enumerate()
            .map(|(c, cell)| cell.parse::<f64>().map_err(|_| c))
            .collect();
        match parsed {
            Ok(values) => {
                if let Some(c) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::data(path, format!("line {line}, column {}: non-finite value", c + 1)));
                }
                out.push((line, values));
            }
            Err(_) if i == 0 => continue,
            Err(c) => {
                return Err(Error::data(
                    path,
                    format!("line {line}, column {}: {:?} is not a number", c + 1, &record[c]),
                ));
            }
        }
    }
    Ok(out)
}

/// Reads a feature matrix, checking the column count against `dim` when given.
pub fn read_matrix_csv(path: &Path, dim: Option<usize>) -> Result<Matrix> {
    let records = numeric_records(path)?;
    let Some((_, first)) = records.first() else {
        return Err(Error::data(path, "no data rows"));
    };
    let width = dim.unwrap_or(first.len());
    let mut data = Vec::with_capacity(records.len() * width);
    for (line, values) in &records {
        if values.len() != width {
            return Err(Error::data(
                path,
                format!("line {line}: expected {width} values, found {}", values.len()),
            ));
        }
        data.extend_from_slice(values);
    }
    Matrix::from_vec(records.len(), width, data)
}

/// Reads zero-based integer labels, each required to be below `k`.
pub fn read_labels(path: &Path, k: usize) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (line, values) in numeric_records(path)? {
        let v = match values.as_slice() {
            [v] => *v,
            _ => return Err(Error::data(path, format!("line {line}: expected one label, found {}", values.len()))),
        };
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::data(path, format!("line {line}: label {v} is not a non-negative integer")));
        }
        if v >= k as f64 {
            return Err(Error::data(path, format!("line {line}: label {v} out of range for k = {k}")));
        }
        labels.push(v as usize);
    }
    Ok(labels)
}

/// Loads, validates and normalizes the dataset described by a manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<MultiViewDataset> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    if manifest.views.is_empty() {
        return Err(Error::data(manifest_path, "manifest lists no views"));
    }
    let mut views = Vec::with_capacity(manifest.views.len());
    for entry in &manifest.views {
        views.push(read_matrix_csv(&resolve(base, &entry.path), Some(entry.dim))?);
    }
    let n = views[0].rows();
    for (entry, v) in manifest.views.iter().zip(&views) {
        if v.rows() != n {
            return Err(Error::data(
                resolve(base, &entry.path),
                format!("row-count mismatch: {} rows, but {} has {n}", v.rows(), manifest.views[0].path.display()),
            ));
        }
    }
    let labels = match &manifest.labels {
        Some(p) => {
            let path = resolve(base, p);
            let labels = read_labels(&path, manifest.k)?;
            if labels.len() != n {
                return Err(Error::data(path, format!("{} labels for {n} samples", labels.len())));
            }
            Some(labels)
        }
        None => None,
    };
    log::info!("loaded {} ({} samples, {} views), normalization {}", manifest.name, n, views.len(), manifest.normalization);
    Ok(MultiViewDataset::new(manifest.name, views, labels, manifest.k)?.normalized(manifest.normalization))
}

/// Writes a matrix as CSV. `header` names the columns; `labels` appends a
/// final `label` column.
pub fn write_matrix_csv(path: &Path, m: &Matrix, header: Option<&[String]>, labels: Option<&[usize]>) -> Result<()> {
    let mut out = String::new();
    if let Some(header) = header {
        out.push_str(&header.join(","));
        if labels.is_some() {
            out.push_str(",label");
        }
        out.push('\n');
    }
    for (r, row) in m.iter_rows().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        if let Some(labels) = labels {
            out.push_str(&format!(",{}", labels[r]));
        }
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `view{i}.csv`, `labels.csv` (when present) and `manifest.toml`
/// into `dir`, returning the manifest path.
pub fn save_dataset(dir: &Path, dataset: &MultiViewDataset, normalization: Normalization) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut views = Vec::with_capacity(dataset.m());
    for (i, v) in dataset.views().iter().enumerate() {
        let name = PathBuf::from(format!("view{i}.csv"));
        write_matrix_csv(&dir.join(&name), v, None, None)?;
        views.push(ViewEntry { path: name, dim: v.cols() });
    }
    let labels = match dataset.labels() {
        Some(labels) => {
            let name = PathBuf::from("labels.csv");
            let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
            fs::write(dir.join(&name), text).map_err(|e| Error::io(dir.join(&name), e))?;
            Some(name)
        }
        None => None,
    };
    let manifest = DatasetManifest {
        name: dataset.name.clone(),
        k: dataset.k(),
        normalization,
        labels,
        views,
    };
    let path = dir.join("manifest.toml");
    manifest.write(&path)?;
    Ok(path)
}
