use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use rayon::prelude::*;
use scmrl_core::data::{save_dataset, write_matrix_csv, MultiViewDataset};
use scmrl_core::eval::{evaluate_representation, fusion_baseline, report_rows, write_metrics_csv, Fusion, MetricRow};
use scmrl_core::model::gradcheck::{describe_index, random_instance, TinyInstanceSpec};
use scmrl_core::model::{check_term, LossTerm, ScmrlGrads};
use scmrl_core::nn::Matrix;
use scmrl_core::training::{load_checkpoint, save_checkpoint, Milestone, TrainReport, Trainer};
use scmrl_core::Error;
use serde::Serialize;

use crate::config::{Representation, RunConfig};

pub const HISTORY_FILE: &str = "history.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.csv";
pub const GRADCHECK_FILE: &str = "gradcheck.csv";
pub const SWEEP_FILE: &str = "sweep.csv";

pub const GRADCHECK_STEP: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Data { path: path.to_path_buf(), message: e.to_string() }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(())
}

/// Writes the synthetic dataset of `cfg` as CSV files plus a manifest.
pub fn synth(mut cfg: RunConfig) -> Result<PathBuf> {
    cfg.data.manifest = None;
    let dir = cfg.echo()?;
    let dataset = scmrl_core::data::synth_multiview(&cfg.data.synth)?;
    Ok(save_dataset(&dir, &dataset, cfg.data.normalization)?)
}

#[derive(Serialize)]
struct HistoryRow {
    epoch: usize,
    phase: &'static str,
    rec: f64,
    deg: f64,
    sem: f64,
    total: f64,
}

pub fn write_history(path: &Path, report: &TrainReport) -> Result<()> {
    let rows: Vec<HistoryRow> = report
        .history
        .iter()
        .map(|r| HistoryRow { epoch: r.epoch, phase: r.phase.name(), rec: r.rec, deg: r.deg, sem: r.sem, total: r.total })
        .collect();
    if rows.is_empty() {
        fs::write(path, "epoch,phase,rec,deg,sem,total\n").map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        return Ok(());
    }
    write_rows(path, &rows)
}

fn prepare(cfg: &mut RunConfig) -> Result<MultiViewDataset> {
    cfg.absolutize()?;
    let dataset = cfg.load_dataset()?;
    cfg.bind_dataset(&dataset)?;
    Ok(dataset)
}

fn fit(cfg: &RunConfig, dataset: &MultiViewDataset, dir: &Path, resume: bool) -> Result<Trainer> {
    let ckpt = dir.join(CHECKPOINT_FILE);
    let mut trainer = if resume && ckpt.exists() {
        let t = load_checkpoint(&ckpt)?;
        if t.model.config() != &cfg.model || t.schedule != cfg.schedule {
            bail!(Error::Config(format!("{} was written with a different configuration", ckpt.display())));
        }
        log::info!("resuming from {} ({:?})", ckpt.display(), t.cursor);
        t
    } else {
        Trainer::new(cfg.model.clone(), cfg.schedule.clone(), dataset)?
    };
    trainer.fit_with(dataset, &mut |t, milestone| {
        if milestone != Milestone::JointDone {
            log::debug!("checkpoint at {milestone:?}");
            save_checkpoint(t, &ckpt)?;
        }
        Ok(())
    })?;
    write_history(&dir.join(HISTORY_FILE), &trainer.report)?;
    save_checkpoint(&trainer, &ckpt)?;
    Ok(trainer)
}

/// Pretraining, `H` initialization and joint training; writes the loss
/// history and the final checkpoint.
pub fn train(mut cfg: RunConfig, resume: bool) -> Result<Trainer> {
    let dataset = prepare(&mut cfg)?;
    let dir = cfg.echo()?;
    fit(&cfg, &dataset, &dir, resume)
}

fn check_compatible(trainer: &Trainer, dataset: &MultiViewDataset, source: &Path) -> Result<()> {
    let cfg = trainer.model.config();
    if cfg.input_dims != dataset.dims() || cfg.k != dataset.k() || trainer.model.n_samples() != dataset.n() {
        bail!(Error::Data {
            path: source.to_path_buf(),
            message: format!(
                "checkpoint expects {} samples with widths {:?} and k = {}; dataset has {} samples, widths {:?}, k = {}",
                trainer.model.n_samples(),
                cfg.input_dims,
                cfg.k,
                dataset.n(),
                dataset.dims(),
                dataset.k()
            ),
        });
    }
    if !trainer.cursor.h_initialized {
        bail!(Error::Data { path: source.to_path_buf(), message: "checkpoint has no unified representation yet".into() });
    }
    Ok(())
}

pub fn representation(trainer: &Trainer, dataset: &MultiViewDataset, which: Representation) -> Result<Matrix> {
    Ok(match which {
        Representation::H => trainer.model.h.clone(),
        Representation::Concat => fusion_baseline(&trainer.model, dataset.views(), Fusion::Concat)?,
        Representation::Average => fusion_baseline(&trainer.model, dataset.views(), Fusion::Average)?,
    })
}

/// Metrics and embedding CSVs for every requested representation.
fn evaluate(cfg: &RunConfig, trainer: &Trainer, dataset: &MultiViewDataset, dir: &Path) -> Result<Vec<MetricRow>> {
    let Some(labels) = dataset.labels() else {
        bail!(Error::Data { path: dir.to_path_buf(), message: format!("dataset {} has no labels to evaluate against", dataset.name) });
    };
    let mut rows = Vec::new();
    for &which in &cfg.variants {
        let x = representation(trainer, dataset, which)?;
        let report = evaluate_representation(&x, labels, dataset.k(), &cfg.eval)?;
        rows.extend(report_rows(&dataset.name, which.name(), &report, cfg.eval.seed));
        let header: Vec<String> = (0..x.cols()).map(|c| format!("z{c}")).collect();
        write_matrix_csv(&dir.join(format!("embedding_{}.csv", which.name())), &x, Some(&header), Some(labels))?;
    }
    write_metrics_csv(&dir.join(METRICS_FILE), &rows)?;
    Ok(rows)
}

/// Loads `cfg.checkpoint` and evaluates it on the configured dataset.
pub fn eval(mut cfg: RunConfig) -> Result<Vec<MetricRow>> {
    cfg.absolutize()?;
    let Some(path) = cfg.checkpoint.clone() else {
        bail!(Error::Usage("eval needs a checkpoint (--checkpoint or `checkpoint`)".into()));
    };
    let trainer = load_checkpoint(&path)?;
    let dataset = cfg.load_dataset()?;
    check_compatible(&trainer, &dataset, &path)?;
    cfg.model = trainer.model.config().clone();
    cfg.schedule = trainer.schedule.clone();
    let dir = cfg.echo()?;
    evaluate(&cfg, &trainer, &dataset, &dir)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub seed: u64,
    pub term: &'static str,
    pub max_rel_error: f64,
    pub worst: String,
    pub status: &'static str,
}

/// Finite-difference check of every weighted term on tiny random instances.
/// Terms with zero weight are reported as skipped. `tamper` corrupts the
/// analytic gradients first (negative controls only).
pub fn gradcheck(cfg: RunConfig, tamper: Option<fn(&mut ScmrlGrads)>) -> Result<Vec<GradcheckRow>> {
    let dir = cfg.echo()?;
    let spec = TinyInstanceSpec {
        lambda1: cfg.model.lambda1,
        lambda2: cfg.model.lambda2,
        tau: cfg.model.tau,
        stop_grad_degradation: cfg.model.stop_grad_degradation,
        ..TinyInstanceSpec::default()
    };
    let seeds: Vec<u64> = (0..cfg.gradcheck.seeds).map(|i| cfg.schedule.seed.wrapping_add(i)).collect();
    let per_seed: Vec<Result<Vec<GradcheckRow>>> = seeds
        .par_iter()
        .map(|&seed| {
            let (model, views, h) = random_instance(&spec, seed)?;
            let mut rows = Vec::new();
            for term in LossTerm::ALL {
                let skipped = (term == LossTerm::Deg && spec.lambda1 == 0.0) || (term == LossTerm::Sem && spec.lambda2 == 0.0);
                if skipped {
                    rows.push(GradcheckRow { seed, term: term.name(), max_rel_error: 0.0, worst: String::new(), status: "skipped" });
                    continue;
                }
                let tamper = tamper.as_ref().map(|f| f as &dyn Fn(&mut ScmrlGrads));
                let r = check_term(&model, &views, &h, term, GRADCHECK_STEP, tamper)?;
                let pass = r.max_rel_error < GRADCHECK_TOLERANCE;
                rows.push(GradcheckRow {
                    seed,
                    term: term.name(),
                    max_rel_error: r.max_rel_error,
                    worst: describe_index(&model, r.worst_index),
                    status: if pass { "pass" } else { "fail" },
                });
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_seed {
        rows.extend(r?);
    }
    write_rows(&dir.join(GRADCHECK_FILE), &rows)?;
    Ok(rows)
}

/// One line per term: worst relative error over all seeds, or `skipped`.
pub fn gradcheck_summary(rows: &[GradcheckRow]) -> Vec<String> {
    let mut lines = Vec::new();
    for term in LossTerm::ALL {
        let of_term: Vec<&GradcheckRow> = rows.iter().filter(|r| r.term == term.name()).collect();
        if of_term.iter().all(|r| r.status == "skipped") {
            lines.push(format!("{:<6} skipped (zero weight)", term.name()));
            continue;
        }
        let worst = of_term.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)).expect("rows");
        let status = if of_term.iter().any(|r| r.status == "fail") { "FAIL" } else { "ok" };
        lines.push(format!("{:<6} max relative error {:.3e} over {} seeds  {status}", term.name(), worst.max_rel_error, of_term.len()));
    }
    lines
}

/// Fails with the worst offending coordinate when any check failed.
pub fn gradcheck_verdict(rows: &[GradcheckRow]) -> Result<()> {
    if let Some(bad) = rows.iter().filter(|r| r.status == "fail").max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error)) {
        bail!(Error::GradientMismatch(format!(
            "{} term, seed {}, relative error {:.3e} at {}",
            bad.term, bad.seed, bad.max_rel_error, bad.worst
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau: f64,
    pub metric: String,
    pub value: f64,
    pub status: String,
}

/// Metric names a sweep cell reports, in order.
pub fn sweep_metrics(cfg: &RunConfig) -> Vec<String> {
    let mut names: Vec<String> = ["acc", "nmi", "fscore"].iter().map(|s| s.to_string()).collect();
    for f in &cfg.eval.train_fractions {
        let train = (f * 10.0).round() as u32;
        names.push(format!("knn_acc_{}_{}", train, 10 - train));
    }
    names
}

fn sweep_cell(cfg: &RunConfig, dataset: &MultiViewDataset, dir: &Path) -> Result<Vec<(String, f64)>> {
    let trainer = fit(cfg, dataset, dir, false)?;
    let labels = dataset.labels().ok_or_else(|| Error::Invalid(format!("dataset {} has no labels", dataset.name)))?;
    let report = evaluate_representation(&trainer.model.h, labels, dataset.k(), &cfg.eval)?;
    Ok(report.rows().into_iter().map(|(name, s)| (name, s.mean)).collect())
}

/// Trains and evaluates `H` at every point of the λ1 × λ2 × τ grid. Every
/// cell shares the base seed and keeps its history and checkpoint under
/// `cells/`. Failed cells are recorded with their error.
pub fn sweep(mut cfg: RunConfig) -> Result<Vec<SweepRow>> {
    let dataset = prepare(&mut cfg)?;
    let dir = cfg.echo()?;
    let axis = |v: &Vec<f64>, base: f64| if v.is_empty() { vec![base] } else { v.clone() };
    let l1s = axis(&cfg.sweep.lambda1, cfg.model.lambda1);
    let l2s = axis(&cfg.sweep.lambda2, cfg.model.lambda2);
    let taus = axis(&cfg.sweep.tau, cfg.model.tau);
    let mut grid = Vec::new();
    for &l1 in &l1s {
        for &l2 in &l2s {
            for &tau in &taus {
                grid.push((l1, l2, tau));
            }
        }
    }
    let metrics = sweep_metrics(&cfg);
    let results: Vec<Vec<SweepRow>> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &(l1, l2, tau))| {
            let mut cell = cfg.clone();
            cell.model.lambda1 = l1;
            cell.model.lambda2 = l2;
            cell.model.tau = tau;
            let cell_dir = dir.join("cells").join(format!("{i:03}"));
            let outcome = cell
                .model
                .validate()
                .map_err(anyhow::Error::from)
                .and_then(|_| fs::create_dir_all(&cell_dir).map_err(|e| Error::Io { path: cell_dir.clone(), source: e }.into()))
                .and_then(|_| sweep_cell(&cell, &dataset, &cell_dir));
            let row = |metric: &str, value: f64, status: String| SweepRow { lambda1: l1, lambda2: l2, tau, metric: metric.to_string(), value, status };
            match outcome {
                Ok(values) => values.into_iter().map(|(m, v)| row(&m, v, "ok".into())).collect(),
                Err(e) => {
                    log::warn!("cell lambda1={l1} lambda2={l2} tau={tau} failed: {e:#}");
                    let status = format!("failed: {e:#}");
                    metrics.iter().map(|m| row(m, f64::NAN, status.clone())).collect()
                }
            }
        })
        .collect();
    let rows: Vec<SweepRow> = results.into_iter().flatten().collect();
    write_rows(&dir.join(SWEEP_FILE), &rows)?;
    Ok(rows)
}
