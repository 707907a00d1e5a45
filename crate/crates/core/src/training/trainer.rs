//! Autoencoder pretraining, unified-representation initialization and the
//! joint optimization loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::schedule::TrainSchedule;
use crate::data::{batch_iter, MultiViewDataset};
use crate::error::{Error, Result};
use crate::model::{reconstruction_loss, total_loss_with, ScmrlConfig, ScmrlModel};
use crate::nn::{AdamConfig, MlpAdam, RowAdam};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pretrain,
    Joint,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Joint => "joint",
        }
    }

    fn stream_index(self, epoch: usize) -> u64 {
        let tag: u64 = match self {
            Phase::Pretrain => 1,
            Phase::Joint => 2,
        };
        (tag << 40) | epoch as u64
    }
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Loss terms of one epoch, each the batch-size weighted mean over batches.
/// During pretraining only `rec` is computed; the other terms are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    /// 1-based within the phase.
    pub epoch: usize,
    pub rec: f64,
    pub deg: f64,
    pub sem: f64,
    pub total: f64,
    pub l_sum: f64,
    pub l_reg: f64,
    pub batches: usize,
    pub skipped_batches: usize,
    /// Wall-clock time; not persisted.
    #[serde(skip)]
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub history: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn phase(&self, phase: Phase) -> impl Iterator<Item = &EpochRecord> {
        self.history.iter().filter(move |r| r.phase == phase)
    }
}

/// Adam moments for every trainable tensor. They persist across phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub encoders: Vec<MlpAdam>,
    pub decoders: Vec<MlpAdam>,
    pub degraders: Vec<MlpAdam>,
    pub classifier: MlpAdam,
    pub h: RowAdam,
}

impl OptimizerState {
    pub fn new(model: &ScmrlModel) -> Self {
        Self {
            encoders: model.encoders.iter().map(MlpAdam::new).collect(),
            decoders: model.decoders.iter().map(MlpAdam::new).collect(),
            degraders: model.degraders.iter().map(MlpAdam::new).collect(),
            classifier: MlpAdam::new(&model.classifier),
            h: RowAdam::new(model.h.rows(), model.h.cols()),
        }
    }
}

/// Position in the schedule; with the seed it fixes every future batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cursor {
    pub pretrain_done: usize,
    pub h_initialized: bool,
    pub joint_done: usize,
}

/// Moments when [`Trainer::fit`] offers a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Milestone {
    PretrainDone,
    JointEpoch(usize),
    JointDone,
}

/// Joint epochs between periodic checkpoints.
pub const CHECKPOINT_EVERY: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub model: ScmrlModel,
    pub schedule: TrainSchedule,
    pub optimizer: OptimizerState,
    pub cursor: Cursor,
    pub report: TrainReport,
}

#[derive(Default)]
struct Accumulator {
    samples: usize,
    rec: f64,
    deg: f64,
    sem: f64,
    l_sum: f64,
    l_reg: f64,
    batches: usize,
    skipped: usize,
}

impl Accumulator {
    fn mean(&self, v: f64) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            v / self.samples as f64
        }
    }
}

impl Trainer {
    /// Fresh model for `dataset`, initialised from the schedule's seed.
    pub fn new(config: ScmrlConfig, schedule: TrainSchedule, dataset: &MultiViewDataset) -> Result<Self> {
        if config.input_dims != dataset.dims() {
            return Err(Error::Config(format!(
                "config input_dims {:?} do not match dataset widths {:?}",
                config.input_dims,
                dataset.dims()
            )));
        }
        let mut rng = substream(schedule.seed, Stream::Init, 0);
        let model = ScmrlModel::new(config, dataset.n(), &mut rng)?;
        Self::from_model(model, schedule)
    }

    pub fn from_model(model: ScmrlModel, schedule: TrainSchedule) -> Result<Self> {
        schedule.validate(model.config().k)?;
        Ok(Self {
            optimizer: OptimizerState::new(&model),
            report: TrainReport { seed: schedule.seed, history: Vec::new() },
            model,
            schedule,
            cursor: Cursor::default(),
        })
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.schedule.learning_rate, ..AdamConfig::default() }
    }

    fn batches(&self, n: usize, phase: Phase, epoch: usize) -> Vec<Vec<usize>> {
        let size = self.schedule.batch_size.min(n);
        batch_iter(n, size, self.schedule.seed, phase.stream_index(epoch), self.schedule.shuffle)
    }

    fn check_dataset(&self, dataset: &MultiViewDataset) -> Result<()> {
        if dataset.dims() != self.model.config().input_dims || dataset.n() != self.model.n_samples() {
            return Err(Error::Config(format!(
                "dataset ({} samples, widths {:?}) does not match the model ({} samples, widths {:?})",
                dataset.n(),
                dataset.dims(),
                self.model.n_samples(),
                self.model.config().input_dims
            )));
        }
        Ok(())
    }

    /// One reconstruction-only epoch updating encoders and decoders.
    pub fn pretrain_epoch(&mut self, dataset: &MultiViewDataset) -> Result<EpochRecord> {
        self.check_dataset(dataset)?;
        let start = Instant::now();
        let epoch = self.cursor.pretrain_done + 1;
        let cfg = self.adam();
        let mut acc = Accumulator::default();
        for (b, idx) in self.batches(dataset.n(), Phase::Pretrain, epoch).iter().enumerate() {
            let views = dataset.batch(idx);
            let out = reconstruction_loss(&self.model, &views).map_err(|e| numeric_context(e, Phase::Pretrain, epoch, b))?;
            for v in 0..self.model.m() {
                self.optimizer.encoders[v].step(&mut self.model.encoders[v], &out.encoders[v], &cfg)?;
                self.optimizer.decoders[v].step(&mut self.model.decoders[v], &out.decoders[v], &cfg)?;
            }
            acc.samples += idx.len();
            acc.rec += out.value * idx.len() as f64;
            acc.batches += 1;
        }
        self.cursor.pretrain_done = epoch;
        let rec = acc.mean(acc.rec);
        let record = EpochRecord {
            phase: Phase::Pretrain,
            epoch,
            rec,
            deg: 0.0,
            sem: 0.0,
            total: rec,
            l_sum: 0.0,
            l_reg: 0.0,
            batches: acc.batches,
            skipped_batches: 0,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::debug!("pretrain epoch {epoch}: rec {rec:.6}");
        self.report.history.push(record.clone());
        Ok(record)
    }

    /// Sets `H` to the mean of the encoded views over the whole dataset.
    pub fn initialize_h(&mut self, dataset: &MultiViewDataset) -> Result<()> {
        self.check_dataset(dataset)?;
        self.model.initialize_h(dataset.views())?;
        self.optimizer.h = RowAdam::new(self.model.h.rows(), self.model.h.cols());
        self.cursor.h_initialized = true;
        Ok(())
    }

    /// One epoch of the full objective. Batches smaller than `max(2, k)` are
    /// skipped with a warning.
    pub fn joint_epoch(&mut self, dataset: &MultiViewDataset) -> Result<EpochRecord> {
        self.check_dataset(dataset)?;
        if !self.cursor.h_initialized {
            return Err(Error::Usage("joint training needs an initialised H".into()));
        }
        let start = Instant::now();
        let epoch = self.cursor.joint_done + 1;
        let adam = self.adam();
        let config = self.model.config().clone();
        let min_batch = config.k.max(2);
        let use_rec = config.joint_reconstruction;
        let use_deg = config.lambda1 != 0.0;
        let use_sem = config.lambda2 != 0.0;
        let mut acc = Accumulator::default();
        for (b, idx) in self.batches(dataset.n(), Phase::Joint, epoch).iter().enumerate() {
            if idx.len() < min_batch {
                log::warn!("joint epoch {epoch}: skipping batch {b} of {} samples (minimum {min_batch})", idx.len());
                acc.skipped += 1;
                continue;
            }
            let views = dataset.batch(idx);
            let h_batch = self.model.h.select_rows(idx);
            let (loss, grads) =
                total_loss_with(&self.model, &views, &h_batch, None).map_err(|e| numeric_context(e, Phase::Joint, epoch, b))?;
            let m = self.model.m();
            for v in 0..m {
                if use_rec || use_sem || (use_deg && !config.stop_grad_degradation) {
                    self.optimizer.encoders[v].step(&mut self.model.encoders[v], &grads.encoders[v], &adam)?;
                }
                if use_rec {
                    self.optimizer.decoders[v].step(&mut self.model.decoders[v], &grads.decoders[v], &adam)?;
                }
                if use_deg {
                    self.optimizer.degraders[v].step(&mut self.model.degraders[v], &grads.degraders[v], &adam)?;
                }
            }
            if use_sem {
                self.optimizer.classifier.step(&mut self.model.classifier, &grads.classifier, &adam)?;
            }
            if use_deg || use_sem {
                self.optimizer.h.step_rows(&mut self.model.h, idx, &grads.h_rows, &adam)?;
            }
            let w = idx.len() as f64;
            acc.samples += idx.len();
            acc.rec += loss.rec * w;
            acc.deg += loss.deg * w;
            acc.sem += loss.sem * w;
            acc.l_sum += loss.l_sum * w;
            acc.l_reg += loss.l_reg * w;
            acc.batches += 1;
        }
        self.cursor.joint_done = epoch;
        let (rec, deg, sem) = (acc.mean(acc.rec), acc.mean(acc.deg), acc.mean(acc.sem));
        let rec_weight = if use_rec { 1.0 } else { 0.0 };
        let record = EpochRecord {
            phase: Phase::Joint,
            epoch,
            rec,
            deg,
            sem,
            total: rec_weight * rec + config.lambda1 * deg + config.lambda2 * sem,
            l_sum: acc.mean(acc.l_sum),
            l_reg: acc.mean(acc.l_reg),
            batches: acc.batches,
            skipped_batches: acc.skipped,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::debug!("joint epoch {epoch}: rec {rec:.6} deg {deg:.6} sem {sem:.6} total {:.6}", record.total);
        self.report.history.push(record.clone());
        Ok(record)
    }

    /// Runs the remaining pretraining epochs.
    pub fn pretrain(&mut self, dataset: &MultiViewDataset) -> Result<()> {
        while self.cursor.pretrain_done < self.schedule.pretrain_epochs {
            self.pretrain_epoch(dataset)?;
        }
        Ok(())
    }

    /// Runs the remaining joint epochs, initialising `H` first if needed.
    pub fn joint_train(&mut self, dataset: &MultiViewDataset) -> Result<()> {
        if !self.cursor.h_initialized {
            self.initialize_h(dataset)?;
        }
        while self.cursor.joint_done < self.schedule.joint_epochs {
            self.joint_epoch(dataset)?;
        }
        Ok(())
    }

    /// Completes the whole schedule from the current cursor.
    pub fn fit(&mut self, dataset: &MultiViewDataset) -> Result<()> {
        self.fit_with(dataset, &mut |_, _| Ok(()))
    }

    /// [`Trainer::fit`], calling `on_milestone` at the end of each phase and
    /// every [`CHECKPOINT_EVERY`] joint epochs.
    pub fn fit_with(
        &mut self,
        dataset: &MultiViewDataset,
        on_milestone: &mut dyn FnMut(&Trainer, Milestone) -> Result<()>,
    ) -> Result<()> {
        if self.cursor.pretrain_done < self.schedule.pretrain_epochs {
            self.pretrain(dataset)?;
            log::info!("pretraining finished after {} epochs", self.cursor.pretrain_done);
            on_milestone(self, Milestone::PretrainDone)?;
        }
        if !self.cursor.h_initialized {
            self.initialize_h(dataset)?;
        }
        while self.cursor.joint_done < self.schedule.joint_epochs {
            let r = self.joint_epoch(dataset)?;
            if r.epoch % 10 == 0 {
                log::info!("joint epoch {}: total {:.6}", r.epoch, r.total);
            }
            if r.epoch % CHECKPOINT_EVERY == 0 && r.epoch < self.schedule.joint_epochs {
                on_milestone(self, Milestone::JointEpoch(r.epoch))?;
            }
        }
        on_milestone(self, Milestone::JointDone)
    }
}

fn numeric_context(e: Error, phase: Phase, epoch: usize, batch: usize) -> Error {
    match e {
        Error::Numeric { context } => Error::numeric(format!("{context} ({phase} epoch {epoch}, batch {batch})")),
        other => other,
    }
}
