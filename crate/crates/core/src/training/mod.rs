//! Pretraining, `H` initialization, joint optimization and checkpoints.

mod checkpoint;
mod schedule;
mod trainer;

pub use checkpoint::{from_bytes, load_checkpoint, save_checkpoint, to_bytes, TensorEntry, MAGIC, VERSION};
pub use schedule::{TrainSchedule, Variant};
pub use trainer::{Cursor, EpochRecord, Milestone, OptimizerState, Phase, TrainReport, Trainer, CHECKPOINT_EVERY};
