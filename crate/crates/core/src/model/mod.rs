//! The multi-view objective: reconstruction, degradation and semantic consistency.

mod config;
pub mod gradcheck;
pub mod reference;
mod scmrl;
pub mod semantic;

pub use config::ScmrlConfig;
pub use gradcheck::{check_term, LossTerm};
pub use scmrl::{
    degradation_loss, init_unified, reconstruction_loss, total_loss, total_loss_with, DegradationOutput,
    LossBreakdown, ReconstructionOutput, ScmrlGrads, ScmrlModel,
};
pub use semantic::{column_cosine, pairwise_contrastive_loss, semantic_loss, PairLoss, SemanticLoss, SemanticMatrix};
