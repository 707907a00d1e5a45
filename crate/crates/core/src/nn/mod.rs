//! Dense kernels, networks, optimizer and gradient oracle.

pub mod adam;
pub mod gradcheck;
pub mod matrix;
pub mod mlp;
pub mod real;
pub mod reference;

pub use adam::{adam_step, AdamConfig, AdamState, MlpAdam, RowAdam};
pub use gradcheck::{finite_diff_check, GradCheckReport};
pub use matrix::{softmax_rows, Matrix};
pub use mlp::{Dense, GradTape, Mlp, MlpGrads, MlpShape, OutputActivation};
pub use real::{DoubleDouble, Real};
