//! Semantically consistent multi-view representation learning.
//!
//! Per-view autoencoders produce latent codes, degradation networks tie a
//! trainable per-sample unified representation `H` back to every view, and a
//! shared classifier maps codes and `H` to pseudo-label matrices whose class
//! columns are aligned with a contrastive objective. The learned `H` is then
//! judged with k-means and k-nearest-neighbour protocols.

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod rng;
pub mod training;

pub use error::{Error, ErrorKind, Result};
