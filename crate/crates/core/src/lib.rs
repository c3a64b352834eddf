//! Pool-based active learning for multi-modal classification.
//!
//! The crate scores unlabeled samples with single-modal entropic measures
//! computed from a tri-branch classifier: a fused main head plus two
//! detached single-modal heads trained by self-distillation. The staged
//! labeling protocol, a synthetic multi-modal data generator and an
//! experiment front-end are included.
//!
//! Modules, bottom-up:
//! - [`probmath`]: normalization, entropy, KL and Jensen-Shannon divergence.
//! - [`acquisition`]: every scoring strategy plus budgeted top-b selection.
//! - [`model`]: the tri-branch network, its losses, gradients and optimizers.
//! - [`dataset`]: synthetic data, VQA-style soft targets and metrics.
//! - [`alloop`]: pool bookkeeping and the stage loop.
//! - [`cli`]: experiment specs, sweeps, CSV/JSON output and summaries.

pub mod acquisition;
pub mod alloop;
pub mod cli;
pub mod dataset;
mod error;
pub mod model;
pub mod probmath;
pub mod rng;

pub use error::{Error, Result};
