//! Multi-axis perceptual audio aesthetics prediction.
//!
//! Frontend layer stacks are fused with softmax-normalized learnable weights,
//! encoded by a linear adapter and a two-layer BLSTM, projected through a shared
//! rectified layer, and scored by four per-axis heads (production quality,
//! production complexity, content enjoyment, content usefulness). Training
//! combines MSE with a triplet loss whose positives and negatives are mined from
//! per-axis FIFO memory buffers.

pub mod axis;
pub mod buffer;
pub mod cli;
pub mod data;
pub mod error;
pub mod features;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod training;

pub use axis::{AestheticScores, Axis, Domain};
pub use error::{AesaError, FormatError, ManifestError, Result};
