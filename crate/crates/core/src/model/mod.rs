//! The aesthetics network: layer fusion, linear adapter, two-layer BLSTM,
//! shared rectified projection with dropout, and four per-axis heads
//! (self-attention, frame-level sigmoid scoring, average pooling).

mod attention;
mod checkpoint;
mod config;
mod lstm;
mod network;
mod params;

pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::ModelConfig;
pub use network::{ForwardCache, ForwardOutput, Mode};
pub use params::{AxisHead, LstmDirection, LstmLayer, ModelParams, LSTM_LAYERS};
