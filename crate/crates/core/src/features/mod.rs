//! Audio preparation and frontend features: resampling, layer-stack I/O,
//! the deterministic synthetic frontend, and softmax layer fusion.

mod frontend;
mod fusion;
mod resample;
mod stack;

pub use frontend::{frame_count, synthetic_frontend, FRAME_SAMPLES, FRONTEND_RATE};
pub use fusion::{fuse_layers, fuse_with_weights, softmax, FusionWeights};
pub use resample::{resample, AudioClip, KAISER_BETA, ZERO_CROSSINGS};
pub use stack::{
    load_layer_stack, read_layer_stack, read_stack_header, save_layer_stack, write_layer_stack,
    LayerStack, StackHeader, STACK_MAGIC, STACK_VERSION,
};
