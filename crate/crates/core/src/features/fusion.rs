use ndarray::{Array2, Array3, Axis};

use crate::error::{AesaError, Result};
use crate::features::LayerStack;

/// Learnable pre-softmax layer scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub raw_scalars: Vec<f64>,
}

impl FusionWeights {
    pub fn new(raw_scalars: Vec<f64>) -> Self {
        Self { raw_scalars }
    }

    /// All-zero scalars, i.e. a uniform average over `layers`.
    pub fn uniform(layers: usize) -> Self {
        Self::new(vec![0.0; layers])
    }

    pub fn weights(&self) -> Vec<f64> {
        softmax(&self.raw_scalars)
    }
}

/// Numerically stable softmax.
pub fn softmax(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|r| (r - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `out[t, d] = Σ_l weights[l] · values[l, t, d]` for already normalized weights.
pub fn fuse_with_weights(values: &Array3<f64>, weights: &[f64]) -> Array2<f64> {
    let (_, t, d) = values.dim();
    let mut out = Array2::zeros((t, d));
    for (layer, &w) in values.axis_iter(Axis(0)).zip(weights) {
        out.scaled_add(w, &layer);
    }
    out
}

/// Collapse a layer stack into one `T × D` sequence with softmax-normalized weights.
pub fn fuse_layers(stack: &LayerStack, weights: &FusionWeights) -> Result<Array2<f64>> {
    if weights.raw_scalars.len() != stack.layers() {
        return Err(AesaError::Shape(format!(
            "{} fusion scalars for a {}-layer stack",
            weights.raw_scalars.len(),
            stack.layers()
        )));
    }
    if weights.raw_scalars.iter().any(|w| !w.is_finite()) {
        return Err(AesaError::NonFinite("fusion scalar".into()));
    }
    Ok(fuse_with_weights(stack.values(), &weights.weights()))
}
