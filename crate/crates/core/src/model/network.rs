use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::axis::AestheticScores;
use crate::error::{AesaError, Result};
use crate::features::{fuse_with_weights, softmax, LayerStack};
use crate::model::attention::HeadCache;
use crate::model::lstm::LayerCache;
use crate::model::ModelParams;
use crate::rng::{stream_rng, STREAM_DROPOUT};

/// Forward-pass mode. Training mode applies dropout from a seeded mask stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub clip_scores: AestheticScores,
    /// `4 × T`, rows in `Axis::ALL` order.
    pub frame_scores: Array2<f64>,
    /// Time-averaged shared-layer output; the embedding used for triplet mining.
    pub embedding: Array1<f64>,
}

/// Intermediate activations needed by [`ModelParams::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fusion_weights: Vec<f64>,
    stack: ndarray::Array3<f64>,
    fused: Array2<f64>,
    lstm: Vec<LayerCache>,
    lstm_out: Array2<f64>,
    dropout_mask: Option<Array2<f64>>,
    shared_pre: Array2<f64>,
    shared: Array2<f64>,
    heads: Vec<HeadCache>,
}

fn dropout_mask(frames: usize, dim: usize, rate: f64, seed: u64) -> Array2<f64> {
    let mut rng = stream_rng(seed, STREAM_DROPOUT);
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((frames, dim), || {
        if rng.gen::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

impl ModelParams {
    /// Checks a stack against the configured layer count and feature width.
    pub fn check_input(&self, layers: usize, dims: usize) -> Result<()> {
        if layers != self.config.layer_count || dims != self.config.input_dim {
            return Err(AesaError::Shape(format!(
                "model expects {} layers x {} dims, features have {layers} x {dims}",
                self.config.layer_count, self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Predict scores for one clip.
    pub fn forward(&self, stack: &LayerStack, mode: Mode) -> Result<ForwardOutput> {
        self.run(stack, mode, false).map(|(out, _)| out)
    }

    /// Forward pass that also returns the activations needed for backpropagation.
    pub fn forward_with_cache(
        &self,
        stack: &LayerStack,
        mode: Mode,
    ) -> Result<(ForwardOutput, ForwardCache)> {
        self.run(stack, mode, true)
            .map(|(out, cache)| (out, cache.expect("cache requested")))
    }

    fn run(
        &self,
        stack: &LayerStack,
        mode: Mode,
        keep: bool,
    ) -> Result<(ForwardOutput, Option<ForwardCache>)> {
        self.check_input(stack.layers(), stack.dims())?;
        let frames = stack.frames();
        let heads = self.config.attention_heads;

        let fusion_weights = softmax(self.fusion.as_slice().unwrap());
        let fused = fuse_with_weights(stack.values(), &fusion_weights);
        let mut hidden = fused.dot(&self.adapter_w) + &self.adapter_b;

        let mut lstm_caches = Vec::with_capacity(self.lstm.len());
        for layer in &self.lstm {
            let (out, cache) = layer.forward(hidden);
            hidden = out;
            lstm_caches.push(cache);
        }

        let shared_pre = hidden.dot(&self.shared_w) + &self.shared_b;
        let mask = match mode {
            Mode::Train { seed } if self.config.dropout > 0.0 => Some(dropout_mask(
                frames,
                self.config.shared_dim,
                self.config.dropout,
                seed,
            )),
            _ => None,
        };
        let shared = match &mask {
            Some(m) => (&shared_pre * m).mapv(|v| v.max(0.0)),
            None => shared_pre.mapv(|v| v.max(0.0)),
        };
        let embedding = shared.mean_axis(Axis(0)).unwrap();

        let mut frame_scores = Array2::zeros((self.heads.len(), frames));
        let mut head_caches = Vec::new();
        for (k, head) in self.heads.iter().enumerate() {
            let (scores, cache) = head.forward(shared.view(), heads, keep);
            frame_scores.row_mut(k).assign(&scores);
            head_caches.extend(cache);
        }

        let mut clip = [0.0; 4];
        for (k, c) in clip.iter_mut().enumerate() {
            *c = frame_scores.row(k).sum() / frames as f64;
        }
        if clip.iter().any(|v| !v.is_finite()) || embedding.iter().any(|v| !v.is_finite()) {
            return Err(AesaError::NonFinite(format!(
                "forward pass on clip `{}`",
                stack.clip_id
            )));
        }

        let output = ForwardOutput {
            clip_scores: AestheticScores(clip),
            frame_scores,
            embedding,
        };
        let cache = keep.then(|| ForwardCache {
            fusion_weights,
            stack: stack.values().clone(),
            fused,
            lstm: lstm_caches,
            lstm_out: hidden,
            dropout_mask: mask,
            shared_pre,
            shared,
            heads: head_caches,
        });
        Ok((output, cache))
    }

    /// Exact gradients of a scalar objective given its partial derivatives
    /// w.r.t. the clip scores and (optionally) the embedding.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_clip: &[f64; 4],
        d_embedding: Option<&Array1<f64>>,
    ) -> ModelParams {
        let mut grads = self.zeros_like();
        let frames = cache.shared.nrows();
        let heads = self.config.attention_heads;

        let mut d_shared = Array2::<f64>::zeros(cache.shared.raw_dim());
        for (k, head) in self.heads.iter().enumerate() {
            let d_scores = Array1::from_elem(frames, d_clip[k] / frames as f64);
            d_shared += &head.backward(
                cache.shared.view(),
                &cache.heads[k],
                &d_scores,
                heads,
                &mut grads.heads[k],
            );
        }
        if let Some(dz) = d_embedding {
            d_shared += &(dz / frames as f64);
        }

        let mut d_pre = d_shared;
        match &cache.dropout_mask {
            Some(mask) => {
                ndarray::Zip::from(&mut d_pre)
                    .and(&cache.shared_pre)
                    .and(mask)
                    .for_each(|d, &u, &m| *d = if u * m > 0.0 { *d * m } else { 0.0 });
            }
            None => {
                ndarray::Zip::from(&mut d_pre)
                    .and(&cache.shared_pre)
                    .for_each(|d, &u| {
                        if u <= 0.0 {
                            *d = 0.0
                        }
                    });
            }
        }
        grads.shared_w += &cache.lstm_out.t().dot(&d_pre);
        grads.shared_b += &d_pre.sum_axis(Axis(0));
        let mut d_hidden = d_pre.dot(&self.shared_w.t());

        for (i, layer) in self.lstm.iter().enumerate().rev() {
            d_hidden = layer.backward(&cache.lstm[i], d_hidden.view(), &mut grads.lstm[i]);
        }

        grads.adapter_w += &cache.fused.t().dot(&d_hidden);
        grads.adapter_b += &d_hidden.sum_axis(Axis(0));
        let d_fused = d_hidden.dot(&self.adapter_w.t());

        let per_layer: Vec<f64> = cache
            .stack
            .axis_iter(Axis(0))
            .map(|layer| (&layer * &d_fused).sum())
            .collect();
        let weighted: f64 = per_layer
            .iter()
            .zip(&cache.fusion_weights)
            .map(|(g, w)| g * w)
            .sum();
        for (l, g) in per_layer.iter().enumerate() {
            grads.fusion[l] = cache.fusion_weights[l] * (g - weighted);
        }
        grads
    }
}
