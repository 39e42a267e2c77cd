use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::axis::Axis;
use crate::features::FusionWeights;
use crate::model::ModelConfig;
use crate::rng::{stream_rng, STREAM_INIT};

/// One direction of an LSTM layer. Gate blocks are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    /// `in × 4H`
    pub w_input: Array2<f64>,
    /// `H × 4H`
    pub w_hidden: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

/// Per-axis head: self-attention block with residual + layer norm, then frame scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisHead {
    pub w_query: Array2<f64>,
    pub b_query: Array1<f64>,
    pub w_key: Array2<f64>,
    pub b_key: Array1<f64>,
    pub w_value: Array2<f64>,
    pub b_value: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    pub norm_gamma: Array1<f64>,
    pub norm_beta: Array1<f64>,
    pub w_frame: Array1<f64>,
    pub b_frame: Array1<f64>,
}

/// Every trainable parameter of the network. Weight matrices are stored `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Pre-softmax layer fusion scalars, one per frontend layer.
    pub fusion: Array1<f64>,
    pub adapter_w: Array2<f64>,
    pub adapter_b: Array1<f64>,
    pub lstm: Vec<LstmLayer>,
    pub shared_w: Array2<f64>,
    pub shared_b: Array1<f64>,
    /// One head per axis, in `Axis::ALL` order.
    pub heads: Vec<AxisHead>,
}

pub const LSTM_LAYERS: usize = 2;

fn uniform2(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
}

fn uniform1(rng: &mut ChaCha8Rng, len: usize, bound: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.gen_range(-bound..bound))
}

impl LstmDirection {
    fn init(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        Self {
            w_input: uniform2(rng, input, 4 * hidden, bound),
            w_hidden: uniform2(rng, hidden, 4 * hidden, bound),
            bias: uniform1(rng, 4 * hidden, bound),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            w_input: Array2::zeros(self.w_input.raw_dim()),
            w_hidden: Array2::zeros(self.w_hidden.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a [f64])>) {
        out.push((format!("{prefix}/w_input"), slice(&self.w_input)));
        out.push((format!("{prefix}/w_hidden"), slice(&self.w_hidden)));
        out.push((format!("{prefix}/bias"), slice(&self.bias)));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut [f64])>) {
        out.push((format!("{prefix}/w_input"), slice_mut(&mut self.w_input)));
        out.push((format!("{prefix}/w_hidden"), slice_mut(&mut self.w_hidden)));
        out.push((format!("{prefix}/bias"), slice_mut(&mut self.bias)));
    }
}

impl AxisHead {
    fn init(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let bound = 1.0 / (dim as f64).sqrt();
        Self {
            w_query: uniform2(rng, dim, dim, bound),
            b_query: uniform1(rng, dim, bound),
            w_key: uniform2(rng, dim, dim, bound),
            b_key: uniform1(rng, dim, bound),
            w_value: uniform2(rng, dim, dim, bound),
            b_value: uniform1(rng, dim, bound),
            w_out: uniform2(rng, dim, dim, bound),
            b_out: uniform1(rng, dim, bound),
            norm_gamma: Array1::ones(dim),
            norm_beta: Array1::zeros(dim),
            w_frame: uniform1(rng, dim, bound),
            b_frame: uniform1(rng, 1, bound),
        }
    }

    fn zeros_like(&self) -> Self {
        let z2 = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        let z1 = |a: &Array1<f64>| Array1::zeros(a.raw_dim());
        Self {
            w_query: z2(&self.w_query),
            b_query: z1(&self.b_query),
            w_key: z2(&self.w_key),
            b_key: z1(&self.b_key),
            w_value: z2(&self.w_value),
            b_value: z1(&self.b_value),
            w_out: z2(&self.w_out),
            b_out: z1(&self.b_out),
            norm_gamma: z1(&self.norm_gamma),
            norm_beta: z1(&self.norm_beta),
            w_frame: z1(&self.w_frame),
            b_frame: z1(&self.b_frame),
        }
    }

    fn tensors<'a>(&'a self, axis: Axis, out: &mut Vec<(String, &'a [f64])>) {
        let a = format!("head.{axis}.attention");
        out.push((format!("{a}/w_query"), slice(&self.w_query)));
        out.push((format!("{a}/b_query"), slice(&self.b_query)));
        out.push((format!("{a}/w_key"), slice(&self.w_key)));
        out.push((format!("{a}/b_key"), slice(&self.b_key)));
        out.push((format!("{a}/w_value"), slice(&self.w_value)));
        out.push((format!("{a}/b_value"), slice(&self.b_value)));
        out.push((format!("{a}/w_out"), slice(&self.w_out)));
        out.push((format!("{a}/b_out"), slice(&self.b_out)));
        out.push((format!("head.{axis}.norm/gamma"), slice(&self.norm_gamma)));
        out.push((format!("head.{axis}.norm/beta"), slice(&self.norm_beta)));
        out.push((format!("head.{axis}.frame/weight"), slice(&self.w_frame)));
        out.push((format!("head.{axis}.frame/bias"), slice(&self.b_frame)));
    }

    fn tensors_mut<'a>(&'a mut self, axis: Axis, out: &mut Vec<(String, &'a mut [f64])>) {
        let a = format!("head.{axis}.attention");
        out.push((format!("{a}/w_query"), slice_mut(&mut self.w_query)));
        out.push((format!("{a}/b_query"), slice_mut(&mut self.b_query)));
        out.push((format!("{a}/w_key"), slice_mut(&mut self.w_key)));
        out.push((format!("{a}/b_key"), slice_mut(&mut self.b_key)));
        out.push((format!("{a}/w_value"), slice_mut(&mut self.w_value)));
        out.push((format!("{a}/b_value"), slice_mut(&mut self.b_value)));
        out.push((format!("{a}/w_out"), slice_mut(&mut self.w_out)));
        out.push((format!("{a}/b_out"), slice_mut(&mut self.b_out)));
        out.push((
            format!("head.{axis}.norm/gamma"),
            slice_mut(&mut self.norm_gamma),
        ));
        out.push((
            format!("head.{axis}.norm/beta"),
            slice_mut(&mut self.norm_beta),
        ));
        out.push((
            format!("head.{axis}.frame/weight"),
            slice_mut(&mut self.w_frame),
        ));
        out.push((
            format!("head.{axis}.frame/bias"),
            slice_mut(&mut self.b_frame),
        ));
    }
}

fn slice<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice()
        .expect("parameters are kept in standard layout")
}

fn slice_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut()
        .expect("parameters are kept in standard layout")
}

impl ModelParams {
    /// Seeded initialization.
    ///
    /// Fusion scalars start at zero so the initial fusion is a uniform average.
    /// Every other weight and bias is drawn from `U(-k, k)` with `k = 1/sqrt(fan_in)`
    /// (LSTM blocks use `k = 1/sqrt(hidden)`); layer-norm gains start at one and
    /// shifts at zero.
    pub fn init(config: &ModelConfig, seed: u64) -> crate::Result<Self> {
        config.validate()?;
        let mut rng = stream_rng(seed, STREAM_INIT);
        let adapter_bound = 1.0 / (config.input_dim as f64).sqrt();
        let adapter_w = uniform2(
            &mut rng,
            config.input_dim,
            config.adapter_dim,
            adapter_bound,
        );
        let adapter_b = uniform1(&mut rng, config.adapter_dim, adapter_bound);

        let h = config.lstm_hidden;
        let lstm = (0..LSTM_LAYERS)
            .map(|i| {
                let input = if i == 0 { config.adapter_dim } else { 2 * h };
                LstmLayer {
                    forward: LstmDirection::init(&mut rng, input, h),
                    backward: LstmDirection::init(&mut rng, input, h),
                }
            })
            .collect();

        let shared_bound = 1.0 / ((2 * h) as f64).sqrt();
        let shared_w = uniform2(&mut rng, 2 * h, config.shared_dim, shared_bound);
        let shared_b = uniform1(&mut rng, config.shared_dim, shared_bound);
        let heads = Axis::ALL
            .iter()
            .map(|_| AxisHead::init(&mut rng, config.shared_dim))
            .collect();

        Ok(Self {
            config: *config,
            fusion: Array1::zeros(config.layer_count),
            adapter_w,
            adapter_b,
            lstm,
            shared_w,
            shared_b,
            heads,
        })
    }

    /// Same shapes, every entry zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            config: self.config,
            fusion: Array1::zeros(self.fusion.raw_dim()),
            adapter_w: Array2::zeros(self.adapter_w.raw_dim()),
            adapter_b: Array1::zeros(self.adapter_b.raw_dim()),
            lstm: self
                .lstm
                .iter()
                .map(|l| LstmLayer {
                    forward: l.forward.zeros_like(),
                    backward: l.backward.zeros_like(),
                })
                .collect(),
            shared_w: Array2::zeros(self.shared_w.raw_dim()),
            shared_b: Array1::zeros(self.shared_b.raw_dim()),
            heads: self.heads.iter().map(AxisHead::zeros_like).collect(),
        }
    }

    pub fn fusion_weights(&self) -> FusionWeights {
        FusionWeights::new(self.fusion.to_vec())
    }

    /// All tensors in the fixed serialization order, named `group/tensor`.
    pub fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        out.push(("fusion/scalars".to_string(), slice(&self.fusion)));
        out.push(("adapter/weight".to_string(), slice(&self.adapter_w)));
        out.push(("adapter/bias".to_string(), slice(&self.adapter_b)));
        for (i, layer) in self.lstm.iter().enumerate() {
            layer
                .forward
                .tensors(&format!("lstm.{i}.forward"), &mut out);
            layer
                .backward
                .tensors(&format!("lstm.{i}.backward"), &mut out);
        }
        out.push(("shared/weight".to_string(), slice(&self.shared_w)));
        out.push(("shared/bias".to_string(), slice(&self.shared_b)));
        for (head, axis) in self.heads.iter().zip(Axis::ALL) {
            head.tensors(axis, &mut out);
        }
        out
    }

    /// Mutable counterpart of [`named_tensors`](Self::named_tensors), same order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::new();
        out.push(("fusion/scalars".to_string(), slice_mut(&mut self.fusion)));
        out.push(("adapter/weight".to_string(), slice_mut(&mut self.adapter_w)));
        out.push(("adapter/bias".to_string(), slice_mut(&mut self.adapter_b)));
        for (i, layer) in self.lstm.iter_mut().enumerate() {
            layer
                .forward
                .tensors_mut(&format!("lstm.{i}.forward"), &mut out);
            layer
                .backward
                .tensors_mut(&format!("lstm.{i}.backward"), &mut out);
        }
        out.push(("shared/weight".to_string(), slice_mut(&mut self.shared_w)));
        out.push(("shared/bias".to_string(), slice_mut(&mut self.shared_b)));
        for (head, axis) in self.heads.iter_mut().zip(Axis::ALL) {
            head.tensors_mut(axis, &mut out);
        }
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}
