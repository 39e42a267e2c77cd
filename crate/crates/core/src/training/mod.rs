//! Single-sample training: forward, MSE over the four axes, per-axis triplet
//! mining against memory buffers, Adam, and early stopping on validation MSE.

mod adam;
mod early_stopping;

use std::io::Write;

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use adam::{adam_update, adam_update_slice, AdamMoments, BETA1, BETA2, EPSILON};
pub use early_stopping::EarlyStopping;

use crate::axis::Axis;
use crate::buffer::{MemoryBuffer, DEFAULT_CAPACITY, DEFAULT_EPSILON};
use crate::data::ScoreScale;
use crate::error::{AesaError, Result};
use crate::features::LayerStack;
use crate::losses::{
    mse_grad, mse_loss, total_loss, triplet_grad_anchor, triplet_loss, LossBreakdown,
    DEFAULT_ALPHA, DEFAULT_MARGIN,
};
use crate::model::{Mode, ModelParams};
use crate::rng::{mix, stream_rng, STREAM_SHUFFLE, STREAM_TRIPLET};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub alpha: f64,
    pub margin: f64,
    pub epsilon: f64,
    pub buffer_capacity: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            max_epochs: 100,
            patience: 10,
            alpha: DEFAULT_ALPHA,
            margin: DEFAULT_MARGIN,
            epsilon: DEFAULT_EPSILON,
            buffer_capacity: DEFAULT_CAPACITY,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AesaError::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha {} must be non-negative", self.alpha));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return bad(format!("margin {} must be non-negative", self.margin));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} must lie in (0, 1)", self.epsilon));
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity must be positive".into());
        }
        Ok(())
    }
}

/// One training clip: its layer stack and the four normalized targets.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub stack: LayerStack,
    pub targets: [f64; 4],
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams,
    pub moments: AdamMoments,
    /// One buffer per axis, in `Axis::ALL` order.
    pub buffers: Vec<MemoryBuffer>,
    pub epoch: usize,
    pub best_val_mse: f64,
    pub epochs_since_improvement: usize,
    /// Number of completed training steps; also keys the dropout mask stream.
    pub step: u64,
    triplet_rng: ChaCha8Rng,
}

impl TrainState {
    pub fn new(params: ModelParams, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let buffers = Axis::ALL
            .iter()
            .map(|&axis| MemoryBuffer::new(config.buffer_capacity, axis))
            .collect::<Result<_>>()?;
        Ok(Self {
            moments: AdamMoments::zeros_for(&params),
            params,
            buffers,
            epoch: 0,
            best_val_mse: f64::INFINITY,
            epochs_since_improvement: 0,
            step: 0,
            triplet_rng: stream_rng(config.seed, STREAM_TRIPLET),
        })
    }

    /// Seed of the dropout mask for the next training step.
    pub fn dropout_seed(&self, config: &TrainConfig) -> u64 {
        mix(config.seed, self.step)
    }
}

fn check_targets(targets: &[f64; 4]) -> Result<()> {
    if targets.iter().all(|t| (0.0..=1.0).contains(t)) {
        Ok(())
    } else {
        Err(AesaError::InvalidInput(format!(
            "targets {targets:?} must be normalized to [0, 1]"
        )))
    }
}

/// Objective value and exact gradients for one sample, mining triplets from the
/// current buffers without modifying them.
pub fn loss_and_gradients(
    params: &ModelParams,
    buffers: &[MemoryBuffer],
    sample: &TrainSample,
    config: &TrainConfig,
    mode: Mode,
    triplet_rng: &mut ChaCha8Rng,
) -> Result<(LossBreakdown, ModelParams, Array1<f64>)> {
    check_targets(&sample.targets)?;
    let (output, cache) = params.forward_with_cache(&sample.stack, mode)?;
    let pred = output.clip_scores.0;
    let mse = mse_loss(&pred, &sample.targets)?;
    let d_pred = mse_grad(&pred, &sample.targets);

    let z = output.embedding.as_slice().unwrap();
    let mut valid_axes = Vec::new();
    let mut triplet_sum = 0.0;
    let mut d_z = vec![0.0; z.len()];
    for (buffer, axis) in buffers.iter().zip(Axis::ALL) {
        let anchor_score = sample.targets[axis.index()];
        if let Some(pair) = buffer.sample_triplet(anchor_score, config.epsilon, triplet_rng) {
            let (p, n) = (&pair.positive.embedding, &pair.negative.embedding);
            triplet_sum += triplet_loss(z, p, n, config.margin)?;
            for (acc, g) in d_z
                .iter_mut()
                .zip(triplet_grad_anchor(z, p, n, config.margin)?)
            {
                *acc += g;
            }
            valid_axes.push(axis);
        }
    }
    let triplet = if valid_axes.is_empty() {
        0.0
    } else {
        triplet_sum / valid_axes.len() as f64
    };
    let total = total_loss(mse, triplet, config.alpha);
    if !total.is_finite() {
        return Err(AesaError::NonFinite(format!(
            "loss on clip `{}`: mse {mse}, triplet {triplet}",
            sample.stack.clip_id
        )));
    }

    let d_embedding = (!valid_axes.is_empty()).then(|| {
        let scale = config.alpha / valid_axes.len() as f64;
        Array1::from_iter(d_z.iter().map(|g| g * scale))
    });
    let d_clip = [d_pred[0], d_pred[1], d_pred[2], d_pred[3]];
    let grads = params.backward(&cache, &d_clip, d_embedding.as_ref());
    Ok((
        LossBreakdown {
            mse,
            triplet,
            total,
            alpha: config.alpha,
            valid_triplet_axes: valid_axes,
        },
        grads,
        output.embedding,
    ))
}

/// One optimization step on a single clip: mine against the existing buffers,
/// update parameters with Adam, then push the clip's embedding into every buffer.
pub fn train_step(
    state: &mut TrainState,
    config: &TrainConfig,
    sample: &TrainSample,
) -> Result<LossBreakdown> {
    let mode = Mode::Train {
        seed: state.dropout_seed(config),
    };
    let (losses, grads, embedding) = loss_and_gradients(
        &state.params,
        &state.buffers,
        sample,
        config,
        mode,
        &mut state.triplet_rng,
    )?;
    adam_update(
        &mut state.params,
        &grads,
        &mut state.moments,
        config.learning_rate,
    )?;
    let z = embedding.to_vec();
    for (buffer, target) in state.buffers.iter_mut().zip(sample.targets) {
        buffer.push(z.clone(), target)?;
    }
    state.step += 1;
    Ok(losses)
}

/// Evaluation-mode MSE over all four axes, averaged across clips.
pub fn evaluate_mse(params: &ModelParams, samples: &[TrainSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(AesaError::InvalidInput("empty evaluation set".into()));
    }
    let mut sum = 0.0;
    for s in samples {
        let out = params.forward(&s.stack, Mode::Eval)?;
        sum += mse_loss(&out.clip_scores.0, &s.targets)?;
    }
    Ok(sum / samples.len() as f64)
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub train_triplet: f64,
    pub train_total: f64,
    /// Steps in this epoch where at least one axis produced a triplet.
    pub triplet_steps: usize,
    /// Validation MSE on normalized scores (the early-stopping criterion).
    pub val_mse: f64,
    /// The same validation MSE expressed on the raw rating scale.
    pub val_mse_raw: f64,
    pub buffer_occupancy: [usize; 4],
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// Parameters from the epoch with the lowest validation MSE.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub history: Vec<EpochRecord>,
    pub stopped_early: bool,
}

/// Train with per-epoch seeded shuffling and early stopping. `validate` scores
/// the parameters after each epoch (lower is better).
pub fn fit_with_validator<V>(
    mut state: TrainState,
    train: &[TrainSample],
    config: &TrainConfig,
    scale: &ScoreScale,
    mut validate: V,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult>
where
    V: FnMut(&ModelParams) -> Result<f64>,
{
    config.validate()?;
    if train.is_empty() {
        return Err(AesaError::InvalidInput("empty training set".into()));
    }
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best_params = state.params.clone();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut stream_rng(
            mix(config.seed, epoch as u64),
            STREAM_SHUFFLE,
        ));
        let (mut mse, mut triplet, mut total, mut triplet_steps) = (0.0, 0.0, 0.0, 0);
        for &i in &order {
            let losses = train_step(&mut state, config, &train[i])?;
            mse += losses.mse;
            triplet += losses.triplet;
            total += losses.total;
            triplet_steps += usize::from(!losses.valid_triplet_axes.is_empty());
        }
        let n = train.len() as f64;

        let val_mse = validate(&state.params)?;
        if !val_mse.is_finite() {
            return Err(AesaError::NonFinite(format!(
                "validation MSE at epoch {epoch}"
            )));
        }
        let improved = stopper.observe(epoch, val_mse);
        if improved {
            best_params = state.params.clone();
        }
        state.epoch = epoch;
        state.best_val_mse = stopper.best;
        state.epochs_since_improvement = stopper.epochs_since_improvement;

        let mut occupancy = [0; 4];
        for (o, b) in occupancy.iter_mut().zip(&state.buffers) {
            *o = b.len();
        }
        let record = EpochRecord {
            epoch,
            train_mse: mse / n,
            train_triplet: triplet / n,
            train_total: total / n,
            triplet_steps,
            val_mse,
            val_mse_raw: val_mse * scale.span() * scale.span(),
            buffer_occupancy: occupancy,
            improved,
        };
        on_epoch(&record);
        history.push(record);
        if stopper.should_stop() {
            break;
        }
    }
    let stopped_early = history.len() < config.max_epochs;
    Ok(FitResult {
        params: best_params,
        best_epoch: stopper.best_epoch,
        best_val_mse: stopper.best,
        history,
        stopped_early,
    })
}

/// Train from `params` with validation MSE (normalized scale) as the stopping criterion.
pub fn fit(
    params: ModelParams,
    train: &[TrainSample],
    val: &[TrainSample],
    config: &TrainConfig,
    scale: &ScoreScale,
) -> Result<FitResult> {
    if val.is_empty() {
        return Err(AesaError::InvalidInput("empty validation set".into()));
    }
    let state = TrainState::new(params, config)?;
    fit_with_validator(
        state,
        train,
        config,
        scale,
        |p| evaluate_mse(p, val),
        |_| {},
    )
}

/// Write history as JSON lines, one object per epoch.
pub fn write_history<W: Write>(history: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    for record in history {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
