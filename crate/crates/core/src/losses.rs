//! Regression and metric-learning objectives.

use serde::Serialize;

use crate::axis::Axis;
use crate::error::{AesaError, Result};

/// Triplet margin, in squared-distance units.
pub const DEFAULT_MARGIN: f64 = 0.5;
/// Weight of the triplet term in the total loss.
pub const DEFAULT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub mse: f64,
    pub triplet: f64,
    pub total: f64,
    pub alpha: f64,
    pub valid_triplet_axes: Vec<Axis>,
}

/// Mean squared error `(1/N) Σ (pred_i − target_i)²`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(AesaError::Shape(format!(
            "{} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(AesaError::InvalidInput("mse of an empty vector".into()));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// `d mse / d pred`.
pub fn mse_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len() as f64;
    pred.iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Hinge on squared Euclidean distances:
/// `max(‖a − p‖² − ‖a − n‖² + margin, 0)`.
pub fn triplet_loss(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> Result<f64> {
    if anchor.len() != positive.len() || anchor.len() != negative.len() {
        return Err(AesaError::Shape(format!(
            "triplet dims {}/{}/{}",
            anchor.len(),
            positive.len(),
            negative.len()
        )));
    }
    let value = squared_distance(anchor, positive) - squared_distance(anchor, negative) + margin;
    Ok(value.max(0.0))
}

/// Gradient of [`triplet_loss`] w.r.t. the anchor; zero when the hinge is inactive.
pub fn triplet_grad_anchor(
    anchor: &[f64],
    positive: &[f64],
    negative: &[f64],
    margin: f64,
) -> Result<Vec<f64>> {
    let active = triplet_loss(anchor, positive, negative, margin)? > 0.0;
    Ok(positive
        .iter()
        .zip(negative)
        .map(|(p, n)| if active { 2.0 * (n - p) } else { 0.0 })
        .collect())
}

pub fn total_loss(mse: f64, triplet: f64, alpha: f64) -> f64 {
    mse + alpha * triplet
}
