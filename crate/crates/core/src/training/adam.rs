use crate::error::{AesaError, Result};
use crate::model::ModelParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, laid out like `ModelParams::named_tensors`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
    /// Number of updates applied so far.
    pub step: u64,
}

impl AdamMoments {
    pub fn zeros_for(params: &ModelParams) -> Self {
        let shapes: Vec<usize> = params
            .named_tensors()
            .iter()
            .map(|(_, t)| t.len())
            .collect();
        Self {
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam step on a flat slice, `step` counting from 1.
pub fn adam_update_slice(
    params: &mut [f64],
    grads: &[f64],
    first: &mut [f64],
    second: &mut [f64],
    lr: f64,
    step: u64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != first.len() || params.len() != second.len() {
        return Err(AesaError::Shape(format!(
            "adam: {} params, {} grads, {}/{} moments",
            params.len(),
            grads.len(),
            first.len(),
            second.len()
        )));
    }
    let correction1 = 1.0 - BETA1.powi(step as i32);
    let correction2 = 1.0 - BETA2.powi(step as i32);
    for i in 0..params.len() {
        let g = grads[i];
        first[i] = BETA1 * first[i] + (1.0 - BETA1) * g;
        second[i] = BETA2 * second[i] + (1.0 - BETA2) * g * g;
        let m_hat = first[i] / correction1;
        let v_hat = second[i] / correction2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

/// Apply one Adam update to every parameter tensor.
pub fn adam_update(
    params: &mut ModelParams,
    grads: &ModelParams,
    moments: &mut AdamMoments,
    lr: f64,
) -> Result<()> {
    let grad_tensors = grads.named_tensors();
    let mut param_tensors = params.named_tensors_mut();
    if grad_tensors.len() != param_tensors.len() || moments.first.len() != param_tensors.len() {
        return Err(AesaError::Shape("adam: tensor count mismatch".into()));
    }
    moments.step += 1;
    for (k, ((_, p), (_, g))) in param_tensors.iter_mut().zip(&grad_tensors).enumerate() {
        adam_update_slice(
            p,
            g,
            &mut moments.first[k],
            &mut moments.second[k],
            lr,
            moments.step,
        )?;
    }
    Ok(())
}
