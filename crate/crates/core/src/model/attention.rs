use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::model::params::AxisHead;

const NORM_EPS: f64 = 1e-5;
/// Query rows processed at once when attention probabilities are not kept.
const QUERY_CHUNK: usize = 256;

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

#[derive(Debug, Clone)]
pub(crate) struct HeadCache {
    query: Array2<f64>,
    key: Array2<f64>,
    value: Array2<f64>,
    /// Attention probabilities per head, each `T × T`.
    probs: Vec<Array2<f64>>,
    attended: Array2<f64>,
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
    normed: Array2<f64>,
    scores: Array1<f64>,
}

impl AxisHead {
    /// Frame scores in (0, 1) for one axis. When `keep` is false the attention
    /// matrix is never materialized, so memory stays linear in `T`.
    pub(crate) fn forward(
        &self,
        x: ArrayView2<f64>,
        heads: usize,
        keep: bool,
    ) -> (Array1<f64>, Option<HeadCache>) {
        let frames = x.nrows();
        let dim = x.ncols();
        let head_dim = dim / heads;
        let scale = 1.0 / (head_dim as f64).sqrt();

        let query = x.dot(&self.w_query) + &self.b_query;
        let key = x.dot(&self.w_key) + &self.b_key;
        let value = x.dot(&self.w_value) + &self.b_value;

        let mut attended = Array2::<f64>::zeros((frames, dim));
        let mut probs = Vec::new();
        for h in 0..heads {
            let cols = s![.., h * head_dim..(h + 1) * head_dim];
            let (q, k, v) = (query.slice(cols), key.slice(cols), value.slice(cols));
            if keep {
                let mut p = q.dot(&k.t()) * scale;
                softmax_rows(&mut p);
                attended.slice_mut(cols).assign(&p.dot(&v));
                probs.push(p);
            } else {
                let mut start = 0;
                while start < frames {
                    let end = (start + QUERY_CHUNK).min(frames);
                    let mut p = q.slice(s![start..end, ..]).dot(&k.t()) * scale;
                    softmax_rows(&mut p);
                    attended
                        .slice_mut(s![start..end, h * head_dim..(h + 1) * head_dim])
                        .assign(&p.dot(&v));
                    start = end;
                }
            }
        }

        let residual = attended.dot(&self.w_out) + &self.b_out + x;
        let mean = residual.mean_axis(Axis(1)).unwrap();
        let centered = &residual - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).mean_axis(Axis(1)).unwrap();
        let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
        let normalized = &centered * &inv_std.view().insert_axis(Axis(1));
        let normed = &normalized * &self.norm_gamma + &self.norm_beta;
        let scores = (normed.dot(&self.w_frame) + self.b_frame[0]).mapv(sigmoid);

        let cache = keep.then(|| HeadCache {
            query,
            key,
            value,
            probs,
            attended,
            normalized,
            inv_std,
            normed,
            scores: scores.clone(),
        });
        (scores, cache)
    }

    /// Backpropagates `d_scores` (gradient w.r.t. the frame scores), accumulating
    /// into `grads`; returns the gradient w.r.t. the head input.
    pub(crate) fn backward(
        &self,
        x: ArrayView2<f64>,
        cache: &HeadCache,
        d_scores: &Array1<f64>,
        heads: usize,
        grads: &mut AxisHead,
    ) -> Array2<f64> {
        let dim = x.ncols();
        let head_dim = dim / heads;
        let scale = 1.0 / (head_dim as f64).sqrt();

        let d_logit = d_scores * &cache.scores.mapv(|s| s * (1.0 - s));
        grads.w_frame += &cache.normed.t().dot(&d_logit);
        grads.b_frame[0] += d_logit.sum();
        let d_normed = d_logit
            .view()
            .insert_axis(Axis(1))
            .dot(&self.w_frame.view().insert_axis(Axis(0)));

        grads.norm_gamma += &(&d_normed * &cache.normalized).sum_axis(Axis(0));
        grads.norm_beta += &d_normed.sum_axis(Axis(0));
        let d_norm = &d_normed * &self.norm_gamma;
        let mean_d = d_norm.mean_axis(Axis(1)).unwrap();
        let mean_dx = (&d_norm * &cache.normalized).mean_axis(Axis(1)).unwrap();
        let centered = &d_norm - &mean_d.view().insert_axis(Axis(1));
        let d_residual = (centered - &cache.normalized * &mean_dx.view().insert_axis(Axis(1)))
            * cache.inv_std.view().insert_axis(Axis(1));

        grads.w_out += &cache.attended.t().dot(&d_residual);
        grads.b_out += &d_residual.sum_axis(Axis(0));
        let d_attended = d_residual.dot(&self.w_out.t());

        let mut d_query = Array2::<f64>::zeros(cache.query.raw_dim());
        let mut d_key = Array2::<f64>::zeros(cache.key.raw_dim());
        let mut d_value = Array2::<f64>::zeros(cache.value.raw_dim());
        for (h, p) in cache.probs.iter().enumerate() {
            let cols = s![.., h * head_dim..(h + 1) * head_dim];
            let d_o = d_attended.slice(cols);
            let d_p = d_o.dot(&cache.value.slice(cols).t());
            d_value.slice_mut(cols).assign(&p.t().dot(&d_o));
            let row_dot = (&d_p * p).sum_axis(Axis(1));
            let d_s = (&d_p - &row_dot.insert_axis(Axis(1))) * p * scale;
            d_query
                .slice_mut(cols)
                .assign(&d_s.dot(&cache.key.slice(cols)));
            d_key
                .slice_mut(cols)
                .assign(&d_s.t().dot(&cache.query.slice(cols)));
        }

        grads.w_query += &x.t().dot(&d_query);
        grads.b_query += &d_query.sum_axis(Axis(0));
        grads.w_key += &x.t().dot(&d_key);
        grads.b_key += &d_key.sum_axis(Axis(0));
        grads.w_value += &x.t().dot(&d_value);
        grads.b_value += &d_value.sum_axis(Axis(0));

        d_residual
            + d_query.dot(&self.w_query.t())
            + d_key.dot(&self.w_key.t())
            + d_value.dot(&self.w_value.t())
    }
}
