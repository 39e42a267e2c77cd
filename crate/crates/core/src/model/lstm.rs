use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::model::params::{LstmDirection, LstmLayer};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Activations kept for backpropagation, indexed by time position.
#[derive(Debug, Clone)]
pub(crate) struct DirectionCache {
    /// Post-activation gates `[i, f, g, o]`, `T × 4H`.
    gates: Array2<f64>,
    cells: Array2<f64>,
    hidden: Array2<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    input: Array2<f64>,
    forward: DirectionCache,
    backward: DirectionCache,
}

fn positions(frames: usize, reverse: bool) -> impl Iterator<Item = usize> {
    (0..frames).map(move |i| if reverse { frames - 1 - i } else { i })
}

fn previous(t: usize, frames: usize, reverse: bool) -> Option<usize> {
    if reverse {
        (t + 1 < frames).then_some(t + 1)
    } else {
        t.checked_sub(1)
    }
}

fn run_direction(p: &LstmDirection, input: ArrayView2<f64>, reverse: bool) -> DirectionCache {
    let frames = input.nrows();
    let hidden_size = p.w_hidden.nrows();
    let projected = input.dot(&p.w_input) + &p.bias;

    let mut gates = Array2::zeros((frames, 4 * hidden_size));
    let mut cells = Array2::zeros((frames, hidden_size));
    let mut hidden = Array2::zeros((frames, hidden_size));
    let mut h_prev = Array1::<f64>::zeros(hidden_size);
    let mut c_prev = Array1::<f64>::zeros(hidden_size);

    for t in positions(frames, reverse) {
        let pre = &projected.row(t) + &h_prev.dot(&p.w_hidden);
        let mut g_row = gates.row_mut(t);
        for j in 0..hidden_size {
            let i = sigmoid(pre[j]);
            let f = sigmoid(pre[hidden_size + j]);
            let g = pre[2 * hidden_size + j].tanh();
            let o = sigmoid(pre[3 * hidden_size + j]);
            g_row[j] = i;
            g_row[hidden_size + j] = f;
            g_row[2 * hidden_size + j] = g;
            g_row[3 * hidden_size + j] = o;
            let c = f * c_prev[j] + i * g;
            cells[[t, j]] = c;
            hidden[[t, j]] = o * c.tanh();
        }
        h_prev.assign(&hidden.row(t));
        c_prev.assign(&cells.row(t));
    }
    DirectionCache {
        gates,
        cells,
        hidden,
    }
}

/// Backpropagation through time for one direction. Accumulates parameter
/// gradients into `grads` and returns the gradient w.r.t. the input sequence.
fn backward_direction(
    p: &LstmDirection,
    input: ArrayView2<f64>,
    cache: &DirectionCache,
    d_hidden: ArrayView2<f64>,
    reverse: bool,
    grads: &mut LstmDirection,
) -> Array2<f64> {
    let frames = input.nrows();
    let hs = p.w_hidden.nrows();
    let mut d_pre = Array2::<f64>::zeros((frames, 4 * hs));
    let mut h_prev_all = Array2::<f64>::zeros((frames, hs));
    let mut dh_next = Array1::<f64>::zeros(hs);
    let mut dc_next = Array1::<f64>::zeros(hs);
    let w_hidden_t = p.w_hidden.t();

    let order: Vec<usize> = positions(frames, reverse).collect();
    for &t in order.iter().rev() {
        let prev = previous(t, frames, reverse);
        let gates = cache.gates.row(t);
        let mut d_row = d_pre.row_mut(t);
        for j in 0..hs {
            let (i, f, g, o) = (
                gates[j],
                gates[hs + j],
                gates[2 * hs + j],
                gates[3 * hs + j],
            );
            let c = cache.cells[[t, j]];
            let c_prev = prev.map_or(0.0, |q| cache.cells[[q, j]]);
            let tc = c.tanh();
            let dh = d_hidden[[t, j]] + dh_next[j];
            let d_o = dh * tc;
            let dc = dh * o * (1.0 - tc * tc) + dc_next[j];
            dc_next[j] = dc * f;
            d_row[j] = dc * g * i * (1.0 - i);
            d_row[hs + j] = dc * c_prev * f * (1.0 - f);
            d_row[2 * hs + j] = dc * i * (1.0 - g * g);
            d_row[3 * hs + j] = d_o * o * (1.0 - o);
        }
        dh_next = d_pre.row(t).dot(&w_hidden_t);
        if let Some(q) = prev {
            h_prev_all.row_mut(t).assign(&cache.hidden.row(q));
        }
    }

    grads.w_input += &input.t().dot(&d_pre);
    grads.w_hidden += &h_prev_all.t().dot(&d_pre);
    grads.bias += &d_pre.sum_axis(Axis(0));
    d_pre.dot(&p.w_input.t())
}

impl LstmLayer {
    pub(crate) fn forward(&self, input: Array2<f64>) -> (Array2<f64>, LayerCache) {
        let fwd = run_direction(&self.forward, input.view(), false);
        let bwd = run_direction(&self.backward, input.view(), true);
        let hs = self.forward.w_hidden.nrows();
        let mut out = Array2::zeros((input.nrows(), 2 * hs));
        out.slice_mut(s![.., ..hs]).assign(&fwd.hidden);
        out.slice_mut(s![.., hs..]).assign(&bwd.hidden);
        (
            out,
            LayerCache {
                input,
                forward: fwd,
                backward: bwd,
            },
        )
    }

    pub(crate) fn backward(
        &self,
        cache: &LayerCache,
        d_out: ArrayView2<f64>,
        grads: &mut LstmLayer,
    ) -> Array2<f64> {
        let hs = self.forward.w_hidden.nrows();
        let dx_fwd = backward_direction(
            &self.forward,
            cache.input.view(),
            &cache.forward,
            d_out.slice(s![.., ..hs]),
            false,
            &mut grads.forward,
        );
        let dx_bwd = backward_direction(
            &self.backward,
            cache.input.view(),
            &cache.backward,
            d_out.slice(s![.., hs..]),
            true,
            &mut grads.backward,
        );
        dx_fwd + dx_bwd
    }
}
