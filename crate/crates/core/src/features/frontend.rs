use ndarray::Array3;
use rand::Rng;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{AesaError, Result};
use crate::features::{AudioClip, LayerStack};
use crate::rng::{mix, stream_rng, STREAM_FRONTEND};

/// Sample rate every frontend expects.
pub const FRONTEND_RATE: u32 = 16_000;
/// Hop and window length of the frontend: one frame per 20 ms at 16 kHz.
pub const FRAME_SAMPLES: usize = 320;
const BANDS: usize = 16;
// Log band energies, the frame log energy, and a constant bias term.
const STATS: usize = BANDS + 2;

/// Number of frames the frontend emits for `samples` input samples.
pub fn frame_count(samples: usize) -> usize {
    (samples / FRAME_SAMPLES).max(1)
}

// Log-spaced band edges over FFT bins 1..=FRAME_SAMPLES/2.
fn band_edges() -> [usize; BANDS + 1] {
    let top = (FRAME_SAMPLES / 2) as f64;
    let mut edges = [0usize; BANDS + 1];
    for (b, e) in edges.iter_mut().enumerate() {
        *e = top.powf(b as f64 / BANDS as f64).round() as usize;
    }
    edges[BANDS] = FRAME_SAMPLES / 2 + 1;
    for b in 1..=BANDS {
        if edges[b] <= edges[b - 1] {
            edges[b] = edges[b - 1] + 1;
        }
    }
    edges
}

fn frame_stats(frames: usize, samples: &[f64]) -> Vec<[f64; STATS]> {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(FRAME_SAMPLES);
    let edges = band_edges();
    let mut buf = vec![Complex::new(0.0, 0.0); FRAME_SAMPLES];

    (0..frames)
        .map(|t| {
            let start = t * FRAME_SAMPLES;
            let end = (start + FRAME_SAMPLES).min(samples.len());
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            for (c, s) in buf.iter_mut().zip(&samples[start..end]) {
                c.re = *s;
            }
            let energy: f64 = samples[start..end].iter().map(|s| s * s).sum();
            fft.process(&mut buf);

            let mut stats = [0.0; STATS];
            for b in 0..BANDS {
                let power: f64 = buf[edges[b]..edges[b + 1]]
                    .iter()
                    .map(|c| c.norm_sqr())
                    .sum();
                stats[b] = (1e-8 + power).ln() / 10.0;
            }
            stats[BANDS] = (1e-8 + energy).ln() / 10.0;
            stats[BANDS + 1] = 1.0;
            stats
        })
        .collect()
}

/// Deterministic stand-in for a pretrained frontend.
///
/// Each 320-sample frame is summarized by log filterbank-like band energies,
/// and each layer applies its own seeded random projection followed by `tanh`.
/// The output depends only on `(samples, seed, layers, dims)`.
pub fn synthetic_frontend(
    clip: &AudioClip,
    seed: u64,
    layers: usize,
    dims: usize,
) -> Result<LayerStack> {
    clip.validate()?;
    if clip.sample_rate != FRONTEND_RATE {
        return Err(AesaError::InvalidClip(format!(
            "{}: frontend expects {FRONTEND_RATE} Hz, got {}",
            clip.clip_id, clip.sample_rate
        )));
    }
    if layers == 0 || dims == 0 {
        return Err(AesaError::Shape(
            "frontend needs at least one layer and one dim".into(),
        ));
    }

    let frames = frame_count(clip.samples.len());
    let stats = frame_stats(frames, &clip.samples);
    let scale = (3.0 / STATS as f64).sqrt();

    let mut values = Array3::zeros((layers, frames, dims));
    for l in 0..layers {
        let mut rng = stream_rng(mix(seed, l as u64), STREAM_FRONTEND);
        let projection: Vec<f64> = (0..STATS * dims)
            .map(|_| rng.gen_range(-1.0..1.0) * scale)
            .collect();
        for (t, s) in stats.iter().enumerate() {
            for d in 0..dims {
                let acc: f64 = s
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v * projection[k * dims + d])
                    .sum();
                values[[l, t, d]] = acc.tanh();
            }
        }
    }
    LayerStack::new(values, clip.clip_id.clone())
}
