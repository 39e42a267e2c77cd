#![allow(dead_code)]

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use aesa_core::buffer::MemoryBuffer;
use aesa_core::cli::write_wav;
use aesa_core::features::{synthetic_frontend, AudioClip, LayerStack, FRONTEND_RATE};
use aesa_core::model::{Mode, ModelParams};
use aesa_core::training::{loss_and_gradients, TrainConfig, TrainSample};
use aesa_core::Axis;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_stack(rng: &mut ChaCha8Rng, layers: usize, frames: usize, dims: usize) -> LayerStack {
    LayerStack::new(
        Array3::from_shape_simple_fn((layers, frames, dims), || rng.gen_range(-1.0..1.0)),
        "random",
    )
    .unwrap()
}

/// Audio whose spectral tilt, noise level, and loudness all follow `factor` in [0, 1].
pub fn planted_clip(factor: f64, seed: u64, samples: usize) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tone = 200.0 + 2500.0 * factor;
    let noise = 0.4 * (1.0 - factor);
    let gain = 0.1 + 0.5 * factor;
    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
    let data = (0..samples)
        .map(|i| {
            let t = i as f64 / FRONTEND_RATE as f64;
            gain * (2.0 * PI * tone * t + phase).sin() + noise * rng.gen_range(-1.0..1.0)
        })
        .collect();
    AudioClip::new(data, FRONTEND_RATE, format!("clip{seed}")).unwrap()
}

/// Scores are monotone functions of the planted factor, distinct per axis.
pub fn planted_targets(factor: f64) -> [f64; 4] {
    [
        factor,
        factor.powf(1.5),
        0.2 + 0.6 * factor,
        (0.5 * factor + 0.5 * factor * factor).min(1.0),
    ]
}

pub fn planted_corpus(
    n: usize,
    layers: usize,
    dims: usize,
    samples: usize,
    seed: u64,
) -> Vec<TrainSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let factor: f64 = rng.gen_range(0.0..1.0);
            let clip = planted_clip(factor, seed * 10_000 + i as u64, samples);
            TrainSample {
                stack: synthetic_frontend(&clip, seed, layers, dims).unwrap(),
                targets: planted_targets(factor),
            }
        })
        .collect()
}

/// Buffers holding exactly one positive and one negative per axis for `targets`,
/// placed so the triplet hinge is active (positive far, negative near the origin).
pub fn active_triplet_buffers(
    targets: &[f64; 4],
    dim: usize,
    capacity: usize,
) -> Vec<MemoryBuffer> {
    Axis::ALL
        .iter()
        .map(|&axis| {
            let y = targets[axis.index()];
            let mut b = MemoryBuffer::new(capacity, axis).unwrap();
            let far_score = if y < 0.5 { y + 0.4 } else { y - 0.4 };
            let positive: Vec<f64> = (0..dim).map(|d| 1.5 + 0.1 * d as f64).collect();
            let negative: Vec<f64> = (0..dim).map(|d| 0.01 * d as f64).collect();
            b.push(positive, y).unwrap();
            b.push(negative, far_score).unwrap();
            b
        })
        .collect()
}

pub struct GroupError {
    pub group: String,
    pub relative_error: f64,
    pub analytic_norm: f64,
}

/// Compare analytic gradients of the full training objective against central
/// finite differences, grouped by parameter block.
pub fn gradient_check(
    params: &ModelParams,
    buffers: &[MemoryBuffer],
    sample: &TrainSample,
    config: &TrainConfig,
    mode: Mode,
    step: f64,
) -> (Vec<GroupError>, usize) {
    let rng = ChaCha8Rng::seed_from_u64(99);
    let (losses, grads, _) =
        loss_and_gradients(params, buffers, sample, config, mode, &mut rng.clone()).unwrap();
    let valid_axes = losses.valid_triplet_axes.len();
    let objective = |p: &ModelParams| {
        loss_and_gradients(p, buffers, sample, config, mode, &mut rng.clone())
            .unwrap()
            .0
            .total
    };

    let names: Vec<String> = params
        .named_tensors()
        .iter()
        .map(|(n, _)| n.clone())
        .collect();
    let analytic: Vec<Vec<f64>> = grads
        .named_tensors()
        .iter()
        .map(|(_, t)| t.to_vec())
        .collect();
    let mut groups: Vec<(String, f64, f64, f64)> = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let group = name.split('/').next().unwrap().to_string();
        let mut diff2 = 0.0;
        let mut a2 = 0.0;
        let mut n2 = 0.0;
        for (i, &a) in analytic[k].iter().enumerate() {
            let mut plus = params.clone();
            plus.named_tensors_mut()[k].1[i] += step;
            let mut minus = params.clone();
            minus.named_tensors_mut()[k].1[i] -= step;
            let numeric = (objective(&plus) - objective(&minus)) / (2.0 * step);
            diff2 += (a - numeric) * (a - numeric);
            a2 += a * a;
            n2 += numeric * numeric;
        }
        match groups.iter_mut().find(|g| g.0 == group) {
            Some(g) => {
                g.1 += diff2;
                g.2 += a2;
                g.3 += n2;
            }
            None => groups.push((group, diff2, a2, n2)),
        }
    }
    let errors = groups
        .into_iter()
        .map(|(group, diff2, a2, n2)| GroupError {
            group,
            relative_error: diff2.sqrt() / a2.sqrt().max(n2.sqrt()).max(1e-300),
            analytic_norm: a2.sqrt(),
        })
        .collect();
    (errors, valid_axes)
}

pub fn mean_pair_distances(embeddings: &[Vec<f64>], scores: &[f64], epsilon: f64) -> (f64, f64) {
    let (mut near, mut near_n, mut far, mut far_n) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..embeddings.len() {
        for j in (i + 1)..embeddings.len() {
            let d: f64 = embeddings[i]
                .iter()
                .zip(&embeddings[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let gap = (scores[i] - scores[j]).abs();
            if gap < epsilon {
                near += d;
                near_n += 1;
            } else if gap > epsilon {
                far += d;
                far_n += 1;
            }
        }
    }
    (near / near_n as f64, far / far_n as f64)
}

/// WAV files plus `manifest.csv` (raw 1-10 scores); the last three clips are tagged `val`.
pub fn write_corpus(dir: &Path, n: usize, seed: u64) -> Result<(), String> {
    let mut manifest = String::from("clip_id,path,domain,system_id,split,pq,pc,ce,cu\n");
    let domains = ["speech", "music", "audio"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let factor: f64 = rng.gen_range(0.0..1.0);
        // Mixed sample rates exercise the resampler.
        let mut clip = planted_clip(factor, seed * 1000 + i as u64, 4000 + 160 * i);
        if i % 3 == 1 {
            clip.sample_rate = 22_050;
        }
        let file = format!("c{i}.wav");
        write_wav(&dir.join(&file), &clip).map_err(|e| e.to_string())?;
        let raw = |v: f64| 1.0 + 9.0 * v;
        let split = if i < n - 3 { "train" } else { "val" };
        writeln!(
            manifest,
            "c{i},{file},{},sys{},{split},{:.3},{:.3},{:.3},{:.3}",
            domains[i % 3],
            i % 4,
            raw(factor),
            raw(factor * factor),
            raw(0.3 + 0.5 * factor),
            raw(1.0 - factor)
        )
        .unwrap();
    }
    std::fs::write(dir.join("manifest.csv"), manifest).map_err(|e| e.to_string())
}
