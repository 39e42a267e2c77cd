use std::f64::consts::PI;

use crate::error::{AesaError, Result};

/// Kaiser window shape parameter of the resampling kernel.
pub const KAISER_BETA: f64 = 8.6;
/// Kernel half-width in zero crossings of the (possibly narrowed) sinc.
pub const ZERO_CROSSINGS: f64 = 32.0;
/// Fraction of the lower Nyquist frequency kept by the anti-aliasing filter.
const CUTOFF_FRACTION: f64 = 0.95;

/// A mono waveform with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub clip_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, clip_id: impl Into<String>) -> Result<Self> {
        let clip = Self {
            samples,
            sample_rate,
            clip_id: clip_id.into(),
        };
        clip.validate()?;
        Ok(clip)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(AesaError::InvalidClip(format!(
                "{}: no samples",
                self.clip_id
            )));
        }
        if self.sample_rate == 0 {
            return Err(AesaError::InvalidClip(format!(
                "{}: zero sample rate",
                self.clip_id
            )));
        }
        if self.samples.iter().any(|s| !s.is_finite()) {
            return Err(AesaError::InvalidClip(format!(
                "{}: non-finite sample",
                self.clip_id
            )));
        }
        Ok(())
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// The output holds `floor(n · target / source)` samples (at least one), so the
/// duration changes by less than one output sample period. Amplitudes are not
/// normalized and nothing is trimmed; a clip already at `target_rate` is
/// returned unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip> {
    clip.validate()?;
    if target_rate == 0 {
        return Err(AesaError::InvalidInput(
            "target rate must be positive".into(),
        ));
    }
    if clip.sample_rate == target_rate {
        return Ok(clip.clone());
    }

    let n_in = clip.samples.len();
    let source = clip.sample_rate as f64;
    let target = target_rate as f64;
    let n_out = ((n_in as u128 * target_rate as u128) / clip.sample_rate as u128).max(1) as usize;

    let cutoff = CUTOFF_FRACTION * (target / source).min(1.0);
    let half_width = ZERO_CROSSINGS / cutoff;
    let norm = bessel_i0(KAISER_BETA);
    let step = source / target;

    let samples = (0..n_out)
        .map(|j| {
            let centre = j as f64 * step;
            let lo = (centre - half_width).ceil().max(0.0) as usize;
            let hi = ((centre + half_width).floor() as usize).min(n_in - 1);
            let mut acc = 0.0;
            for k in lo..=hi {
                let offset = centre - k as f64;
                let u = offset / half_width;
                if u.abs() > 1.0 {
                    continue;
                }
                let window = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / norm;
                acc += clip.samples[k] * cutoff * sinc(cutoff * offset) * window;
            }
            acc
        })
        .collect();

    Ok(AudioClip {
        samples,
        sample_rate: target_rate,
        clip_id: clip.clip_id.clone(),
    })
}
