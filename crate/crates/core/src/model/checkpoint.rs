//! Checkpoint file layout (all integers and floats little-endian):
//!
//! ```text
//! "AESC"                 magic
//! u16                    version
//! u32 x 6                input_dim, layer_count, adapter_dim, lstm_hidden,
//!                        shared_dim, attention_heads
//! f64                    dropout
//! f64 x 2                score scale lower, upper
//! f64 ...                parameters in `ModelParams::named_tensors` order
//! ```

use std::io::Write;
use std::path::Path;

use crate::data::ScoreScale;
use crate::error::{AesaError, FormatError, Result};
use crate::model::{ModelConfig, ModelParams};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"AESC";
pub const CHECKPOINT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 6 * 4 + 3 * 8;

/// Trained parameters together with the rating scale used for de-normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub scale: ScoreScale,
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut out: W) -> std::io::Result<()> {
    let c = &ckpt.params.config;
    out.write_all(&CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    for n in [
        c.input_dim,
        c.layer_count,
        c.adapter_dim,
        c.lstm_hidden,
        c.shared_dim,
        c.attention_heads,
    ] {
        out.write_all(&(n as u32).to_le_bytes())?;
    }
    for v in [c.dropout, ckpt.scale.lower, ckpt.scale.upper] {
        out.write_all(&v.to_le_bytes())?;
    }
    for (_, tensor) in ckpt.params.named_tensors() {
        for v in tensor {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(FormatError::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: bytes[..bytes.len().min(4)].to_vec(),
        }
        .into());
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        }
        .into());
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(FormatError::VersionMismatch {
            found: version,
            supported: CHECKPOINT_VERSION,
        }
        .into());
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let config = ModelConfig {
        input_dim: u32_at(6),
        layer_count: u32_at(10),
        adapter_dim: u32_at(14),
        lstm_hidden: u32_at(18),
        shared_dim: u32_at(22),
        attention_heads: u32_at(26),
        dropout: f64_at(30),
    };
    config
        .validate()
        .map_err(|e| FormatError::InvalidHeader(e.to_string()))?;
    let scale = ScoreScale::new(f64_at(38), f64_at(46))
        .map_err(|e| FormatError::InvalidHeader(e.to_string()))?;

    let mut params = ModelParams::init(&config, 0)?;
    let expected = HEADER_LEN + params.num_parameters() * 8;
    if bytes.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: bytes.len(),
        }
        .into());
    }
    if bytes.len() > expected {
        return Err(FormatError::TrailingBytes(bytes.len() - expected).into());
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .enumerate();
    for (_, tensor) in params.named_tensors_mut() {
        for slot in tensor.iter_mut() {
            let (i, v) = values.next().expect("length checked above");
            if !v.is_finite() {
                return Err(FormatError::NonFinite(i).into());
            }
            *slot = v;
        }
    }
    Ok(Checkpoint { params, scale })
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_checkpoint(ckpt, &mut buf).map_err(|e| AesaError::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| AesaError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| AesaError::io(path, e))?;
    read_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::LayerStack;
    use crate::model::Mode;
    use ndarray::Array3;

    fn sample() -> Checkpoint {
        Checkpoint {
            params: ModelParams::init(&ModelConfig::tiny(3), 11).unwrap(),
            scale: ScoreScale::new(1.0, 10.0).unwrap(),
        }
    }

    fn encode(c: &Checkpoint) -> Vec<u8> {
        let mut buf = Vec::new();
        write_checkpoint(c, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_preserves_predictions_bitwise() {
        let ckpt = sample();
        let loaded = read_checkpoint(&encode(&ckpt)).unwrap();
        assert_eq!(loaded, ckpt);
        let stack = LayerStack::new(
            Array3::from_shape_fn((3, 7, 8), |(l, t, d)| ((l + 2 * t + 3 * d) as f64).sin()),
            "c",
        )
        .unwrap();
        let a = ckpt.params.forward(&stack, Mode::Eval).unwrap();
        let b = loaded.params.forward(&stack, Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_magic_and_version_are_distinct() {
        let mut bytes = encode(&sample());
        bytes[3] = b'F';
        assert!(matches!(
            read_checkpoint(&bytes),
            Err(AesaError::Format(FormatError::BadMagic { .. }))
        ));
        let mut bytes = encode(&sample());
        bytes[4] = 2;
        assert!(matches!(
            read_checkpoint(&bytes),
            Err(AesaError::Format(FormatError::VersionMismatch {
                found: 2,
                ..
            }))
        ));
    }

    #[test]
    fn truncated_and_corrupt_payloads_fail() {
        let bytes = encode(&sample());
        assert!(matches!(
            read_checkpoint(&bytes[..bytes.len() - 1]),
            Err(AesaError::Format(FormatError::Truncated { .. }))
        ));
        let mut bytes = encode(&sample());
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&f64::INFINITY.to_le_bytes());
        assert!(matches!(
            read_checkpoint(&bytes),
            Err(AesaError::Format(FormatError::NonFinite(_)))
        ));
    }
}
