use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{AesaError, FormatError, Result};

pub const STACK_MAGIC: [u8; 4] = *b"AESF";
pub const STACK_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 3;

/// Per-clip hidden states of a frontend, shaped `layers × frames × dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    values: Array3<f64>,
    pub clip_id: String,
}

impl LayerStack {
    pub fn new(values: Array3<f64>, clip_id: impl Into<String>) -> Result<Self> {
        let (l, t, d) = values.dim();
        if l == 0 || t == 0 || d == 0 {
            return Err(AesaError::Shape(format!(
                "layer stack must be non-empty in every dimension, got {l}x{t}x{d}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AesaError::NonFinite(format!("layer stack element {i}")));
        }
        Ok(Self {
            values,
            clip_id: clip_id.into(),
        })
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn layers(&self) -> usize {
        self.values.dim().0
    }

    pub fn frames(&self) -> usize {
        self.values.dim().1
    }

    pub fn dims(&self) -> usize {
        self.values.dim().2
    }

    pub fn layer(&self, l: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(ndarray::Axis(0), l)
    }

    /// A one-layer stack wrapping an already fused `T × D` sequence.
    pub fn from_sequence(seq: Array2<f64>, clip_id: impl Into<String>) -> Result<Self> {
        let (t, d) = seq.dim();
        let values = seq
            .into_shape_with_order((1, t, d))
            .map_err(|e| AesaError::Shape(e.to_string()))?;
        Self::new(values, clip_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackHeader {
    pub layers: usize,
    pub frames: usize,
    pub dims: usize,
}

fn parse_header(bytes: &[u8]) -> Result<StackHeader, FormatError> {
    if bytes.len() < 4 || bytes[..4] != STACK_MAGIC {
        return Err(FormatError::BadMagic {
            expected: STACK_MAGIC,
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != STACK_VERSION {
        return Err(FormatError::VersionMismatch {
            found: version,
            supported: STACK_VERSION,
        });
    }
    let dim = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let header = StackHeader {
        layers: dim(6),
        frames: dim(10),
        dims: dim(14),
    };
    if header.layers == 0 || header.frames == 0 || header.dims == 0 {
        return Err(FormatError::InvalidHeader(format!(
            "zero dimension in {}x{}x{}",
            header.layers, header.frames, header.dims
        )));
    }
    Ok(header)
}

/// Decode a layer stack from the `AESF` binary layout.
pub fn read_layer_stack(bytes: &[u8], clip_id: impl Into<String>) -> Result<LayerStack> {
    let header = parse_header(bytes)?;
    let count = header
        .layers
        .checked_mul(header.frames)
        .and_then(|n| n.checked_mul(header.dims))
        .ok_or_else(|| FormatError::InvalidHeader("dimension product overflows".into()))?;
    let expected = HEADER_LEN + count * 4;
    let payload = &bytes[HEADER_LEN..];
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
    let mut values = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FormatError::NonFinite(i).into());
        }
        values.push(v as f64);
    }
    let values = Array3::from_shape_vec((header.layers, header.frames, header.dims), values)
        .map_err(|e| AesaError::Shape(e.to_string()))?;
    LayerStack::new(values, clip_id)
}

/// Encode a layer stack. Values are narrowed to 32-bit floats.
pub fn write_layer_stack<W: Write>(stack: &LayerStack, mut out: W) -> std::io::Result<()> {
    let (l, t, d) = stack.values.dim();
    out.write_all(&STACK_MAGIC)?;
    out.write_all(&STACK_VERSION.to_le_bytes())?;
    for n in [l, t, d] {
        out.write_all(&(n as u32).to_le_bytes())?;
    }
    // Standard layout iteration is layer-major, then frame, then dim.
    for v in stack.values.iter() {
        out.write_all(&(*v as f32).to_le_bytes())?;
    }
    out.flush()
}

pub fn load_layer_stack(path: impl AsRef<Path>) -> Result<LayerStack> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| AesaError::io(path, e))?;
    let clip_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_layer_stack(&bytes, clip_id)
}

pub fn save_layer_stack(stack: &LayerStack, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| AesaError::io(path, e))?;
    write_layer_stack(stack, BufWriter::new(file)).map_err(|e| AesaError::io(path, e))
}

/// Read only the header of a stack file, for cheap up-front shape validation.
pub fn read_stack_header(path: impl AsRef<Path>) -> Result<StackHeader> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| AesaError::io(path, e))?;
    let mut buf = Vec::with_capacity(HEADER_LEN);
    BufReader::new(file)
        .take(HEADER_LEN as u64)
        .read_to_end(&mut buf)
        .map_err(|e| AesaError::io(path, e))?;
    Ok(parse_header(&buf)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn encode(stack: &LayerStack) -> Vec<u8> {
        let mut buf = Vec::new();
        write_layer_stack(stack, &mut buf).unwrap();
        buf
    }

    #[test]
    fn header_dims_are_echoed() {
        let stack = LayerStack::new(Array3::zeros((12, 5, 768)), "a").unwrap();
        let parsed = read_layer_stack(&encode(&stack), "a").unwrap();
        assert_eq!(
            (parsed.layers(), parsed.frames(), parsed.dims()),
            (12, 5, 768)
        );
    }

    #[test]
    fn layout_is_little_endian_layer_major() {
        let values = Array3::from_shape_fn((2, 1, 2), |(l, _, d)| (l * 2 + d) as f64);
        let bytes = encode(&LayerStack::new(values, "x").unwrap());
        assert_eq!(&bytes[..4], b"AESF");
        assert_eq!(&bytes[4..6], &1u16.to_le_bytes());
        assert_eq!(&bytes[6..10], &2u32.to_le_bytes());
        assert_eq!(&bytes[10..14], &1u32.to_le_bytes());
        assert_eq!(&bytes[14..18], &2u32.to_le_bytes());
        let floats: Vec<f32> = bytes[18..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(floats, vec![0.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let stack = LayerStack::new(Array3::ones((2, 3, 4)), "t").unwrap();
        let bytes = encode(&stack);
        let err = read_layer_stack(&bytes[..bytes.len() - 4], "t").unwrap_err();
        assert!(matches!(
            err,
            AesaError::Format(FormatError::Truncated { .. })
        ));
    }

    #[test]
    fn bad_magic_and_non_finite_are_distinct() {
        let stack = LayerStack::new(Array3::ones((1, 1, 2)), "m").unwrap();
        let mut bytes = encode(&stack);
        bytes[0] = b'X';
        assert!(matches!(
            read_layer_stack(&bytes, "m").unwrap_err(),
            AesaError::Format(FormatError::BadMagic { .. })
        ));

        let mut bytes = encode(&stack);
        bytes[18..22].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            read_layer_stack(&bytes, "m").unwrap_err(),
            AesaError::Format(FormatError::NonFinite(0))
        ));

        let mut bytes = encode(&stack);
        bytes[4] = 9;
        assert!(matches!(
            read_layer_stack(&bytes, "m").unwrap_err(),
            AesaError::Format(FormatError::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn random_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values = Array3::from_shape_fn((3, 4, 5), |_| rng.gen_range(-10.0f32..10.0) as f64);
        let stack = LayerStack::new(values, "r").unwrap();
        let parsed = read_layer_stack(&encode(&stack), "r").unwrap();
        for (a, b) in stack.values().iter().zip(parsed.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_dimension_is_rejected() {
        assert!(LayerStack::new(Array3::zeros((0, 2, 2)), "e").is_err());
    }
}
