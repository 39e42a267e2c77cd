use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AesaError;

/// One of the four perceptual aesthetic axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    /// Production quality.
    PQ,
    /// Production complexity.
    PC,
    /// Content enjoyment.
    CE,
    /// Content usefulness.
    CU,
}

impl Axis {
    /// Canonical model order: head `k` of the network predicts `Axis::ALL[k]`.
    pub const ALL: [Axis; 4] = [Axis::PQ, Axis::PC, Axis::CE, Axis::CU];

    pub fn index(self) -> usize {
        match self {
            Axis::PQ => 0,
            Axis::PC => 1,
            Axis::CE => 2,
            Axis::CU => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::PQ => "PQ",
            Axis::PC => "PC",
            Axis::CE => "CE",
            Axis::CU => "CU",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Axis {
    type Err = AesaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "PQ" => Ok(Axis::PQ),
            "PC" => Ok(Axis::PC),
            "CE" => Ok(Axis::CE),
            "CU" => Ok(Axis::CU),
            other => Err(AesaError::InvalidInput(format!("unknown axis `{other}`"))),
        }
    }
}

/// Content domain of a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Domain {
    Speech,
    Music,
    Audio,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Speech, Domain::Music, Domain::Audio];

    /// Lowercase identifier used in manifests and prediction files.
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Speech => "speech",
            Domain::Music => "music",
            Domain::Audio => "audio",
        }
    }

    /// Capitalized label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Domain::Speech => "Speech",
            Domain::Music => "Music",
            Domain::Audio => "Audio",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = AesaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "speech" => Ok(Domain::Speech),
            "music" => Ok(Domain::Music),
            "audio" => Ok(Domain::Audio),
            other => Err(AesaError::InvalidInput(format!("unknown domain `{other}`"))),
        }
    }
}

/// Scores for the four axes in `Axis::ALL` order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AestheticScores(pub [f64; 4]);

impl AestheticScores {
    pub fn get(&self, axis: Axis) -> f64 {
        self.0[axis.index()]
    }

    pub fn as_array(&self) -> &[f64; 4] {
        &self.0
    }
}
