use std::path::PathBuf;

use thiserror::Error;

/// Parse failures for the binary layer-stack and checkpoint formats.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },
    #[error("unsupported format version {found} (supported: {supported})")]
    VersionMismatch { found: u16, supported: u16 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("non-finite value at element {0}")]
    NonFinite(usize),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

/// Manifest validation failures. Line numbers are 1-based and count the header.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifestError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: duplicate clip_id `{clip_id}`")]
    DuplicateId { line: usize, clip_id: String },
    #[error("line {line}: {axis} score {value} outside [{lower}, {upper}]")]
    OutOfRange {
        line: usize,
        axis: String,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("line {line}: unknown domain `{domain}`")]
    UnknownDomain { line: usize, domain: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum AesaError {
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("format error: {0}")]
    Format(#[from] FormatError),
    #[error("manifest error: {0}")]
    Manifest(#[from] ManifestError),
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
    #[error("incomplete report: {0}")]
    IncompleteReport(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AesaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AesaError::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the failure stems from bad inputs (as opposed to a runtime or numeric fault).
    pub fn is_validation(&self) -> bool {
        match self {
            AesaError::NonFinite(_) => false,
            AesaError::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => true,
        }
    }
}

pub type Result<T, E = AesaError> = std::result::Result<T, E>;
