use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("fiber has zero arc length")]
    DegenerateFiber,
    #[error("fiber needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("grid mismatch: {left} vs {right} samples")]
    GridMismatch { left: usize, right: usize },
    #[error("warp is not a valid reparameterization at sample {index}: {reason}")]
    NonMonotoneGamma { index: usize, reason: &'static str },
    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),
    #[error("bundle has no fibers")]
    EmptyBundle,
    #[error("points are antipodal on the SRVF sphere (inner product {inner})")]
    AntipodalPoint { inner: f64 },
    #[error("vector is not tangent at its base (inner product {inner:e})")]
    TangencyViolation { inner: f64 },
    #[error("tangent vector or coefficients refer to a different base/basis")]
    BaseMismatch,
    #[error("coefficient shapes differ: {left:?} vs {right:?}")]
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("fiber count mismatch: expected {expected}, found {found}")]
    FiberCountMismatch { expected: usize, found: usize },
    #[error("point set is empty")]
    EmptySet,
    #[error("need at least 2 profiles, got {0}")]
    TooFewProfiles(usize),
    #[error("paired inputs do not line up: {0}")]
    PairMismatch(String),
    #[error("invalid parameter: {0}")]
    BadSpec(String),

    #[error("not a track file: bad magic or header at byte {pos}")]
    BadMagic { pos: u64 },
    #[error("malformed header line at byte {pos}: {line:?}")]
    MalformedHeader { pos: u64, line: String },
    #[error("unknown datatype {value:?} at byte {pos}")]
    UnknownDatatype { value: String, pos: u64 },
    #[error("header has no usable `file` offset (header ends at byte {pos})")]
    MissingOffset { pos: u64 },
    #[error("track payload truncated at byte {pos}")]
    TruncatedPayload { pos: u64 },
    #[error("archive error: {0}")]
    Archive(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
