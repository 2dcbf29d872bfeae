//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A fiber file did not conform to the binary format.
    #[error("{path}: {kind} (at byte {offset})")]
    Parse {
        path: PathBuf,
        /// Byte offset of the field that failed to parse.
        offset: u64,
        kind: ParseErrorKind,
    },

    /// An atlas directory or its manifest was rejected.
    #[error("atlas {dir}: {kind}")]
    Atlas { dir: PathBuf, kind: AtlasErrorKind },

    /// A fiber violated its structural invariants.
    #[error("invalid fiber: {0}")]
    InvalidFiber(String),

    /// A caller-supplied parameter was out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An assignment CSV could not be parsed.
    #[error("{path}:{line}: {message}")]
    AssignmentParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// The synthetic generator could not satisfy the requested layout.
    #[error("synthetic generation failed: {0}")]
    Infeasible(String),

    /// Two assignment sequences of different lengths were compared.
    #[error("assignment sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("worker pool: {0}")]
    ThreadPool(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Why a fiber file failed to parse. Every variant is reported together with
/// the byte offset of the offending field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    /// Leading magic bytes are not `FIBR`.
    BadMagic,
    /// The format version field holds an unknown value.
    UnsupportedVersion(u32),
    /// The file ended before the announced payload.
    Truncated,
    /// The file declares zero fibers.
    EmptyDataset,
    /// A fiber declares fewer than two points.
    PointCountTooSmall(u32),
    /// A coordinate is NaN or infinite.
    NonFiniteCoordinate,
    /// All points of a fiber coincide.
    ZeroLengthFiber,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParseErrorKind::BadMagic => write!(f, "bad magic, expected FIBR"),
            ParseErrorKind::UnsupportedVersion(v) => write!(f, "unsupported format version {v}"),
            ParseErrorKind::Truncated => write!(f, "file truncated"),
            ParseErrorKind::EmptyDataset => write!(f, "file contains no fibers"),
            ParseErrorKind::PointCountTooSmall(n) => {
                write!(f, "fiber has {n} points, need at least 2")
            }
            ParseErrorKind::NonFiniteCoordinate => write!(f, "non-finite coordinate"),
            ParseErrorKind::ZeroLengthFiber => write!(f, "fiber has zero length"),
        }
    }
}

/// Why an atlas failed to load.
#[derive(Debug, Clone, PartialEq)]
pub enum AtlasErrorKind {
    MissingManifest,
    EmptyManifest,
    /// A manifest line could not be interpreted.
    ManifestLine { line: usize, message: String },
    DuplicateBundleName { line: usize, name: String },
    InvalidThreshold { line: usize, name: String, value: f64 },
    /// A centroid does not hold exactly the required number of points.
    WrongCentroidPointCount {
        bundle: String,
        fiber_index: usize,
        points: usize,
    },
}

impl std::fmt::Display for AtlasErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AtlasErrorKind::MissingManifest => write!(f, "manifest bundles.txt not found"),
            AtlasErrorKind::EmptyManifest => write!(f, "manifest declares no bundles"),
            AtlasErrorKind::ManifestLine { line, message } => {
                write!(f, "bundles.txt:{line}: {message}")
            }
            AtlasErrorKind::DuplicateBundleName { line, name } => {
                write!(f, "bundles.txt:{line}: duplicate bundle name {name:?}")
            }
            AtlasErrorKind::InvalidThreshold { line, name, value } => {
                write!(
                    f,
                    "bundles.txt:{line}: bundle {name:?} has non-positive threshold {value}"
                )
            }
            AtlasErrorKind::WrongCentroidPointCount {
                bundle,
                fiber_index,
                points,
            } => write!(
                f,
                "bundle {bundle:?}: centroid {fiber_index} has {points} points, expected 21"
            ),
        }
    }
}
