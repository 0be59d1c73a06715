use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("rotation is not orthonormal (residual {residual:.3e})")]
    InvalidRotation { residual: f64 },

    #[error(
        "baseline {baseline:.3e} is below the degeneracy threshold; epipolar geometry is undefined"
    )]
    DegenerateBaseline { baseline: f64 },

    #[error("degenerate epipolar line (point is an epipole)")]
    DegenerateLine,

    #[error("empty input")]
    EmptyInput,

    #[error("empty image")]
    EmptyImage,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("up vector is parallel to the viewing direction")]
    DegenerateUp,

    #[error("start camera lies on the vertical axis through the pivot")]
    ZeroRadius,

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("missing pose for frame {0}")]
    MissingPose(String),

    #[error("missing image for frame {0}")]
    MissingImage(String),

    #[error("missing matches for pair ({i}, {j})")]
    MissingMatches { i: usize, j: usize },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: expected 19 fields, found {found}")]
    FieldCount { line: usize, found: usize },

    #[error("line {line}: expected 4 numeric fields, found {found}")]
    Dimension { line: usize, found: usize },

    #[error("line {line}: rotation residual {residual:.3e} is too large to repair")]
    NonRotation { line: usize, residual: f64 },

    #[error("line {line}: duplicate correspondence")]
    DuplicateMatch { line: usize },

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image header: {0}")]
    CorruptHeader(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the content of the inputs.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::File { .. }
                | Error::MissingImage(_)
                | Error::MissingMatches { .. }
        )
    }
}
