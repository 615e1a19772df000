use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid sizes of two inputs disagree.
    #[error("dimension mismatch: {what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        what: &'static str,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input outside the domain of a mapping (e.g. a rotation of angle >= pi).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no overlap: every correspondence was rejected")]
    NoOverlap,

    #[error("empty evaluation: no valid pixels")]
    EmptyEvaluation,

    /// A loss term became NaN or infinite during optimization.
    #[error("non-finite {term} at scale {scale} ({direction}){}", .pixel.map(|(i, j)| format!(", pixel ({i}, {j})")).unwrap_or_default())]
    NonFinite {
        term: &'static str,
        scale: usize,
        direction: &'static str,
        pixel: Option<(usize, usize)>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn dims(what: &'static str, got: (usize, usize), want: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            what,
            got_w: got.0,
            got_h: got.1,
            want_w: want.0,
            want_h: want.1,
        }
    }
}
