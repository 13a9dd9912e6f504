//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A polygon failed validation (too few vertices, self-intersecting, ...).
    #[error("invalid locale `{id}`: {reason}")]
    InvalidLocale { id: String, reason: String },

    /// A coordinate is outside the domain of the requested metric.
    #[error("coordinate ({x}, {y}) outside the haversine domain (x = lon in [-180, 180], y = lat in [-90, 90])")]
    CoordinateDomain { x: f64, y: f64 },

    /// An event referenced a locale id that is not in the locale map.
    #[error("unknown locale id `{0}`")]
    UnknownLocale(String),

    /// An operation that needs observations received none.
    #[error("empty input: {0}")]
    EmptyData(&'static str),

    /// The self-consistency iteration did not reach the tolerance.
    #[error("estimator did not converge within {max_iter} iterations (residual {residual:.3e}, tol {tol:.3e})")]
    NotConverged {
        max_iter: usize,
        residual: f64,
        tol: f64,
    },

    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The median-bandwidth heuristic found no positive pairwise distance.
    #[error("degenerate bandwidth: all points in the combined sample are identical")]
    DegenerateBandwidth,

    /// The requested locale count admits no acceptable grid factorization.
    #[error("cannot arrange {requested} locales on a grid with aspect ratio <= {max_aspect}; nearby valid counts: {suggestions:?}")]
    LocaleCount {
        requested: usize,
        max_aspect: f64,
        suggestions: Vec<usize>,
    },

    /// The simulation environment is unusable (too few locations, ...).
    #[error("invalid world: {0}")]
    InvalidWorld(String),

    /// An I/O failure, annotated with the operation that failed.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    /// A file did not match the expected format.
    #[error("{file}: {message}")]
    Format { file: String, message: String },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn format(file: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
