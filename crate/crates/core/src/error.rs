use std::path::PathBuf;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The caller passed arguments outside an operation's domain.
    Usage,
    /// Input files or series are malformed or inconsistent.
    Data,
    /// A numerical procedure failed (non-convergence, singular matrices).
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("series has too few transitions to fit ({onsets} bare->snow, {melts} snow->bare)")]
    DegenerateSeries { onsets: usize, melts: usize },

    #[error("optimizer did not reach gradient tolerance from any of {restarts} start points (best gradient norm {best_gradient_norm:.3e})")]
    NonConvergence {
        restarts: usize,
        best_gradient_norm: f64,
    },

    #[error("observed information matrix is not positive definite")]
    SingularInformation,

    #[error("design matrix is rank deficient: {0}")]
    RankDeficient(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("grid {grid_id} does not share the common date axis: {message}")]
    InconsistentDates { grid_id: String, message: String },

    #[error("grid {grid_id} spans {complete_years} complete August-to-July years, need at least {required}")]
    InsufficientSpan {
        grid_id: String,
        complete_years: usize,
        required: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) => ErrorKind::Usage,
            Error::InvalidSeries(_)
            | Error::Parse { .. }
            | Error::InconsistentDates { .. }
            | Error::InsufficientSpan { .. }
            | Error::Io { .. }
            | Error::Format { .. } => ErrorKind::Data,
            Error::DegenerateSeries { .. }
            | Error::NonConvergence { .. }
            | Error::SingularInformation
            | Error::RankDeficient(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
