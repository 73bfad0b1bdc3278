use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is rank deficient: numerical rank {rank} of {cols} columns{}", fmt_iteration(*.iteration))]
    RankDeficient {
        rank: usize,
        cols: usize,
        iteration: Option<usize>,
    },

    #[error("variance screening selected no coordinates (alpha_n = {alpha_n:.6}, max diagonal = {max_diag:.6})")]
    EmptySelection { alpha_n: f64, max_diag: f64 },

    #[error("degenerate eigenvalue gap: ell_{m} = ell_{} = {value}", .m + 1)]
    DegenerateGap { m: usize, value: f64 },

    #[error("initial basis has {available} columns but m = {m} were requested")]
    InsufficientInit { available: usize, m: usize },

    #[error("experiment cell {cell}: {failed} of {total} replicates failed")]
    TooManyFailures {
        cell: String,
        failed: usize,
        total: usize,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn fmt_iteration(iteration: Option<usize>) -> String {
    match iteration {
        Some(k) => format!(" at iteration {k}"),
        None => String::new(),
    }
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::EmptySelection { .. }
            | Error::InsufficientInit { .. } => 2,
            Error::RankDeficient { .. }
            | Error::DegenerateGap { .. }
            | Error::TooManyFailures { .. } => 3,
            Error::Io { .. } | Error::Format { .. } => 4,
        }
    }

    /// True for failures that come from the numerics rather than the configuration.
    pub fn is_numerical(&self) -> bool {
        self.exit_code() == 3
    }
}
