use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Two agents closer than the degeneracy guard.
    #[error("degenerate configuration: {} {distance:e} BL apart", describe_pair(*pair))]
    Degenerate {
        pair: Option<(usize, usize)>,
        distance: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration needs at least 2 agents, got {0}")]
    TooFewAgents(usize),

    #[error("could not place {count} distinct agents after {attempts} draws")]
    Placement { count: usize, attempts: u64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid run record: {0}")]
    InvalidRecord(String),

    #[error("i/o error on {}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn describe_pair(pair: Option<(usize, usize)>) -> String {
    match pair {
        Some((i, j)) => format!("agents {i} and {j} are"),
        None => "positions are".to_string(),
    }
}

impl Error {
    pub(crate) fn degenerate(i: usize, j: usize, distance: f64) -> Self {
        Error::Degenerate {
            pair: Some((i.min(j), i.max(j))),
            distance,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
