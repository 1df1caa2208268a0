use std::fmt;

use thiserror::Error;

use crate::population::Trajectory;

/// Which hard limit stopped a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cap {
    Population,
    Events,
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cap::Population => f.write_str("max_population"),
            Cap::Events => f.write_str("max_events"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// A run exceeded one of its caps. Never a silent truncation.
    #[error("explosion: {cap} cap of {limit} exceeded at time {time}{}", replicate_suffix(*.replicate))]
    Explosion {
        cap: Cap,
        limit: u64,
        time: f64,
        replicate: Option<u64>,
        /// Everything recorded up to the point the cap triggered.
        partial: Option<Box<Trajectory>>,
    },

    #[error("invalid call: {0}")]
    InvalidCall(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("numerical mismatch: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn replicate_suffix(replicate: Option<u64>) -> String {
    match replicate {
        Some(k) => format!(" (replicate {k})"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a replicate index to an explosion error; other errors pass through.
    pub fn with_replicate(self, index: u64) -> Self {
        match self {
            Error::Explosion {
                cap,
                limit,
                time,
                partial,
                ..
            } => Error::Explosion {
                cap,
                limit,
                time,
                replicate: Some(index),
                partial,
            },
            other => other,
        }
    }

    pub fn is_explosion(&self) -> bool {
        matches!(self, Error::Explosion { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
