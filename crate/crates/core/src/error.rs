use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("correlation matrix of UE {ue} at AP {ap} is not positive semi-definite")]
    Factorization { ue: usize, ap: usize },

    #[error("pilot covariance of pilot {pilot} at AP {ap} is numerically singular (condition {condition:e})")]
    SingularPilotCovariance {
        pilot: usize,
        ap: usize,
        condition: f64,
    },

    #[error("{what} is numerically singular (condition {condition:e})")]
    IllConditioned { what: &'static str, condition: f64 },

    #[error("local combiner system at AP {ap} is singular")]
    SingularCombiner { ap: usize },

    #[error("Monte-Carlo trial {trial}: {source}")]
    Trial {
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate LSFD statistics for UE {ue}")]
    DegenerateStatistics { ue: usize },

    #[error("invalid LSFD weights for UE {ue}")]
    InvalidWeights { ue: usize },

    #[error("grid search supports at most {max} UEs, got {ues}")]
    GridTooLarge { ues: usize, max: usize },

    #[error("empirical CDF of an empty sample set")]
    EmptySamples,

    #[error("{failed} of {total} setups failed")]
    CampaignFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
