use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("no landmark correspondences within the rejection radius")]
    NoCorrespondences,

    #[error("innovation covariance is singular (condition number {0:.3e})")]
    SingularInnovation(f64),

    #[error("measurement covariance is not invertible")]
    SingularCovariance,

    #[error("information-form gain (P^-1 + Y) is not invertible")]
    SingularGain,

    #[error("robot {from} cannot address robot {to}: not a neighbor")]
    NotNeighbor { from: usize, to: usize },

    #[error("ground truth is empty: MOTA is undefined")]
    EmptyGroundTruth,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed run log table {table}: {reason}")]
    Log { table: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn log(table: &str, reason: impl Into<String>) -> Self {
        Error::Log {
            table: table.to_string(),
            reason: reason.into(),
        }
    }
}
