use nkscreen_lp::LpError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("removing lines {0:?} disconnects the network")]
    IslandingContingency(Vec<usize>),
    #[error("every region row was removed")]
    EmptyRegion,
    #[error("standardized right-hand side is not positive on rows {0:?}")]
    AssumptionViolated(Vec<usize>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the predicted-feasible set is empty")]
    EmptyPredictedSet,
    #[error("the scaling program is infeasible")]
    ScalingInfeasible,
    #[error("scaling ratio {0} is below the minimum")]
    DegenerateRatio(f64),
    #[error("zero objective direction")]
    ZeroDirection,
    #[error("solver reported an unbounded sublevel set")]
    UnboundedSublevel,
    #[error("could not draw {wanted} feasible demand instances within {attempts} attempts")]
    ResampleLimit { wanted: usize, attempts: usize },
    #[error("no scaling epoch had zero validation false negatives")]
    NoReliableEpoch,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown {kind} strategy '{name}'")]
    UnknownStrategy { kind: &'static str, name: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
