use alloc::string::String;
use alloc::vec::Vec;

use crate::data::UnitId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("empty graph")]
    EmptyGraph,
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("prediction out of range: {value} not in [0, {bound}]")]
    PredictionOutOfRange { value: f64, bound: f64 },
    #[error("missing predictions for units {0:?}")]
    MissingPredictions(Vec<UnitId>),
    #[error("learner mismatch: {0}")]
    LearnerMismatch(String),
    #[error("invalid learner spec: {0}")]
    InvalidLearner(String),
    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid quantile vectors: {0}")]
    InvalidQuantiles(String),
    #[error("empty ledger")]
    EmptyLedger,
    #[error("out-of-order slice: expected time {expected}, got {got}")]
    OutOfOrder { expected: usize, got: usize },
    #[error("no declared observations yet")]
    EmptyDesign,
    #[error("grid too large: {0} candidates exceed 1e7, use continuous_select")]
    GridTooLarge(u128),
    #[error("invalid bound parameters: {0}")]
    InvalidParameters(String),
    #[error("below stratification threshold: x = {x} < {threshold}")]
    BelowThreshold { x: f64, threshold: f64 },
    #[error("side condition violated: {which} = {given} but the minimal admissible value is {minimal}")]
    SideCondition {
        which: &'static str,
        given: u64,
        minimal: u64,
    },
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("incomplete trajectory: {0}")]
    IncompleteTrajectory(String),
    #[error("misaligned ensembles: {0}")]
    Misaligned(String),
}
