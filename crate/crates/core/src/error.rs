use thiserror::Error;

use crate::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("resilience violated: n = {n} requires t < n/3, got t = {t}")]
    Resilience { n: u32, t: u32 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("no honest contributors (g = 0)")]
    NoHonestContributors,

    #[error("moment enumeration supports 1 <= g <= 20 and power 2 or 4, got g = {g}, power = {power}")]
    MomentOutOfRange { g: u32, power: u32 },

    #[error("trial count must be at least 1")]
    NoTrials,

    #[error("value {x} outside the admissible range 0 <= x < n/3 for n = {n}")]
    OutOfRegime { n: u32, x: f64 },

    #[error("cannot summarize an empty batch")]
    EmptyBatch,

    #[error("adversary exceeded its corruption budget: {requested} corrupted, t = {t}")]
    BudgetExceeded { requested: u32, t: u32 },

    #[error("adversary tried to speak for honest node {0}")]
    ForgedSender(NodeId),

    #[error("adversary referenced unknown node {0}")]
    UnknownNode(NodeId),

    #[error("adversary produced {got} per-recipient messages for node {sender}, expected {expected}")]
    RecipientCount { sender: NodeId, got: usize, expected: usize },

    #[error("unknown adversary `{0}`")]
    UnknownAdversary(String),

    #[error("malformed specification `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
}
