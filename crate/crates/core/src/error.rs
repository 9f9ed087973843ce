use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("`{0}` must be finite and strictly positive")]
    NotPositive(&'static str),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("angle {0} rad lies outside the open interval (-pi/2, pi/2)")]
    AngleOutOfRange(f64),
    #[error("coalition has no members")]
    EmptyCoalition,
    #[error("representative channels are linearly dependent")]
    RankDeficient,
    #[error("channel vector is zero or not finite")]
    DegenerateChannel,
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("UE {0} is not a member of the coalition")]
    NotAMember(usize),
    #[error("coalition is not assigned to a subchannel")]
    Unassigned,
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("no non-forbidden coalition can host UE {0}")]
    Infeasible(usize),
    #[error("need at least as many UEs ({ues}) as coalitions ({coalitions})")]
    TooFewUes { ues: usize, coalitions: usize },
    #[error("invalid coalition structure: {0}")]
    InvalidStructure(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("rates must satisfy 0 < rate_min < rate_max, got [{0}, {1}]")]
    InvalidRates(f64, f64),
    #[error("SINR must be positive, got {0}")]
    NonPositiveSinr(f64),
    #[error("assignment matrix must be square and non-empty")]
    NotSquare,
    #[error("no perfect matching with finite weight exists")]
    NoFeasibleMatching,
    #[error("power fixed point did not converge within {0} iterations")]
    NotConverged(usize),
    #[error("structure has {coalitions} coalitions for {subchannels} subchannels")]
    ShapeMismatch { coalitions: usize, subchannels: usize },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("could not read config {path}: {source}")]
    ReadConfig { path: String, source: std::io::Error },
    #[error("could not parse config: {0}")]
    ParseConfig(#[from] toml::de::Error),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("drop with seed {seed} stayed infeasible after {attempts} attempts: {last}")]
    Infeasible { seed: u64, attempts: usize, last: String },
    #[error("nothing to summarize: {0}")]
    Empty(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
