use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid arm model: {0}")]
    InvalidModel(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("object id `{0}` already present in environment")]
    DuplicateObject(String),
    #[error("object id `{0}` not present in environment")]
    UnknownObject(String),
    #[error("invalid grid specification: {0}")]
    InvalidGrid(String),
    #[error("invalid planner parameters: {0}")]
    InvalidParams(String),
    #[error("no regions to choose from")]
    NoRegions,
    #[error("pose {0} is not mapped")]
    UnmappedPose(usize),
    #[error("pose {0} is a region member and cannot be classified")]
    PoseInRegion(usize),
    #[error("region was built on graph {found}, expected {expected}")]
    GraphMismatch { expected: String, found: String },
    #[error("environment revision {env} is older than region revision {region}")]
    StaleEnvironment { env: u64, region: u64 },
    #[error("region was built at environment revision {region}, environment is at {env}")]
    StaleRegion { env: u64, region: u64 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("invalid rollout request: {0}")]
    InvalidRollout(String),
    #[error("frame revisions differ ({prev} vs {next}); resync with a full frame")]
    RevisionMismatch { prev: u64, next: u64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
