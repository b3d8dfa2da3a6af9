use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("strategy {strategy} out of range for agent {agent} (K = {k})")]
    StrategyOutOfRange {
        agent: usize,
        strategy: usize,
        k: usize,
    },

    #[error("agent {0} already holds a strategy")]
    SlotOccupied(usize),

    #[error("agent index {agent} out of range (I = {agents})")]
    AgentOutOfRange { agent: usize, agents: usize },

    #[error("instance too large: {required} oracle calls exceed the limit of {limit}")]
    TooLarge { required: u64, limit: u64 },

    #[error("invalid probability row for agent {agent}: {reason}")]
    InvalidDistribution { agent: usize, reason: String },

    #[error("degenerate distribution (total mass {0})")]
    DegenerateRow(f64),

    #[error("non-finite input at index {0}")]
    NonFinite(usize),

    #[error("step size must be positive, got {0}")]
    InvalidStepSize(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("initial profile is a collection of simplex vertices")]
    VertexStart,

    #[error("graph is disconnected: node {0} unreachable from node 0")]
    Disconnected(usize),

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("window of {actual} profiles is shorter than the delay bound {required}")]
    WindowTooShort { required: usize, actual: usize },

    #[error("empty history")]
    EmptyHistory,

    #[error("no movie survives the filters")]
    NoSurvivingMovies,

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("synthetic generation gave up after {0} attempts")]
    RetriesExhausted(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
