use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph needs at least one agent")]
    EmptyGraph,
    #[error("invalid edge ({0}, {1}): self-loops are not allowed")]
    InvalidEdge(usize, usize),
    #[error("edge endpoint {endpoint} outside 1..={m}")]
    EndpointOutOfRange { endpoint: usize, m: usize },
    #[error("graph is disconnected: agent {unreached} is not reachable from agent 1")]
    Disconnected { unreached: usize },
    #[error("consensus gain c = {c} must lie in (0, {upper})")]
    GainOutOfRange { c: f64, upper: f64 },
    #[error("priority row of agent {agent} is not on the simplex: {reason}")]
    Simplex { agent: usize, reason: String },
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("iteration index must be >= 1, got {0}")]
    IterationIndex(usize),
    #[error("non-finite iterate at iteration {k} (agent {agent})")]
    Divergence { k: usize, agent: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown scenario {0:?}; expected pareto2, quad3x10, quad100x100 or custom")]
    UnknownScenario(String),
    #[error("run {run_id} failed: {source}")]
    Run {
        run_id: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(expected: impl ToString, found: impl ToString) -> Error {
    Error::Shape {
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
