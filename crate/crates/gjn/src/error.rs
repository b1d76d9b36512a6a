use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("network is invalid: {0}")]
    InvalidNetwork(String),

    #[error("routing matrix not transient")]
    NotTransient,

    #[error("block (I-P_{{j-1}}) singular at j={j}")]
    SingularBlock { j: usize },

    #[error("unstable station {station}: rho = {rho}")]
    Unstable { station: usize, rho: f64 },

    #[error("degenerate self-loop at station {station}: w_jj = 1")]
    DegenerateSelfLoop { station: usize },

    #[error("unknown pmf convention `{0}`")]
    UnknownConvention(String),

    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),

    #[error("dead network: no external arrivals and empty initial state")]
    DeadNetwork,

    #[error("oracle requires Jackson network (all primitives exponential)")]
    NotJackson,

    #[error("batch means need at least 2 batches, got {0}")]
    TooFewBatches(usize),

    #[error("degenerate contingency table: {0}")]
    DegenerateTable(String),

    #[error("joint occupancy recording absent: {0}")]
    JointUnavailable(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
