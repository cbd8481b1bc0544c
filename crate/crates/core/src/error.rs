use thiserror::Error;

/// Errors raised by the analytic toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("invalid flow graph: {0}")]
    InvalidGraph(String),

    #[error("flow graph system is singular (sink unreachable or gains exceed 1)")]
    SingularSystem,

    #[error("path/loop enumeration budget exceeded ({0})")]
    EnumerationBudget(String),

    #[error("branch-gain invariant violated: {0}")]
    GainInvariant(String),

    #[error("assisted state {0} can never deliver the packet (zero success probability)")]
    DeadAssistState(String),

    #[error("PU queue unstable: lambda_P = {lambda} >= mu_P = {mu}")]
    Unstable { lambda: f64, mu: f64 },

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
}

pub type Result<T> = std::result::Result<T, Error>;
