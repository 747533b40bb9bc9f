use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("payoff {name} must be strictly positive, got {value}")]
    NonPositivePayoff { name: &'static str, value: f64 },

    #[error("{name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },

    #[error("alpha = beta: the game has no interior strategy")]
    NoInteriorStrategy,

    #[error("degenerate parameters ({0}); use the numeric test")]
    Degenerate(&'static str),

    #[error("population size must be at least 2, got {0}")]
    PopulationTooSmall(usize),

    #[error("count {n} outside {lo}..={hi}")]
    CountOutOfRange { n: usize, lo: usize, hi: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("no convergence after {0} iterations")]
    NoConvergence(u64),

    #[error("negative density {value:e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("inconclusive dominance test: margin {0:e} is inside the neutrality floor")]
    Inconclusive(f64),

    #[error("imitation kernel value {0} outside [0, 1]")]
    KernelOutOfRange(f64),

    #[error("imitation kernel has no full shape; only Psi(0) and Psi'(0) are known")]
    KernelShapeUnknown,

    #[error("Psi(0) = 0: drift-dominated singular limit, not solvable by the diffusion scheme")]
    DriftDominated,

    #[error("initial point sits on the unstable equilibrium x* = {0}")]
    Indeterminate(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
