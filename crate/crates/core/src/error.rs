use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
    #[error("layout generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },
    #[error("step called on a terminal state")]
    StepOnTerminal,
    #[error("linear system has no unique solution")]
    NoUniqueValue,
    #[error("no convergence after {0} iterations")]
    MaxIterations(usize),
    #[error("histograms do not share a support")]
    SupportMismatch,
    #[error("no future state after step {0}")]
    NoFuture(usize),
    #[error("replay holds no states for task {0}")]
    EmptyTaskReplay(u32),
    #[error("replay is empty")]
    EmptyReplay,
    #[error("generator failure: {0}")]
    Generator(String),
    #[error("tau {tau} is outside the queryable range 1..{max}")]
    TauOutOfRange { tau: usize, max: usize },
    #[error("no plan: every edge from the current state is pruned")]
    NoPlan,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
