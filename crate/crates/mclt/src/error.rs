use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no analytic moment provider for model {0}")]
    UnsupportedProvider(String),
    #[error("model not admissible for this bound: {0}")]
    UnsupportedModel(String),
    #[error("population overflow at generation {generation}")]
    PopulationOverflow { generation: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("hard assertion failed: {0}")]
    HardAssertion(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
