use fusionbench_core::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or a refused filesystem operation.
    #[error("{0}")]
    Usage(String),
    /// A checked property did not hold.
    #[error("{0}")]
    Failure(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 success, 1 property or divergence failure, 2 usage or config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failure(_) | CliError::Core(Error::Divergence { .. }) => 1,
            _ => 2,
        }
    }
}
