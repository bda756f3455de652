use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input file: {0}")]
    Malformed(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Core(#[from] cnmf_core::CnmfError),
}

impl CliError {
    /// Process exit code: 2 for malformed input files, 3 for invalid
    /// flags/parameters, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Malformed(_) | CliError::Io(_) => 2,
            CliError::InvalidInput(_) => 3,
            CliError::Core(e) => match e {
                cnmf_core::CnmfError::NegativeEntry { .. } => 2,
                cnmf_core::CnmfError::InvalidDims(_)
                | cnmf_core::CnmfError::InvalidParam(_) => 3,
                _ => 1,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
