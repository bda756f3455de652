use thiserror::Error;

#[derive(Debug, Error)]
pub enum CnmfError {
    #[error("matrix contains a negative entry at ({row}, {col}): {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid dimensions: {0}")]
    InvalidDims(String),

    #[error("data matrix has zero norm")]
    ZeroDataNorm,

    #[error("oracle too large: N*T = {actual} exceeds cap {cap}")]
    OracleTooLarge { actual: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("nnls did not converge after {iterations} iterations (kkt residual {kkt_residual:.3e})")]
    NnlsNonConvergence { iterations: usize, kkt_residual: f64 },
}

pub type Result<T> = std::result::Result<T, CnmfError>;
