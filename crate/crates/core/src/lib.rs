//! Convolutive nonnegative matrix factorization (CNMF) toolkit.
//!
//! Approximates a nonnegative time-series matrix `X` (features by timebins)
//! by a sum of short temporal motifs convolved with nonnegative activation
//! rows, and fits the model with one of three solvers: multiplicative
//! updates, hierarchical alternating least squares, or alternating
//! nonnegative least squares.

pub mod conv;
pub mod error;
pub mod nnls;
pub mod solvers;
pub mod synth;
pub mod types;

pub use conv::{
    conv_motif, normalized_loss, reconstruct, reconstruct_kron_matvec, reconstruct_kron_rmatvec,
    reconstruct_outer, reconstruct_toeplitz, shift_columns, shift_columns_left, Residual,
};
pub use error::{CnmfError, Result};
pub use solvers::{
    fit, fit_with_init, init_random, Algorithm, FitResult, FitTrace, SolverConfig, StopReason,
    TraceRecord,
};
pub use synth::{synth_generate, SynthDataset, SynthParams};
pub use types::{ActivationMatrix, CnmfModel, DataMatrix, MotifTensor};
