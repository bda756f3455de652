//! File formats, benchmark harness, and reconstruction-form checks backing
//! the `cnmf` command-line tool.

pub mod bench;
pub mod check_forms;
pub mod error;
pub mod format;

pub use bench::{run_bench, summary_line, time_to_reach, BenchConfig, BenchRun};
pub use check_forms::{check_forms, CheckReport, FORM_TOLERANCE};
pub use error::{CliError, Result};
pub use format::{read_matrix, read_tensor, write_matrix, write_tensor, write_trace};
