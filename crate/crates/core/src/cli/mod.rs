//! Batch runs: configuration, orchestration, reports and CSV export.

pub mod config;
pub mod report;
pub mod run;

pub use config::{KeyValues, RunConfig, Task};
pub use report::{read_csv, to_csv, write_csv, FieldExport, Report};
pub use run::{export_field, run, Exit, RunOutcome, FIELDS};

/// Environment variable read for the worker count when `--threads` is absent.
pub const THREADS_ENV: &str = "CONFSUB_THREADS";
