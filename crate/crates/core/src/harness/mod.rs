//! Run orchestration: trace CSVs, experiment configs and manifests, sweeps
//! over a grid of variants, stepsizes and seeds, and the property suite
//! behind `bsppa verify`.

mod experiment;
mod records;
mod sweep;
pub mod verify;

pub use experiment::{
    execute_run, execute_run_on, manifest_path, ExperimentConfig, Manifest, ProblemSpec, RunOutcome, StreamIds,
    MANIFEST_FORMAT,
};
pub use records::{
    format_float, read_records, read_trace_file, write_records, write_trace_file, SCHEMA_VERSION,
    TRACE_HEADER,
};
pub use sweep::{
    run_sweep, thread_count, write_summary, SummaryRow, SweepCell, SweepSpec, SUMMARY_HEADER,
    THREADS_ENV,
};
pub use verify::{run_verify, PropertyResult, VerifyConfig, VerifyReport};
