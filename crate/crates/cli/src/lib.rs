//! Experiment configuration, runners, and report emission for the
//! recommend-to-match benchmark CLI. The binary in this crate wires these to
//! subcommands; the library surface exists so the runs are scriptable and
//! testable without spawning processes.

pub mod experiment;
pub mod report;

pub use experiment::{
    run_benchmark, run_out_of_sample, run_sensitivity, BenchmarkOutput, ExperimentConfig,
    ExperimentError, GridCell, MethodSpec, ResultRow, SummaryRow, SweepAxis, SweepRow,
};
pub use report::{compute_summary, emit_report, emit_sweep, fmt_num, ReportError, ReportFiles};
