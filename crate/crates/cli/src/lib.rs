//! Benchmark harness around `ortho-core`: per-bit benchmark generation,
//! CNF preprocessing, external SAT solver runs and CSV reports.

pub mod bench;
pub mod record;
pub mod report;
pub mod solver;

pub use bench::{
    gen_bench, preprocess, BenchError, BenchOptions, BenchRun, BitSelection, Preprocessed,
};
pub use record::{read_records, write_records, BenchRecord, RecordError, SolverVerdict};
pub use report::{report, Report, ReportRow};
pub use solver::{run_external_solver, SolverConfig, SolverRun};
