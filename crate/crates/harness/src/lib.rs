//! Batch verification driver for the matconc bounds: builds seeded corpora,
//! compares every bound with its oracle, and writes NDJSON reports.

pub mod config;
pub mod report;
pub mod suite;

pub use config::{parse_override, IntRange, Suite, SuiteConfig};
pub use report::{
    load_report, render_report, write_report, BoundSummary, Record, Summary, REPORT_HEADER,
};
pub use suite::{
    run_verification_suite, threads_from_env, with_threads, SuiteOutcome, COVERED_OPS, TAIL_POINTS,
};
