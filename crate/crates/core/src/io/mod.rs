//! Configuration files, CSV output and the self-check suite.

pub mod config;
pub mod csv;
pub mod verify;

pub use config::{load_config, parse_config};
pub use csv::{format_float, read_series, write_ensemble, write_histogram, write_json, write_scan, write_series};
pub use verify::{run_verify, CheckResult, VerifyOptions, VerifyReport};
