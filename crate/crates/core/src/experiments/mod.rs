//! Experiment drivers: config files, CSV output, sweeps and the theory checks.

pub mod checks;
pub mod config;
pub mod output;
pub mod sweep;

pub use checks::{run_theory_checks, CheckReport, CheckResult, CheckSpec};
pub use config::{CalibrationSpec, ModeName, PreparedSystem, RunConfig, SystemSpec};
pub use output::{csv_string, fmt_float, write_csv, write_csv_file, CalibrationRow, CsvRecord};
pub use sweep::{run_sweep, Scheme, SweepRow, SweepSpec};
