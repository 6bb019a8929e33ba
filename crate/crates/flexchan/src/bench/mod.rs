//! Seeded Monte Carlo harness: TOML configuration with named presets, a
//! deterministic trial engine paired across estimators, and CSV reporting.

mod config;
mod run;

pub use config::{parse_config, scenario_catalog, BenchConfig, Estimator};
pub use run::{
    csv_string, run_scenario, theory_csv_string, theory_rows, write_csv, write_theory_csv,
    ResultRow, TheoryRow,
};
