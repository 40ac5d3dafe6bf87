//! Config-driven experiment runner: grid scans, dynamical runs, spectral/dynamical
//! comparisons and audits, with CSV/JSON artifacts and a pass/fail manifest.

mod config;
mod modes;
mod output;

pub use config::{
    DynamicsSettings, Expectation, ExperimentConfig, GridSpec, Mode, ModelEntry, ModelSpec, OutputSpec,
    ParsevalSettings, SparseState, StoneSettings, Tolerances, SCHEMA_VERSION,
};
pub use modes::{
    run, RunOptions, AUDIT_HEADER, COMPARE_HEADER, COMPLETENESS_HEADER, PARSEVAL_HEADER, SCAN_HEADER, STONE_HEADER,
};
pub use output::{
    summarize, to_csv, to_json, write_outcome, Check, Excluded, Failure, Manifest, Relation, RunOutcome, RunSummary,
    Summary, MANIFEST, SUMMARY, TIMING,
};
