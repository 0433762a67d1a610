//! Monte Carlo experiment harness: scenarios, seeded trials, RMSE scoring
//! and table output.

pub mod emit;
pub mod run;
pub mod scenario;

pub use emit::{emit, format_sig6, from_json, render, to_csv, to_json, Format, CSV_HEADER};
pub use run::{rmse, run_scenario, run_trial, sweep, trial_measurement, trial_sq_error, ResultRow, ResultTable, TrialRecord, SQ_ERR_CAP};
pub use scenario::{spread_thetas, AmplitudeKind, Scenario, SourceSpec, SweepAxis, SweepSpec, DEFAULT_MC};
