//! Simulation harness for coverage and length studies of POSI intervals.

pub mod config;
pub mod generators;
pub mod harness;
pub mod presets;
pub mod report;

pub use config::{
    load_scenarios, load_scenarios_str, BetaPreset, BetaSpec, DesignSpec, ErrorDist, Misspec, ScenarioConfig,
};
pub use generators::{gen_design, gen_errors};
pub use harness::{run_scenario, run_scenario_threads, run_scenario_with, Outcome, SkipReason};
pub use report::{sidecar_json, to_csv_string, write_csv, ProcedureRow, SimulationReport};
