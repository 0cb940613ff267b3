//! Scenario files, the deterministic runner and its outputs.
//!
//! A run writes `trace.jsonl`, `dts_state.csv`, `cps_state.csv`,
//! `divergence.csv`, `metrics.csv` and `report.json`. The same scenario and
//! seed always produce byte-identical files; wall-clock time is only kept
//! in memory.

mod builtins;
mod inspect;
mod runner;
mod scenario;

pub use builtins::{builtin, builtin_names, builtin_source};
pub use inspect::inspect_trace;
pub use runner::{
    emit_outputs, run_scenario, simulate, HeldCommand, RunReport, SimOutput, SubscriberReport, INTEGRITY_NOTE,
    OUTPUT_FILES,
};
pub use scenario::{
    load_scenario, parse_scenario, seconds_to_nanos, ActionSpec, AnomalySpec, ArmGoalSpec, AttackSpec, AuthSpec,
    FieldLimitSpec, GuardSpec, HostEntry, NetworkSpec, PlantSpec, Program, RuleSpec, Scenario, ScheduledTwist,
    TopicEntry, TwistSpec,
};

use crate::netsim::Nanos;
use crate::plant::format_nanos;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("at t={}: {message}", format_nanos(*t))]
    Runtime { t: Nanos, message: String },
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}
