//! Scenario configuration, simulation, comparison, export and plotting.

pub mod compare;
pub mod config;
pub mod export;
pub mod plot;
pub mod sim;

pub use compare::{compare, Comparison, ComparisonRow};
pub use config::{ControlLaw, EstimatorKind, EtaPolicyKind, ScenarioConfig};
pub use sim::{rmse, run_scenario, FinalState, Run, StepRecord};
