//! Cross-checks between the density solver, the observable solver and the
//! particle simulation.

pub mod duality;
pub mod metrics;
pub mod presets;
pub mod scenario;

pub use duality::{duality_audit, duality_audit_with, DualityGap};
pub use metrics::{cross_grid_l1, l1_distance, mass_between, sup_distance};
pub use presets::{InitialLaw, ScenarioPreset, PRESET_NAMES};
pub use scenario::{run_scenario, run_scenario_full, ComparisonReport, ScenarioOutcome, SnapshotMetrics};
pub mod acceptance;

pub use acceptance::{run_acceptance, AcceptanceOptions, AcceptanceRun, CriterionOutcome};
