//! Scenario files in, verification reports out.
//!
//! A scenario names a manifold, a density, a plane and a list of checks.
//! [`run_scenario`] runs all of them and collects one [`CheckRecord`] per
//! check; [`emit_report`] writes the result as JSON or as a table.

mod report;
mod run;
mod scenario;

pub use report::{emit_report, render_report, report_to_json, report_to_table, round_significant, ReportFormat};
pub use run::{run_scenario, CheckRecord, VerificationReport, TOOL_NAME};
pub use scenario::{
    all_tolerances, family_by_name, load_scenario, parse_scenario, BlCase, CheckName, DensitySpec, DensityTag,
    FactorSpec, ManifoldSpec, PlanePreset, PlaneSpec, QuadratureOverrides, Resolved, SamplingSpec, Scenario,
    ScenarioError, ToleranceKey, TransversalityOverrides, WeightAtomSpec, SCHEMA_VERSION,
};

/// Variable holding the worker count for data-parallel sections.
pub const THREADS_ENV: &str = "KPLANE_THREADS";
