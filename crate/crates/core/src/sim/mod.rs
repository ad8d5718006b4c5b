//! Scenario catalog, trial generation, analytic effects and Monte Carlo
//! estimation of consistency probabilities.

mod believe;
mod generate;
mod montecarlo;
mod scenario;
mod tables;
mod truth;

pub use believe::{believe_study, generate_believe, BelieveParams, BelieveSummary, ASIAN, NON_ASIAN};
pub use generate::generate_trial;
pub use montecarlo::{
    estimate_cp, estimate_cp_methods, run_replicate, run_replicates, summarize, CpResult,
    ReplicateOutcome,
};
pub use scenario::{
    builtin_scenario, builtin_scenarios, catalog_json, CateShape, Family, HazardLink, ScenarioSpec, ShiftKind,
    COMPLEMENT_LABEL, REGION_LABEL,
};
pub use tables::{reproduce_table, ReferenceTable, TableCell, TableResult, KAPPA_MINUS_R, KAPPA_R_GRID};
pub use truth::{population_ate, true_cate};
