//! Cradle-to-gate life-cycle scoring for battery production, plus the
//! statistics used to put such scores in context: a recursive GWP engine
//! over process-inventory graphs with swappable regional electricity
//! mixes, descriptive statistics over a study-level dataset, and
//! least-squares regression with a full residual-diagnostic suite.
//!
//! The crate is organized around four concerns:
//!
//! - [`inventory`]: process graphs, emission-factor tables, scenario
//!   substitution rules, and their file formats.
//! - [`engine`]: scoring, contribution trees, scenario comparison, and
//!   basis conversion.
//! - [`stats`]: dataset ingestion, unit harmonization, descriptive
//!   statistics, yearly averages.
//! - [`regress`]: the six model forms, OLS with inference, and residual
//!   diagnostics (Durbin-Watson, moments, Jarque-Bera).
//!
//! Batch entry points (`engine::compare_scenarios`,
//! `regress::model_selection_report`) run data-parallel under the default
//! `parallel` feature and sequentially without it; results are identical
//! either way.

pub mod engine;
pub mod inventory;
pub mod parallel;
pub mod regress;
pub mod special;
pub mod stats;

pub use engine::{
    compare_scenarios, contribution_ranking, convert_basis, sankey_edges, unit_score,
    BasisConversion, EngineError, ScoreBreakdown,
};
pub use inventory::{
    apply_scenario, validate, EmissionFactorTable, ExchangeKind, ExchangeRef, Finding,
    InventoryError, InventoryGraph, ScenarioConfig,
};
pub use regress::{
    diagnostics, durbin_watson, f_p_value, fit, jarque_bera, model_selection_report, moments,
    t_p_value, FitResult, ModelSpec, RegressError, RegressionInput, ResidualDiagnostics,
};
pub use stats::{
    describe, ingest_dataset, to_mass_basis, yearly_averages, DescriptiveStats, FunctionalUnit,
    StatsError, StudyRecord, YearlyAverage,
};
