//! Last-finish-time analysis for peer-assisted file distribution where every
//! node is limited by its upload rate.
//!
//! A source holding the whole file serves `N` peers. Peers may already hold
//! disjoint pieces of it. The crate computes the minimum time until a chosen
//! set of peers has the complete file, builds bandwidth plans that meet that
//! time, and replays plans in a discrete-time fluid simulator.

pub mod analytic;
pub mod config;
pub mod error;
pub mod fluidsim;
pub mod model;
pub mod multiplicity;
pub mod nested;
pub mod planner;
pub mod sweep;
pub mod tol;

pub use analytic::{
    differentiated_service_time, equal_service_time, helper_quantities, HelperQuantities, Regime,
    ServiceOutcome,
};
pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use fluidsim::{oracle_min_time, simulate, SimResult, Violation, ViolationKind};
pub use model::{
    derive_quantities, make_up_distribution, reduce_ucp_to_up, validate_distribution,
    validate_distribution_with, DerivedQuantities, InitialDistribution, PeerSwarm,
    ValidationReport,
};
pub use multiplicity::{
    classic_multiplicity, phi_multiplicity, service_multiplicity, MultiplicityResult,
    MultiplicityRule,
};
pub use nested::{post_download_distribution, schedule_nested, NextStage, TierSchedule};
pub use planner::{
    check_plan, parse_plan, plan_differentiated, plan_equal_service, plan_to_text, DataCategory,
    Flow, FlowPlan, PlanCheck, Sender, Strategy,
};
pub use sweep::{run_sweep, sweep_csv, SweepRow};
