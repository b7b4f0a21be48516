//! One-dimensional compressible Navier-Stokes in Lagrangian mass coordinates
//! for a polytropic gas whose density decays to vacuum in the far field.
//!
//! The unknowns are the specific volume `J`, the velocity `v` and the
//! pressure `pi` on a staggered grid over `[-L, L]`. A semi-implicit Picard
//! stepper advances them; diagnostics track the energy identity, the
//! Jacobian floor, the entropy floor and weighted norms of the effective
//! viscous flux `G = mu v_y / J - pi`.
//!
//! Every numerical type is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases at the crate root fix it to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod euler;
pub mod grid;
pub mod init;
pub mod mms;
pub mod scalar;
pub mod stepper;
pub mod tridiag;

pub use diagnostics::{
    audit_trajectory, c0_formula, energy, entropy_field, j_lower_bound_reference, momentum,
    reference_norms, temperature_field, weighted_flux_norms, AuditCheck, AuditReport,
    AuditTolerances, DiagnosticsRecord, Tracker, CSV_COLUMNS,
};
pub use error::{Error, Result};
pub use euler::{euler_mass, flow_map, to_euler, EulerSnapshot};
pub use grid::{CellField, Grid1D, NodeField};
pub use init::{
    validate_hypotheses, AnalyticHypotheses, Bump, FamilyMeta, GasConstants, HypothesisReport,
    InitialData, RegimeTags,
};
pub use mms::{
    builtin_case, convergence_study, run_forced, AxisReport, CaseId, ErrorTable, ManufacturedCase,
    OrderReport, StudyPlan,
};
pub use scalar::Scalar;
pub use stepper::{
    advance, picard_step, run, run_observed, BcMode, LagState, RunFailure, RunOptions, RunOutput,
    Source, StepStats, StepperConfig,
};

pub type Grid = Grid1D<f64>;
pub type Gas = GasConstants<f64>;
pub type Data = InitialData<f64>;
pub type State = LagState<f64>;
pub type Config = StepperConfig<f64>;
pub type Options = RunOptions<f64>;
pub type Output = RunOutput<f64>;
pub type Failure = RunFailure<f64>;
pub type Stats = StepStats<f64>;
pub type Record = DiagnosticsRecord<f64>;
pub type Hypotheses = HypothesisReport<f64>;
pub type Snapshot = EulerSnapshot<f64>;
pub type Case = ManufacturedCase<f64>;
pub type Orders = OrderReport<f64>;
pub type Errors = ErrorTable<f64>;
