//! Trace-driven simulator for the trade-off between carbon efficiency and
//! energy efficiency of flexible batch workloads.
//!
//! A workload can react to grid carbon intensity in three ways: shift in time
//! (suspend/resume), shift resources (wait, then run wider), or shift its
//! execution rate (DVFS). Each mechanism saves carbon by moving work into
//! cleaner slots while paying an energy penalty of its own. The crate models
//! all three against a slotted carbon-intensity trace and accounts energy,
//! carbon, and useful work per run.

pub mod engine;
pub mod policy;
pub mod power;
pub mod trace;
pub mod workload;

pub use engine::{
    account, aggregate_over_starts, aggregate_runs, feasible_starts, normalize, normalize_pairs,
    AggregateOutcome, AggregateStats, EngineError, JobContext, RunAccounting,
};
pub use policy::{
    dvfs_worst_case_window, plan_dvfs, plan_suspend_resume, plan_wait_and_scale,
    plan_wait_and_scale_with_overheads, select_lowest_slots, sweep_dvfs, DvfsSweepCell,
    OverheadEvent, OverheadKind, PolicyError, RunConfig, Schedule, SlotAction,
};
pub use power::{max_feasible_nodes, slowdown, PowerError, ScalabilityProfile, ServerPowerModel};
pub use trace::{CarbonTrace, TraceError};
pub use workload::{CheckpointableJob, DvfsJob, ScalableJob, WorkloadError};

/// Any error the crate can produce, for callers that do not care which
/// module it came from.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Tolerance used when converting fractional slot counts to whole slots.
/// Guards against float noise like `0.8 * 30 = 24.000000000000004`.
pub(crate) const SLOT_EPS: f64 = 1e-9;

pub(crate) fn slot_floor(x: f64) -> usize {
    (x + SLOT_EPS).floor() as usize
}

pub(crate) fn slot_ceil(x: f64) -> usize {
    (x - SLOT_EPS).ceil().max(0.0) as usize
}
