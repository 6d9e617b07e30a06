//! Turns schedules into energy, carbon, and efficiency numbers.
//!
//! Energy integrates run power over occupied slot time plus overhead time;
//! carbon weights the same terms by each slot's intensity. Useful work never
//! includes overhead time, which is what makes the efficiency trade-off
//! visible at all.

use crate::policy::{RunConfig, Schedule, SlotAction};
use crate::power::{slowdown, PowerError, ScalabilityProfile, ServerPowerModel};
use crate::trace::CarbonTrace;
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("schedule [{start}, {start}+{window}) does not fit a trace of {slots} slots")]
    ScheduleOutOfBounds {
        start: usize,
        window: usize,
        slots: usize,
    },
    #[error("schedule has no run slots")]
    EmptySchedule,
    #[error("work fraction {value} at slot {slot} outside (0, 1]")]
    BadWorkFraction { slot: usize, value: f64 },
    #[error("overhead event at slot {slot} does not sit on a run slot of the schedule")]
    BadOverheadEvent { slot: usize },
    #[error("negative overhead duration at slot {slot}")]
    NegativeOverhead { slot: usize },
    #[error("slot configuration does not match the job context (expected {expected})")]
    ContextMismatch { expected: &'static str },
    #[error("run consumed no energy; energy efficiency undefined")]
    ZeroEnergy,
    #[error("run emitted no carbon; carbon efficiency undefined")]
    ZeroCarbon,
    #[error("no results to reduce")]
    EmptyInput,
    #[error("efficiencies must be finite and positive")]
    NonFinite,
    #[error("window of {window} slots leaves no feasible start in a trace of {slots}")]
    NoFeasibleStart { window: usize, slots: usize },
    #[error(transparent)]
    Power(#[from] PowerError),
}

/// Power and progress rates for the job a schedule belongs to.
#[derive(Debug, Clone, Copy)]
pub enum JobContext<'a> {
    /// Fixed-power job (temporal shifting). Overheads draw the same power.
    Temporal { power_watts: f64 },
    /// `k` nodes draw `k` times the per-node power and produce `s(k)` work
    /// per full slot.
    Scaled {
        per_node_power_watts: f64,
        profile: &'a ScalabilityProfile,
    },
    /// Frequency-scaled job; power and rate follow the server ladder.
    Dvfs {
        server: &'a ServerPowerModel,
        io_fraction: f64,
    },
}

impl JobContext<'_> {
    fn power_watts(&self, config: &RunConfig) -> Result<f64, EngineError> {
        match (self, config) {
            (Self::Temporal { power_watts }, RunConfig::Unit) => Ok(*power_watts),
            (Self::Scaled { per_node_power_watts, .. }, RunConfig::Scale(k)) => {
                Ok(per_node_power_watts * *k as f64)
            }
            (Self::Dvfs { server, .. }, RunConfig::Frequency(f)) => Ok(server.power_at(*f)?),
            (Self::Temporal { .. }, _) => Err(EngineError::ContextMismatch { expected: "Unit" }),
            (Self::Scaled { .. }, _) => Err(EngineError::ContextMismatch { expected: "Scale" }),
            (Self::Dvfs { .. }, _) => Err(EngineError::ContextMismatch {
                expected: "Frequency",
            }),
        }
    }

    /// Work produced by a whole slot in this configuration, in
    /// slot-equivalents of the reference configuration.
    fn work_rate(&self, config: &RunConfig) -> Result<f64, EngineError> {
        match (self, config) {
            (Self::Temporal { .. }, RunConfig::Unit) => Ok(1.0),
            (Self::Scaled { profile, .. }, RunConfig::Scale(k)) => {
                Ok(profile.throughput_at_scale(*k)?)
            }
            (Self::Dvfs { server, io_fraction }, RunConfig::Frequency(f)) => {
                Ok(slowdown(*io_fraction, f / server.freq_max)?)
            }
            (Self::Temporal { .. }, _) => Err(EngineError::ContextMismatch { expected: "Unit" }),
            (Self::Scaled { .. }, _) => Err(EngineError::ContextMismatch { expected: "Scale" }),
            (Self::Dvfs { .. }, _) => Err(EngineError::ContextMismatch {
                expected: "Frequency",
            }),
        }
    }
}

/// Everything measured about one simulated run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunAccounting {
    /// Work delivered, in slot-equivalents; excludes overhead time.
    pub useful_work: f64,
    pub energy_kwh: f64,
    pub carbon_g: f64,
    /// First-to-last active slot, inclusive.
    pub completion_slots: usize,
    /// Work per kWh.
    pub energy_efficiency: f64,
    /// Work per gCO2eq.
    pub carbon_efficiency: f64,
}

/// Accounts a schedule against a trace. Suspended slots draw nothing;
/// overhead events draw the power of the run slot they are attached to and
/// are charged at that slot's intensity.
pub fn account(
    schedule: &Schedule,
    ctx: &JobContext,
    trace: &CarbonTrace,
) -> Result<RunAccounting, EngineError> {
    let window = schedule.window_len();
    if schedule.start_slot + window > trace.len() {
        return Err(EngineError::ScheduleOutOfBounds {
            start: schedule.start_slot,
            window,
            slots: trace.len(),
        });
    }
    let slot_hours = trace.slot_duration_hours();

    let mut energy_wh = 0.0;
    let mut carbon_g = 0.0;
    let mut useful_work = 0.0;
    let mut first_run = None;
    let mut last_run = None;
    for (i, action) in schedule.actions.iter().enumerate() {
        let slot = schedule.start_slot + i;
        let SlotAction::Run {
            config,
            work_fraction,
        } = action
        else {
            continue;
        };
        if !(work_fraction.is_finite() && *work_fraction > 0.0 && *work_fraction <= 1.0) {
            return Err(EngineError::BadWorkFraction {
                slot,
                value: *work_fraction,
            });
        }
        let wh = ctx.power_watts(config)? * slot_hours * work_fraction;
        energy_wh += wh;
        carbon_g += wh / 1000.0 * trace.intensity(slot);
        useful_work += ctx.work_rate(config)? * work_fraction;
        first_run.get_or_insert(slot);
        last_run = Some(slot);
    }
    let (Some(first), Some(last)) = (first_run, last_run) else {
        return Err(EngineError::EmptySchedule);
    };

    for event in &schedule.overhead_events {
        if !(event.minutes.is_finite() && event.minutes >= 0.0) {
            return Err(EngineError::NegativeOverhead { slot: event.slot });
        }
        let config = event
            .slot
            .checked_sub(schedule.start_slot)
            .and_then(|i| schedule.actions.get(i))
            .and_then(|a| match a {
                SlotAction::Run { config, .. } => Some(config),
                SlotAction::Suspended => None,
            })
            .ok_or(EngineError::BadOverheadEvent { slot: event.slot })?;
        let wh = ctx.power_watts(config)? * event.minutes / 60.0;
        energy_wh += wh;
        carbon_g += wh / 1000.0 * trace.intensity(event.slot);
    }

    if energy_wh <= 0.0 {
        return Err(EngineError::ZeroEnergy);
    }
    if carbon_g <= 0.0 {
        return Err(EngineError::ZeroCarbon);
    }
    let energy_kwh = energy_wh / 1000.0;
    Ok(RunAccounting {
        useful_work,
        energy_kwh,
        carbon_g,
        completion_slots: last - first + 1,
        energy_efficiency: useful_work / energy_kwh,
        carbon_efficiency: useful_work / carbon_g,
    })
}

/// Normalizes a family of runs the way the figures do: energy efficiency
/// against the best (1.0 = most efficient), carbon efficiency against the
/// worst (1.0 = least efficient, larger is better).
pub fn normalize(results: &[RunAccounting]) -> Result<Vec<(f64, f64)>, EngineError> {
    let pairs: Vec<(f64, f64)> = results
        .iter()
        .map(|r| (r.energy_efficiency, r.carbon_efficiency))
        .collect();
    normalize_pairs(&pairs)
}

/// [`normalize`] on bare `(energy_eff, carbon_eff)` pairs.
pub fn normalize_pairs(pairs: &[(f64, f64)]) -> Result<Vec<(f64, f64)>, EngineError> {
    if pairs.is_empty() {
        return Err(EngineError::EmptyInput);
    }
    if pairs
        .iter()
        .any(|(e, c)| !(e.is_finite() && c.is_finite() && *e > 0.0 && *c > 0.0))
    {
        return Err(EngineError::NonFinite);
    }
    let best_energy = pairs.iter().map(|(e, _)| *e).fold(f64::NEG_INFINITY, f64::max);
    let worst_carbon = pairs.iter().map(|(_, c)| *c).fold(f64::INFINITY, f64::min);
    Ok(pairs
        .iter()
        .map(|(e, c)| (e / best_energy, c / worst_carbon))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStats {
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
}

/// Per-start accounting reduced over all admitted start slots.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateOutcome {
    pub starts_used: usize,
    /// Start slots dropped because their window overran the trace.
    pub starts_excluded: usize,
    pub energy_efficiency: AggregateStats,
    pub carbon_efficiency: AggregateStats,
    pub energy_kwh: AggregateStats,
    pub carbon_g: AggregateStats,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn stats(values: Vec<f64>) -> AggregateStats {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values;
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("accounted metrics are finite"));
    AggregateStats {
        mean,
        p5: percentile(&sorted, 0.05),
        p95: percentile(&sorted, 0.95),
    }
}

/// Reduces per-start runs (already in start order) to aggregate statistics.
pub fn aggregate_runs(runs: &[RunAccounting]) -> Result<AggregateOutcome, EngineError> {
    if runs.is_empty() {
        return Err(EngineError::EmptyInput);
    }
    let pick = |f: fn(&RunAccounting) -> f64| stats(runs.iter().map(f).collect());
    Ok(AggregateOutcome {
        starts_used: runs.len(),
        starts_excluded: 0,
        energy_efficiency: pick(|r| r.energy_efficiency),
        carbon_efficiency: pick(|r| r.carbon_efficiency),
        energy_kwh: pick(|r| r.energy_kwh),
        carbon_g: pick(|r| r.carbon_g),
    })
}

/// Start slots whose `window` fits inside the trace, plus how many slots at
/// the tail had to be dropped.
pub fn feasible_starts(
    trace_len: usize,
    window: usize,
) -> Result<(Vec<usize>, usize), EngineError> {
    if window == 0 || window > trace_len {
        return Err(EngineError::NoFeasibleStart {
            window,
            slots: trace_len,
        });
    }
    let starts: Vec<usize> = (0..=trace_len - window).collect();
    let excluded = trace_len - starts.len();
    Ok((starts, excluded))
}

/// Runs `simulate` for every feasible start of `window` and aggregates. The
/// per-start runs may execute concurrently; the reduction is always in start
/// order.
pub fn aggregate_over_starts<F>(
    trace: &CarbonTrace,
    window: usize,
    simulate: F,
) -> Result<AggregateOutcome, crate::Error>
where
    F: Fn(usize) -> Result<RunAccounting, crate::Error> + Sync,
{
    let (starts, excluded) = feasible_starts(trace.len(), window).map_err(crate::Error::from)?;
    let runs = starts
        .par_iter()
        .map(|&s| simulate(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut outcome = aggregate_runs(&runs).map_err(crate::Error::from)?;
    outcome.starts_excluded = excluded;
    Ok(outcome)
}
