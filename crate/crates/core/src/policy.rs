//! Planning policies: which slots a job occupies and in what configuration.
//!
//! All three planners are carbon-greedy and deliberately ignore their own
//! overheads when choosing slots; the cost of a decision shows up in the
//! accounting, not in the decision itself.

use crate::engine::{account, aggregate_runs, AggregateOutcome, JobContext};
use crate::power::{slowdown, PowerError};
use crate::trace::{CarbonTrace, TraceError};
use crate::workload::{CheckpointableJob, DvfsJob, ScalableJob};
use crate::{slot_ceil, SLOT_EPS};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("cannot select {n} slots from a window of {window}")]
    SelectionTooLarge { n: usize, window: usize },
    #[error("checkpoint + restore ({minutes} min) must fit inside one slot ({slot_hours} h)")]
    OverheadTooLong { minutes: f64, slot_hours: f64 },
    #[error("job needs {execution} slots but the deadline allows only {window}")]
    InfeasibleDeadline { execution: usize, window: usize },
    #[error("scale k={k} needs {needed} slots but the window has only {window}")]
    ScaleNeedsMoreSlots { k: u32, needed: usize, window: usize },
    #[error("trace ended at slot {end} with {remaining} of {work} work left")]
    TraceExhausted { end: usize, remaining: f64, work: f64 },
    #[error("sweep needs at least one start slot")]
    NoStarts,
    #[error(transparent)]
    Engine(#[from] crate::engine::EngineError),
}

/// Configuration a slot runs in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunConfig {
    /// The job's only configuration (temporal shifting).
    Unit,
    /// `k` nodes at once.
    Scale(u32),
    /// A ladder frequency in MHz.
    Frequency(f64),
}

/// What happens during one slot of a schedule window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotAction {
    /// Busy for `work_fraction` of the slot (1.0 = the whole slot).
    Run {
        config: RunConfig,
        work_fraction: f64,
    },
    Suspended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverheadKind {
    Checkpoint,
    Restore,
}

/// A checkpoint or restore, charged at the slot it is attached to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadEvent {
    /// Absolute trace slot; always a `Run` slot of the same schedule.
    pub slot: usize,
    pub kind: OverheadKind,
    pub minutes: f64,
}

/// A planned execution: per-slot actions from `start_slot`, plus overhead
/// events at segment boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start_slot: usize,
    /// `actions[i]` covers trace slot `start_slot + i`.
    pub actions: Vec<SlotAction>,
    pub overhead_events: Vec<OverheadEvent>,
}

impl Schedule {
    pub fn window_len(&self) -> usize {
        self.actions.len()
    }

    /// Absolute indices of slots that do work, ascending.
    pub fn run_slots(&self) -> Vec<usize> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, a)| matches!(a, SlotAction::Run { .. }))
            .map(|(i, _)| self.start_slot + i)
            .collect()
    }

    /// Number of maximal stretches of consecutive run slots.
    pub fn segment_count(&self) -> usize {
        let runs = self.run_slots();
        if runs.is_empty() {
            return 0;
        }
        1 + runs.windows(2).filter(|p| p[1] != p[0] + 1).count()
    }
}

/// The `n` lowest-intensity slots of `[window_start, window_start + window_len)`,
/// ties broken toward the earlier slot. Returned ascending.
pub fn select_lowest_slots(
    trace: &CarbonTrace,
    window_start: usize,
    window_len: usize,
    n: usize,
) -> Result<Vec<usize>, PolicyError> {
    let window = trace.window(window_start, window_len)?;
    if n > window_len {
        return Err(PolicyError::SelectionTooLarge { n, window: window_len });
    }
    let mut order: Vec<usize> = (0..window_len).collect();
    order.sort_by(|&a, &b| {
        window[a]
            .partial_cmp(&window[b])
            .expect("trace intensities are finite")
            .then(a.cmp(&b))
    });
    let mut picked: Vec<usize> = order[..n].iter().map(|&i| window_start + i).collect();
    picked.sort_unstable();
    Ok(picked)
}

fn segment_events(selected: &[usize], checkpoint_minutes: f64, restore_minutes: f64) -> Vec<OverheadEvent> {
    let mut events = Vec::new();
    for (i, &slot) in selected.iter().enumerate() {
        let starts_segment = i == 0 || selected[i - 1] + 1 != slot;
        let ends_segment = i + 1 == selected.len() || selected[i + 1] != slot + 1;
        // No restore into the first segment, no checkpoint out of the last:
        // the job starts cold and finishes for good.
        if starts_segment && i != 0 {
            events.push(OverheadEvent {
                slot,
                kind: OverheadKind::Restore,
                minutes: restore_minutes,
            });
        }
        if ends_segment && i + 1 != selected.len() {
            events.push(OverheadEvent {
                slot,
                kind: OverheadKind::Checkpoint,
                minutes: checkpoint_minutes,
            });
        }
    }
    events.sort_by_key(|e| (e.slot, e.kind == OverheadKind::Checkpoint));
    events
}

fn actions_for_selection(
    window_start: usize,
    window_len: usize,
    selected: &[usize],
    config: RunConfig,
    last_fraction: f64,
) -> Vec<SlotAction> {
    let mut actions = vec![SlotAction::Suspended; window_len];
    for (i, &slot) in selected.iter().enumerate() {
        let work_fraction = if i + 1 == selected.len() { last_fraction } else { 1.0 };
        actions[slot - window_start] = SlotAction::Run {
            config,
            work_fraction,
        };
    }
    actions
}

/// Suspend/resume plan: run the job's execution slots in the cheapest slots
/// of the deadline window, checkpointing out of and restoring into every
/// break between segments.
pub fn plan_suspend_resume(
    job: &CheckpointableJob,
    trace: &CarbonTrace,
    start: usize,
) -> Result<Schedule, PolicyError> {
    let slot_hours = trace.slot_duration_hours();
    let overhead_minutes = job.checkpoint_minutes + job.restore_minutes;
    if overhead_minutes / 60.0 >= slot_hours {
        return Err(PolicyError::OverheadTooLong {
            minutes: overhead_minutes,
            slot_hours,
        });
    }
    let window = job.deadline_slots(slot_hours);
    let execution = job.execution_slots(slot_hours);
    if execution > window {
        return Err(PolicyError::InfeasibleDeadline { execution, window });
    }
    let selected = select_lowest_slots(trace, start, window, execution)?;
    let work_slots = job.duration_hours / slot_hours;
    let last_fraction = (work_slots - (execution as f64 - 1.0)).clamp(0.0, 1.0).max(SLOT_EPS);
    Ok(Schedule {
        start_slot: start,
        actions: actions_for_selection(start, window, &selected, RunConfig::Unit, last_fraction),
        overhead_events: segment_events(&selected, job.checkpoint_minutes, job.restore_minutes),
    })
}

/// Wait&Scale plan: within the single-node completion window, run the
/// cheapest `ceil(work / s(k))` slots on `k` nodes. Scaling itself is
/// treated as free of checkpoint cost; see
/// [`plan_wait_and_scale_with_overheads`] for the variant that charges it.
pub fn plan_wait_and_scale(
    job: &ScalableJob,
    k: u32,
    trace: &CarbonTrace,
    start: usize,
) -> Result<Schedule, PolicyError> {
    let (schedule, _) = wait_and_scale_selection(job, k, trace, start)?;
    Ok(schedule)
}

/// Same slot choice as [`plan_wait_and_scale`], but with checkpoint/restore
/// events at segment boundaries like the suspend/resume planner.
pub fn plan_wait_and_scale_with_overheads(
    job: &ScalableJob,
    k: u32,
    trace: &CarbonTrace,
    start: usize,
    checkpoint_minutes: f64,
    restore_minutes: f64,
) -> Result<Schedule, PolicyError> {
    let (mut schedule, selected) = wait_and_scale_selection(job, k, trace, start)?;
    schedule.overhead_events = segment_events(&selected, checkpoint_minutes, restore_minutes);
    Ok(schedule)
}

fn wait_and_scale_selection(
    job: &ScalableJob,
    k: u32,
    trace: &CarbonTrace,
    start: usize,
) -> Result<(Schedule, Vec<usize>), PolicyError> {
    let window = job.window_slots();
    let s = job.profile.throughput_at_scale(k)?;
    let needed = slot_ceil(job.work / s);
    if needed > window {
        return Err(PolicyError::ScaleNeedsMoreSlots {
            k,
            needed,
            window,
        });
    }
    let selected = select_lowest_slots(trace, start, window, needed)?;
    let last_fraction = (job.work / s - (needed as f64 - 1.0)).clamp(0.0, 1.0).max(SLOT_EPS);
    let schedule = Schedule {
        start_slot: start,
        actions: actions_for_selection(start, window, &selected, RunConfig::Scale(k), last_fraction),
        overhead_events: Vec::new(),
    };
    Ok((schedule, selected))
}

/// Dual-frequency DVFS plan: run every slot from `start`, at `f1` when the
/// slot is at or below the mean intensity of the job's full-frequency window
/// and at `f2` otherwise, until the work is done. The job never suspends.
pub fn plan_dvfs(
    job: &DvfsJob,
    f1_mhz: f64,
    f2_mhz: f64,
    trace: &CarbonTrace,
    start: usize,
) -> Result<Schedule, PolicyError> {
    let server = &job.server;
    // Validates both frequencies against the ladder up front.
    server.power_at(f1_mhz)?;
    server.power_at(f2_mhz)?;
    let rate1 = slowdown(job.io_fraction, f1_mhz / server.freq_max)?;
    let rate2 = slowdown(job.io_fraction, f2_mhz / server.freq_max)?;
    let threshold = trace.window_mean(start, job.threshold_window_slots())?;

    let mut actions = Vec::new();
    let mut remaining = job.work;
    let mut slot = start;
    while remaining > SLOT_EPS {
        if slot >= trace.len() {
            return Err(PolicyError::TraceExhausted {
                end: trace.len(),
                remaining,
                work: job.work,
            });
        }
        let (freq, rate) = if trace.intensity(slot) <= threshold {
            (f1_mhz, rate1)
        } else {
            (f2_mhz, rate2)
        };
        let (work_fraction, progress) = if remaining >= rate {
            (1.0, rate)
        } else {
            (remaining / rate, remaining)
        };
        actions.push(SlotAction::Run {
            config: RunConfig::Frequency(freq),
            work_fraction,
        });
        remaining -= progress;
        slot += 1;
    }
    Ok(Schedule {
        start_slot: start,
        actions,
        overhead_events: Vec::new(),
    })
}

/// Longest a DVFS run can take: every slot at the slowest ladder frequency.
/// Any start admitted under this window completes for every `(f1, f2)` pair.
pub fn dvfs_worst_case_window(job: &DvfsJob) -> Result<usize, PowerError> {
    let slowest = slowdown(job.io_fraction, job.server.freq_min / job.server.freq_max)?;
    Ok(slot_ceil(job.work / slowest))
}

/// One cell of the frequency-pair sweep.
#[derive(Debug, Clone)]
pub struct DvfsSweepCell {
    pub f1_mhz: f64,
    pub f2_mhz: f64,
    pub outcome: AggregateOutcome,
}

/// Evaluates every ordered ladder pair `(f1, f2)` over the given starts,
/// row-major by `f1` then `f2` (169 cells for the reference ladder). Each cell
/// aggregates per-start accounting in start order.
pub fn sweep_dvfs(
    job: &DvfsJob,
    trace: &CarbonTrace,
    starts: &[usize],
) -> Result<Vec<DvfsSweepCell>, crate::Error> {
    if starts.is_empty() {
        return Err(PolicyError::NoStarts.into());
    }
    let levels = job.server.frequency_levels();
    let pairs: Vec<(f64, f64)> = levels
        .iter()
        .flat_map(|&f1| levels.iter().map(move |&f2| (f1, f2)))
        .collect();
    pairs
        .par_iter()
        .map(|&(f1, f2)| {
            let runs = starts
                .iter()
                .map(|&start| {
                    let schedule = plan_dvfs(job, f1, f2, trace, start)?;
                    let ctx = JobContext::Dvfs {
                        server: &job.server,
                        io_fraction: job.io_fraction,
                    };
                    Ok(account(&schedule, &ctx, trace)?)
                })
                .collect::<Result<Vec<_>, crate::Error>>()?;
            Ok(DvfsSweepCell {
                f1_mhz: f1,
                f2_mhz: f2,
                outcome: aggregate_runs(&runs)?,
            })
        })
        .collect()
}
