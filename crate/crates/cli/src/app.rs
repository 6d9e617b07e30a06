//! Subcommand implementations.
//!
//! Each function loads its inputs, drives the simulator, and returns a
//! [`Report`]; the binary decides how to render and where to write it.
//! Errors are split into usage problems (exit 1) and data or simulation
//! problems (exit 2).

use std::fmt;
use std::fs;
use std::path::Path;

use carbonflex::{
    account, aggregate_over_starts, aggregate_runs, dvfs_worst_case_window, feasible_starts,
    normalize, normalize_pairs, plan_dvfs, plan_suspend_resume, plan_wait_and_scale,
    AggregateOutcome, CarbonTrace, CheckpointableJob, DvfsJob, JobContext, PolicyError,
    RunAccounting, ScalabilityProfile, ScalableJob, ServerPowerModel,
};
use sha2::{Digest, Sha256};

use crate::report::{render_csv, render_json, sig6, Cell, Report};
use crate::svg;

#[derive(Debug)]
pub enum CliError {
    /// The invocation itself is wrong (exit 1).
    Usage(String),
    /// Inputs or the simulation rejected the request (exit 2).
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

fn data(e: impl fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Which start slots a command evaluates.
#[derive(Debug, Clone, Copy)]
pub enum StartSel {
    One(usize),
    All,
}

/// A parsed trace plus the identity of the file it came from.
pub struct TraceInput {
    pub trace: CarbonTrace,
    pub path: String,
    pub sha256: String,
}

fn load_trace(path: &Path) -> Result<TraceInput, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let sha256: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let trace = CarbonTrace::from_csv(&bytes[..])
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(TraceInput {
        trace,
        path: path.display().to_string(),
        sha256,
    })
}

/// The power model a job runs on, plus how to describe it in metadata.
#[derive(Debug)]
pub struct ServerChoice {
    pub model: ServerPowerModel,
    pub label: String,
}

pub fn resolve_server(name: &str, config: Option<&Path>) -> Result<ServerChoice, CliError> {
    if let Some(path) = config {
        let model = ServerPowerModel::from_config_path(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        return Ok(ServerChoice {
            model,
            label: path.display().to_string(),
        });
    }
    match ServerPowerModel::by_name(name) {
        Some(model) => Ok(ServerChoice {
            model,
            label: name.to_string(),
        }),
        None => Err(CliError::Usage(format!(
            "unknown server model '{name}' (built in: e5-2620v4); use --server-config for a custom one"
        ))),
    }
}

fn check_start_fits(start: usize, trace_len: usize, window: usize) -> Result<(), CliError> {
    if window == 0 || window > trace_len || start > trace_len - window {
        return Err(CliError::Data(format!(
            "start slot {start} with a {window}-slot window does not fit a {trace_len}-slot trace"
        )));
    }
    Ok(())
}

fn resolve_starts(
    sel: StartSel,
    trace_len: usize,
    window: usize,
) -> Result<(Vec<usize>, usize), CliError> {
    match sel {
        StartSel::All => feasible_starts(trace_len, window).map_err(data),
        StartSel::One(s) => {
            check_start_fits(s, trace_len, window)?;
            Ok((vec![s], 0))
        }
    }
}

fn outcome_for<Sim>(
    trace: &CarbonTrace,
    window: usize,
    sel: StartSel,
    simulate: Sim,
) -> Result<AggregateOutcome, CliError>
where
    Sim: Fn(usize) -> Result<RunAccounting, carbonflex::Error> + Sync,
{
    match sel {
        StartSel::All => aggregate_over_starts(trace, window, simulate).map_err(data),
        StartSel::One(s) => {
            check_start_fits(s, trace.len(), window)?;
            let run = simulate(s).map_err(data)?;
            aggregate_runs(&[run]).map_err(data)
        }
    }
}

const RUN_COLUMNS: [&str; 9] = [
    "start",
    "useful_work",
    "energy_kwh",
    "carbon_g",
    "completion_slots",
    "energy_eff",
    "carbon_eff",
    "norm_energy_eff",
    "norm_carbon_eff",
];

const SWEEP_TAIL: [&str; 12] = [
    "starts_used",
    "starts_excluded",
    "mean_energy_eff",
    "p5_energy_eff",
    "p95_energy_eff",
    "mean_carbon_eff",
    "p5_carbon_eff",
    "p95_carbon_eff",
    "mean_energy_kwh",
    "mean_carbon_g",
    "norm_mean_energy_eff",
    "norm_mean_carbon_eff",
];

fn sweep_report(param_cols: &[&str]) -> Report {
    let cols: Vec<&str> = param_cols.iter().chain(SWEEP_TAIL.iter()).copied().collect();
    Report::new(&cols)
}

fn run_row(start: usize, a: &RunAccounting, norm: (f64, f64)) -> Vec<Cell> {
    vec![
        Cell::Int(start as i64),
        Cell::Float(a.useful_work),
        Cell::Float(a.energy_kwh),
        Cell::Float(a.carbon_g),
        Cell::Int(a.completion_slots as i64),
        Cell::Float(a.energy_efficiency),
        Cell::Float(a.carbon_efficiency),
        Cell::Float(norm.0),
        Cell::Float(norm.1),
    ]
}

fn sweep_row(mut row: Vec<Cell>, o: &AggregateOutcome, norm: (f64, f64)) -> Vec<Cell> {
    row.extend([
        Cell::Int(o.starts_used as i64),
        Cell::Int(o.starts_excluded as i64),
        Cell::Float(o.energy_efficiency.mean),
        Cell::Float(o.energy_efficiency.p5),
        Cell::Float(o.energy_efficiency.p95),
        Cell::Float(o.carbon_efficiency.mean),
        Cell::Float(o.carbon_efficiency.p5),
        Cell::Float(o.carbon_efficiency.p95),
        Cell::Float(o.energy_kwh.mean),
        Cell::Float(o.carbon_g.mean),
        Cell::Float(norm.0),
        Cell::Float(norm.1),
    ]);
    row
}

fn freq_cell(f: f64) -> Cell {
    if (f - f.round()).abs() < 1e-9 {
        Cell::Int(f.round() as i64)
    } else {
        Cell::Float(f)
    }
}

fn meta_common(r: &mut Report, command: &str, t: &TraceInput, sel: StartSel) {
    r.meta("command", command);
    r.meta("tool_version", env!("CARGO_PKG_VERSION"));
    r.meta("trace", t.path.clone());
    r.meta("trace_sha256", t.sha256.clone());
    r.meta("trace_slots", t.trace.len().to_string());
    r.meta("slot_hours", format!("{}", t.trace.slot_duration_hours()));
    r.meta(
        "starts",
        match sel {
            StartSel::All => "all".to_string(),
            StartSel::One(s) => s.to_string(),
        },
    );
}

fn mean_pairs(outcomes: &[&AggregateOutcome]) -> Vec<(f64, f64)> {
    outcomes
        .iter()
        .map(|o| (o.energy_efficiency.mean, o.carbon_efficiency.mean))
        .collect()
}

pub fn trace_validate(path: &Path) -> Result<String, CliError> {
    let t = load_trace(path)?;
    let values = t.trace.intensities();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(format!(
        "ok: {} slots of {} h starting {}\nsha256: {}\nintensity min/mean/max: {} / {} / {} gCO2eq/kWh\n",
        t.trace.len(),
        t.trace.slot_duration_hours(),
        t.trace.start_time().format("%Y-%m-%dT%H:%M:%SZ"),
        t.sha256,
        sig6(min),
        sig6(mean),
        sig6(max),
    ))
}

#[allow(clippy::too_many_arguments)]
pub fn trace_synth(
    days: u32,
    base: f64,
    amplitude: f64,
    period_hours: f64,
    noise_std: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let trace =
        CarbonTrace::synthetic(days, base, amplitude, period_hours, noise_std, seed).map_err(data)?;
    write_text(&trace.to_csv(), out)
}

#[allow(clippy::too_many_arguments)]
pub fn run_temporal(
    trace_path: &Path,
    duration_hours: f64,
    power_watts: f64,
    slack: f64,
    checkpoint_min: f64,
    restore_min: f64,
    sel: StartSel,
) -> Result<Report, CliError> {
    let t = load_trace(trace_path)?;
    let job = CheckpointableJob::new(duration_hours, power_watts, checkpoint_min, restore_min, slack)
        .map_err(data)?;
    let window = job.deadline_slots(t.trace.slot_duration_hours());
    let (starts, excluded) = resolve_starts(sel, t.trace.len(), window)?;
    let ctx = JobContext::Temporal {
        power_watts: job.power_watts,
    };
    let accts: Vec<RunAccounting> = starts
        .iter()
        .map(|&s| {
            let sched = plan_suspend_resume(&job, &t.trace, s).map_err(data)?;
            account(&sched, &ctx, &t.trace).map_err(data)
        })
        .collect::<Result<_, _>>()?;
    let norms = normalize(&accts).map_err(data)?;

    let mut r = Report::new(&RUN_COLUMNS);
    meta_common(&mut r, "run temporal", &t, sel);
    r.meta("duration_hours", format!("{duration_hours}"));
    r.meta("power_watts", format!("{power_watts}"));
    r.meta("slack", format!("{slack}"));
    r.meta("checkpoint_min", format!("{checkpoint_min}"));
    r.meta("restore_min", format!("{restore_min}"));
    r.meta("window_slots", window.to_string());
    r.meta("starts_excluded", excluded.to_string());
    for ((s, a), n) in starts.iter().zip(&accts).zip(&norms) {
        r.push_row(run_row(*s, a, *n));
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn run_scale(
    trace_path: &Path,
    work: f64,
    per_node_watts: f64,
    reduction: f64,
    max_k: u32,
    k: u32,
    sel: StartSel,
) -> Result<Report, CliError> {
    let t = load_trace(trace_path)?;
    let profile = ScalabilityProfile::with_max_nodes(reduction, max_k).map_err(data)?;
    let job = ScalableJob::new(work, per_node_watts, profile).map_err(data)?;
    let window = job.window_slots();
    let (starts, excluded) = resolve_starts(sel, t.trace.len(), window)?;
    let ctx = JobContext::Scaled {
        per_node_power_watts: job.per_node_power_watts,
        profile: &job.profile,
    };
    let accts: Vec<RunAccounting> = starts
        .iter()
        .map(|&s| {
            let sched = plan_wait_and_scale(&job, k, &t.trace, s).map_err(data)?;
            account(&sched, &ctx, &t.trace).map_err(data)
        })
        .collect::<Result<_, _>>()?;
    let norms = normalize(&accts).map_err(data)?;

    let mut r = Report::new(&RUN_COLUMNS);
    meta_common(&mut r, "run scale", &t, sel);
    r.meta("work", format!("{work}"));
    r.meta("per_node_watts", format!("{per_node_watts}"));
    r.meta("reduction", format!("{reduction}"));
    r.meta("max_k", max_k.to_string());
    r.meta("k", k.to_string());
    r.meta("window_slots", window.to_string());
    r.meta("starts_excluded", excluded.to_string());
    for ((s, a), n) in starts.iter().zip(&accts).zip(&norms) {
        r.push_row(run_row(*s, a, *n));
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn run_dvfs(
    trace_path: &Path,
    work: f64,
    io: f64,
    server: ServerChoice,
    f1: f64,
    f2: f64,
    sel: StartSel,
) -> Result<Report, CliError> {
    let t = load_trace(trace_path)?;
    let job = DvfsJob::new(work, io, server.model).map_err(data)?;
    let window = dvfs_worst_case_window(&job).map_err(data)?;
    // A single explicit start only has to lie inside the trace; the planner
    // errors if the run overruns. All-start admission uses the worst case
    // so the start set does not depend on the frequency pair.
    let (starts, excluded) = match sel {
        StartSel::One(_) => resolve_starts(sel, t.trace.len(), 1)?,
        StartSel::All => resolve_starts(sel, t.trace.len(), window)?,
    };
    let ctx = JobContext::Dvfs {
        server: &job.server,
        io_fraction: job.io_fraction,
    };
    let accts: Vec<RunAccounting> = starts
        .iter()
        .map(|&s| {
            let sched = plan_dvfs(&job, f1, f2, &t.trace, s).map_err(data)?;
            account(&sched, &ctx, &t.trace).map_err(data)
        })
        .collect::<Result<_, _>>()?;
    let norms = normalize(&accts).map_err(data)?;

    let mut r = Report::new(&RUN_COLUMNS);
    meta_common(&mut r, "run dvfs", &t, sel);
    r.meta("work", format!("{work}"));
    r.meta("io", format!("{io}"));
    r.meta("server", server.label);
    r.meta("f1_mhz", format!("{f1}"));
    r.meta("f2_mhz", format!("{f2}"));
    r.meta("window_slots", window.to_string());
    r.meta("starts_excluded", excluded.to_string());
    for ((s, a), n) in starts.iter().zip(&accts).zip(&norms) {
        r.push_row(run_row(*s, a, *n));
    }
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_temporal(
    trace_path: &Path,
    duration_hours: f64,
    power_watts: f64,
    checkpoint_min: f64,
    restore_min: f64,
    slack_grid: &[f64],
    sel: StartSel,
) -> Result<Report, CliError> {
    if slack_grid.is_empty() {
        return Err(CliError::Usage("--slack-grid must not be empty".into()));
    }
    let t = load_trace(trace_path)?;
    let mut outcomes = Vec::new();
    for &slack in slack_grid {
        let job =
            CheckpointableJob::new(duration_hours, power_watts, checkpoint_min, restore_min, slack)
                .map_err(data)?;
        let window = job.deadline_slots(t.trace.slot_duration_hours());
        let ctx = JobContext::Temporal {
            power_watts: job.power_watts,
        };
        let outcome = outcome_for(&t.trace, window, sel, |s| {
            let sched = plan_suspend_resume(&job, &t.trace, s)?;
            Ok(account(&sched, &ctx, &t.trace)?)
        })?;
        outcomes.push((slack, outcome));
    }
    let refs: Vec<&AggregateOutcome> = outcomes.iter().map(|(_, o)| o).collect();
    let norms = normalize_pairs(&mean_pairs(&refs)).map_err(data)?;

    let mut r = sweep_report(&["slack"]);
    meta_common(&mut r, "sweep temporal", &t, sel);
    r.meta("duration_hours", format!("{duration_hours}"));
    r.meta("power_watts", format!("{power_watts}"));
    r.meta("checkpoint_min", format!("{checkpoint_min}"));
    r.meta("restore_min", format!("{restore_min}"));
    r.meta(
        "slack_grid",
        slack_grid
            .iter()
            .map(|s| format!("{s}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    for ((slack, o), n) in outcomes.iter().zip(&norms) {
        r.push_row(sweep_row(vec![Cell::Float(*slack)], o, *n));
    }
    Ok(r)
}

pub fn sweep_scale(
    trace_path: &Path,
    work: f64,
    per_node_watts: f64,
    reduction: f64,
    max_k: u32,
    sel: StartSel,
) -> Result<Report, CliError> {
    let t = load_trace(trace_path)?;
    let profile = ScalabilityProfile::with_max_nodes(reduction, max_k).map_err(data)?;
    let job = ScalableJob::new(work, per_node_watts, profile).map_err(data)?;
    let window = job.window_slots();
    let probe_start = match sel {
        StartSel::One(s) => s,
        StartSel::All => 0,
    };
    let ctx = JobContext::Scaled {
        per_node_power_watts: job.per_node_power_watts,
        profile: &job.profile,
    };
    let mut outcomes = Vec::new();
    let mut skipped = Vec::new();
    for k in 1..=max_k {
        // Drop node counts whose speedup cannot fit the window instead of
        // failing the whole sweep.
        match plan_wait_and_scale(&job, k, &t.trace, probe_start) {
            Err(PolicyError::ScaleNeedsMoreSlots { .. }) => {
                skipped.push(k.to_string());
                continue;
            }
            Err(e) => return Err(data(e)),
            Ok(_) => {}
        }
        let outcome = outcome_for(&t.trace, window, sel, |s| {
            let sched = plan_wait_and_scale(&job, k, &t.trace, s)?;
            Ok(account(&sched, &ctx, &t.trace)?)
        })?;
        outcomes.push((k, outcome));
    }
    if outcomes.is_empty() {
        return Err(CliError::Data(format!(
            "no node count in 1..={max_k} fits the {window}-slot window"
        )));
    }
    let refs: Vec<&AggregateOutcome> = outcomes.iter().map(|(_, o)| o).collect();
    let norms = normalize_pairs(&mean_pairs(&refs)).map_err(data)?;

    let mut r = sweep_report(&["k"]);
    meta_common(&mut r, "sweep scale", &t, sel);
    r.meta("work", format!("{work}"));
    r.meta("per_node_watts", format!("{per_node_watts}"));
    r.meta("reduction", format!("{reduction}"));
    r.meta("max_k", max_k.to_string());
    r.meta("window_slots", window.to_string());
    if !skipped.is_empty() {
        r.meta("skipped_k", skipped.join(","));
    }
    for ((k, o), n) in outcomes.iter().zip(&norms) {
        r.push_row(sweep_row(vec![Cell::Int(*k as i64)], o, *n));
    }
    Ok(r)
}

pub fn sweep_dvfs(
    trace_path: &Path,
    work: f64,
    io: f64,
    server: ServerChoice,
    sel: StartSel,
    svg_out: Option<&Path>,
) -> Result<Report, CliError> {
    let t = load_trace(trace_path)?;
    let job = DvfsJob::new(work, io, server.model).map_err(data)?;
    let window = dvfs_worst_case_window(&job).map_err(data)?;
    let (starts, excluded) = resolve_starts(sel, t.trace.len(), window)?;
    let mut cells = carbonflex::sweep_dvfs(&job, &t.trace, &starts).map_err(data)?;
    for cell in &mut cells {
        cell.outcome.starts_excluded = excluded;
    }
    let refs: Vec<&AggregateOutcome> = cells.iter().map(|c| &c.outcome).collect();
    let norms = normalize_pairs(&mean_pairs(&refs)).map_err(data)?;

    let mut r = sweep_report(&["f1_mhz", "f2_mhz"]);
    meta_common(&mut r, "sweep dvfs", &t, sel);
    r.meta("work", format!("{work}"));
    r.meta("io", format!("{io}"));
    r.meta("server", server.label);
    r.meta("window_slots", window.to_string());
    for (c, n) in cells.iter().zip(&norms) {
        r.push_row(sweep_row(
            vec![freq_cell(c.f1_mhz), freq_cell(c.f2_mhz)],
            &c.outcome,
            *n,
        ));
    }

    if let Some(path) = svg_out {
        let levels = job.server.frequency_levels();
        let shaded: Vec<(f64, f64, f64)> = cells
            .iter()
            .zip(&norms)
            .map(|(c, (_, nc))| (c.f1_mhz, c.f2_mhz, *nc))
            .collect();
        let image = svg::heatmap(&levels, &shaded, "Normalized carbon efficiency");
        fs::write(path, image)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(r)
}

fn write_text(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Renders a report in the requested format and writes it to `out` or
/// stdout.
pub fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = match format {
        Format::Csv => render_csv(report),
        Format::Json => render_json(report),
    };
    write_text(&text, out)
}
