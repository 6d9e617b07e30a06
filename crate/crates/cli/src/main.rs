use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use carbonflex_cli::app::{self, CliError, Format, StartSel};

/// Trace-driven simulator for carbon-aware batch scheduling.
///
/// Quantifies how temporal shifting, resource scaling, and frequency
/// scaling trade energy efficiency against carbon efficiency on a
/// grid carbon-intensity trace.
#[derive(Parser)]
#[command(name = "carbonflex", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate or generate carbon-intensity traces
    #[command(subcommand)]
    Trace(TraceCmd),
    /// Simulate a single job configuration
    #[command(subcommand)]
    Run(RunCmd),
    /// Evaluate a family of configurations
    #[command(subcommand)]
    Sweep(SweepCmd),
}

#[derive(Subcommand)]
enum TraceCmd {
    /// Parse a trace CSV and print summary statistics
    Validate {
        /// Trace CSV file
        trace: PathBuf,
    },
    /// Generate a synthetic diurnal trace as CSV
    Synth {
        /// Number of days to generate
        #[arg(long, default_value_t = 7)]
        days: u32,
        /// Mean intensity in gCO2eq/kWh
        #[arg(long, default_value_t = 100.0)]
        base: f64,
        /// Peak-to-mean distance of the diurnal cycle
        #[arg(long, default_value_t = 50.0)]
        amplitude: f64,
        /// Cycle period in hours
        #[arg(long, default_value_t = 24.0)]
        period: f64,
        /// Standard deviation of additive Gaussian noise
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// RNG seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunIo {
    /// Carbon-intensity trace CSV
    #[arg(long)]
    trace: PathBuf,
    /// Start slot to simulate (default 0)
    #[arg(long)]
    start: Option<usize>,
    /// Simulate every feasible start slot instead
    #[arg(long, conflicts_with = "start")]
    all_starts: bool,
    #[command(flatten)]
    output: OutputArgs,
}

impl RunIo {
    fn sel(&self) -> StartSel {
        if self.all_starts {
            StartSel::All
        } else {
            StartSel::One(self.start.unwrap_or(0))
        }
    }
}

#[derive(Args)]
struct SweepIo {
    /// Carbon-intensity trace CSV
    #[arg(long)]
    trace: PathBuf,
    /// Evaluate this start slot only (default: every feasible start)
    #[arg(long)]
    start: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

impl SweepIo {
    fn sel(&self) -> StartSel {
        match self.start {
            Some(s) => StartSel::One(s),
            None => StartSel::All,
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServerArgs {
    /// Built-in server power model
    #[arg(long, default_value = "e5-2620v4")]
    server: String,
    /// TOML power-model file to use instead
    #[arg(long, conflicts_with = "server")]
    server_config: Option<PathBuf>,
}

impl ServerArgs {
    fn resolve(&self) -> Result<app::ServerChoice, CliError> {
        app::resolve_server(&self.server, self.server_config.as_deref())
    }
}

#[derive(Subcommand)]
enum RunCmd {
    /// Suspend/resume shifting toward low-carbon slots
    Temporal {
        #[command(flatten)]
        common: RunIo,
        /// Job length in hours at full speed
        #[arg(long)]
        duration_hours: f64,
        /// Draw while running, in watts
        #[arg(long)]
        power_watts: f64,
        /// Deadline as a multiple of the duration (>= 1)
        #[arg(long, default_value_t = 1.0)]
        slack: f64,
        /// Checkpoint cost in minutes
        #[arg(long, default_value_t = 0.0)]
        checkpoint_min: f64,
        /// Restore cost in minutes
        #[arg(long, default_value_t = 0.0)]
        restore_min: f64,
    },
    /// Wait for clean slots and run on k nodes at once
    Scale {
        #[command(flatten)]
        common: RunIo,
        /// Work in single-node slot-equivalents
        #[arg(long)]
        work: f64,
        /// Per-node draw in watts
        #[arg(long)]
        per_node_watts: f64,
        /// Per-extra-node throughput loss (0 = perfect scaling)
        #[arg(long)]
        reduction: f64,
        /// Largest node count the profile admits
        #[arg(long, default_value_t = 10)]
        max_k: u32,
        /// Node count to run on
        #[arg(long)]
        k: u32,
    },
    /// Run continuously, switching between two frequencies
    Dvfs {
        #[command(flatten)]
        common: RunIo,
        /// Work in full-frequency slot-equivalents
        #[arg(long)]
        work: f64,
        /// Frequency-insensitive share of runtime (0..=1)
        #[arg(long)]
        io: f64,
        #[command(flatten)]
        server: ServerArgs,
        /// Frequency for below-threshold slots, MHz
        #[arg(long)]
        f1: f64,
        /// Frequency for above-threshold slots, MHz
        #[arg(long)]
        f2: f64,
    },
}

#[derive(Subcommand)]
enum SweepCmd {
    /// Suspend/resume shifting over a grid of slack factors
    Temporal {
        #[command(flatten)]
        common: SweepIo,
        /// Job length in hours at full speed
        #[arg(long)]
        duration_hours: f64,
        /// Draw while running, in watts
        #[arg(long)]
        power_watts: f64,
        /// Checkpoint cost in minutes
        #[arg(long, default_value_t = 0.0)]
        checkpoint_min: f64,
        /// Restore cost in minutes
        #[arg(long, default_value_t = 0.0)]
        restore_min: f64,
        /// Comma-separated slack factors
        #[arg(long, default_value = "1,1.5,2,2.5,3", value_delimiter = ',')]
        slack_grid: Vec<f64>,
    },
    /// Wait&Scale over every admitted node count
    Scale {
        #[command(flatten)]
        common: SweepIo,
        /// Work in single-node slot-equivalents
        #[arg(long)]
        work: f64,
        /// Per-node draw in watts
        #[arg(long)]
        per_node_watts: f64,
        /// Per-extra-node throughput loss (0 = perfect scaling)
        #[arg(long)]
        reduction: f64,
        /// Largest node count to try
        #[arg(long, default_value_t = 10)]
        max_k: u32,
    },
    /// Dual-frequency scaling over every ladder pair
    Dvfs {
        #[command(flatten)]
        common: SweepIo,
        /// Work in full-frequency slot-equivalents
        #[arg(long)]
        work: f64,
        /// Frequency-insensitive share of runtime (0..=1)
        #[arg(long)]
        io: f64,
        #[command(flatten)]
        server: ServerArgs,
        /// Also write a heatmap of normalized carbon efficiency
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Trace(TraceCmd::Validate { trace }) => {
            let summary = app::trace_validate(&trace)?;
            print!("{summary}");
            Ok(())
        }
        Cmd::Trace(TraceCmd::Synth {
            days,
            base,
            amplitude,
            period,
            noise,
            seed,
            out,
        }) => app::trace_synth(days, base, amplitude, period, noise, seed, out.as_deref()),
        Cmd::Run(RunCmd::Temporal {
            common,
            duration_hours,
            power_watts,
            slack,
            checkpoint_min,
            restore_min,
        }) => {
            let report = app::run_temporal(
                &common.trace,
                duration_hours,
                power_watts,
                slack,
                checkpoint_min,
                restore_min,
                common.sel(),
            )?;
            app::emit(&report, common.output.format, common.output.out.as_deref())
        }
        Cmd::Run(RunCmd::Scale {
            common,
            work,
            per_node_watts,
            reduction,
            max_k,
            k,
        }) => {
            let report = app::run_scale(
                &common.trace,
                work,
                per_node_watts,
                reduction,
                max_k,
                k,
                common.sel(),
            )?;
            app::emit(&report, common.output.format, common.output.out.as_deref())
        }
        Cmd::Run(RunCmd::Dvfs {
            common,
            work,
            io,
            server,
            f1,
            f2,
        }) => {
            let report = app::run_dvfs(
                &common.trace,
                work,
                io,
                server.resolve()?,
                f1,
                f2,
                common.sel(),
            )?;
            app::emit(&report, common.output.format, common.output.out.as_deref())
        }
        Cmd::Sweep(SweepCmd::Temporal {
            common,
            duration_hours,
            power_watts,
            checkpoint_min,
            restore_min,
            slack_grid,
        }) => {
            let report = app::sweep_temporal(
                &common.trace,
                duration_hours,
                power_watts,
                checkpoint_min,
                restore_min,
                &slack_grid,
                common.sel(),
            )?;
            app::emit(&report, common.output.format, common.output.out.as_deref())
        }
        Cmd::Sweep(SweepCmd::Scale {
            common,
            work,
            per_node_watts,
            reduction,
            max_k,
        }) => {
            let report = app::sweep_scale(
                &common.trace,
                work,
                per_node_watts,
                reduction,
                max_k,
                common.sel(),
            )?;
            app::emit(&report, common.output.format, common.output.out.as_deref())
        }
        Cmd::Sweep(SweepCmd::Dvfs {
            common,
            work,
            io,
            server,
            svg,
        }) => {
            let report = app::sweep_dvfs(
                &common.trace,
                work,
                io,
                server.resolve()?,
                common.sel(),
                svg.as_deref(),
            )?;
            app::emit(&report, common.output.format, common.output.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let explicit_help = matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            );
            let _ = err.print();
            return if explicit_help {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
