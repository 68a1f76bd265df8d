//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure,
//! 3 property-suite failure.

pub mod config;
pub mod plot;
pub mod report;
pub mod verify;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::quenchlab::{
    convergence_order, critical_length_search, quench_time_sweep, run_simulation, EvalTime,
    QuenchlabError, RunConfig, RunOutcome, SimulationRun, SnapshotPolicy, SweepParam, SweepTable,
};
use config::{ConfigError, ConfigLayers};
use plot::{emit_plot_script, Curve, PlotData, PlotError, PlotKind};
use report::{Report, ReportError};
use verify::Suite;

/// Snapshots kept for plots when the config does not ask for any.
const DEFAULT_PLOT_SNAPSHOTS: usize = 40;

#[derive(Debug, Parser)]
#[command(name = "fracquench", version, about = "Quenching solver for the fractional convection-diffusion Kawarada problem")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Named parameter preset applied before the config file (see `presets`).
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true, allow_hyphen_values = true)]
    pub set: Vec<String>,
    /// Output directory for CSV and plot files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Add a wall-clock column to CSV output (breaks byte reproducibility).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation.
    Run,
    /// Bisect for the critical length a*.
    CriticalLength {
        #[arg(long, default_value_t = 0.5)]
        a_lo: f64,
        #[arg(long, default_value_t = 4.0)]
        a_hi: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// Repeat the search for several values of this parameter (b or sigma).
        #[arg(long)]
        param: Option<SweepParam>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Quench time and location across one parameter.
    QuenchSweep {
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
    },
    /// Quench location of one run, or across values of b.
    Location {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
    },
    /// Milne estimate of the spatial orders of v and v_t.
    Order {
        /// Coarse spacing; defaults to a/100.
        #[arg(long)]
        h0: Option<f64>,
        /// Evaluation time; defaults to 20 steps before the earliest quench.
        #[arg(long)]
        t_eval: Option<f64>,
    },
    /// Run the property suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// List the parameter presets.
    Presets,
    /// Print the resolved configuration.
    Config,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::CriticalLength { .. } => "critical-length",
            Command::QuenchSweep { .. } => "quench-sweep",
            Command::Location { .. } => "location",
            Command::Order { .. } => "order",
            Command::Verify { .. } => "verify",
            Command::Presets => "presets",
            Command::Config => "config",
        }
    }

    /// Preset used when neither `--preset` nor `--config` is given.
    fn default_preset(&self) -> &'static str {
        match self {
            Command::CriticalLength { .. } => "critical-length",
            Command::Location { .. } => "location",
            Command::Order { .. } => "order",
            _ => "pi-interval",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0} property check(s) failed")]
    SuiteFailed(usize),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("cannot create {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            CliError::SuiteFailed(_) => 3,
            _ => 1,
        }
    }
}

impl From<QuenchlabError> for CliError {
    fn from(e: QuenchlabError) -> Self {
        match e {
            QuenchlabError::NumericalFailure { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<crate::error::ParamError> for CliError {
    fn from(e: crate::error::ParamError) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub fn resolve_config(common: &CommonArgs, fallback_preset: &str) -> Result<RunConfig, ConfigError> {
    let mut layers = ConfigLayers::new();
    match (&common.preset, &common.config) {
        (Some(p), _) => {
            layers.preset(p)?;
        }
        (None, None) => {
            layers.preset(fallback_preset)?;
        }
        (None, Some(_)) => {}
    }
    if let Some(path) = &common.config {
        layers.file(path)?;
    }
    layers.overrides(&common.set)?;
    layers.build()
}

struct Output<'a> {
    dir: &'a Path,
    timing: bool,
    started: Instant,
}

impl Output<'_> {
    fn csv(&self, stem: &str, report: Report) -> Result<PathBuf, CliError> {
        let report = if self.timing {
            let n = report.rows.len();
            report.with_wall_time(&vec![self.started.elapsed().as_secs_f64(); n])
        } else {
            report
        };
        let path = self.dir.join(format!("{stem}.csv"));
        report.write(&path)?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    fn plot(&self, data: &PlotData<'_>, kind: PlotKind, stem: &str) -> Result<(), CliError> {
        let files = emit_plot_script(data, kind, self.dir, stem)?;
        println!("wrote {} + {}", files.script.display(), files.data.display());
        Ok(())
    }

    fn run_plots(&self, run: &SimulationRun, prefix: &str) -> Result<(), CliError> {
        if run.snapshots.is_empty() {
            return Ok(());
        }
        let data = PlotData::Series {
            series: &run.snapshots,
            grid: &run.grid,
        };
        self.plot(&data, PlotKind::CrossSection, &format!("{prefix}_cross_section"))?;
        self.plot(&data, PlotKind::PeakTrajectory, &format!("{prefix}_peak_trajectory"))?;
        self.plot(&data, PlotKind::Surface, &format!("{prefix}_surface"))
    }
}

fn with_plot_snapshots(mut c: RunConfig) -> RunConfig {
    if c.snapshot_policy == SnapshotPolicy::None {
        c.snapshot_policy = SnapshotPolicy::LastSteps(DEFAULT_PLOT_SNAPSHOTS);
    }
    c
}

fn simulate(config: &RunConfig) -> Result<SimulationRun, CliError> {
    let run = run_simulation(config)?;
    if let RunOutcome::NumericalFailure(m) = &run.outcome {
        return Err(CliError::Numerical(m.clone()));
    }
    Ok(run)
}

fn sweep_curve(table: &SweepTable, label: &str, pick: impl Fn(&crate::quenchlab::QuenchEvent) -> f64) -> Curve {
    Curve {
        x_label: table.param.name().into(),
        y_labels: vec![label.into()],
        points: table
            .rows
            .iter()
            .map(|r| (r.value, vec![r.quench().map(&pick)]))
            .collect(),
    }
}

fn sweep_failures(table: &SweepTable) -> Result<(), CliError> {
    for row in &table.rows {
        if let RunOutcome::NumericalFailure(m) = &row.outcome {
            return Err(CliError::Numerical(format!("{} = {}: {m}", table.param, row.value)));
        }
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    match &cli.command {
        Command::Presets => {
            for p in config::PRESETS {
                let keys: Vec<String> = p.entries.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!("{:<16} {}\n{:<16} {}", p.name, p.summary, "", keys.join(" "));
            }
            return Ok(());
        }
        Command::Verify { suite } => {
            let checks = verify::run_suite(*suite);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {} failed", checks.len(), failed);
            return if failed == 0 { Ok(()) } else { Err(CliError::SuiteFailed(failed)) };
        }
        _ => {}
    }

    let config = resolve_config(&cli.common, cli.command.default_preset())?;
    if let Command::Config = cli.command {
        print!("{}", config::emit_config(&config)?);
        return Ok(());
    }

    fs::create_dir_all(&cli.common.out).map_err(|e| CliError::Io {
        path: cli.common.out.clone(),
        message: e.to_string(),
    })?;
    let out = Output {
        dir: &cli.common.out,
        timing: cli.common.timing,
        started,
    };
    let stem = cli.command.name();

    match &cli.command {
        Command::Run => {
            let run = simulate(&config)?;
            println!("{}", run.outcome);
            out.csv(stem, report::run_report(&[(&config, &run.outcome, run.final_state.n)]))?;
            out.run_plots(&run, stem)?;
        }
        Command::CriticalLength {
            a_lo,
            a_hi,
            tol,
            param,
            values,
        } => {
            let param = param.unwrap_or(SweepParam::B);
            if param == SweepParam::A {
                return Err(CliError::Validation("critical-length cannot sweep over a".into()));
            }
            let values = if values.is_empty() {
                vec![match param {
                    SweepParam::Sigma => config.spec.sigma,
                    _ => config.spec.b,
                }]
            } else {
                values.clone()
            };
            let rows = values
                .par_iter()
                .map(|&v| {
                    critical_length_search(&param.apply(&config, v), *a_lo, *a_hi, *tol).map(|c| (v, c))
                })
                .collect::<Result<Vec<_>, _>>()?;
            for (v, c) in &rows {
                println!("{param} = {v}: a* = {:.6} ({} trials)", c.a_star, c.trials.len());
            }
            out.csv(stem, report::critical_report(param.name(), &rows))?;
            if rows.len() > 1 {
                let curve = Curve {
                    x_label: param.name().into(),
                    y_labels: vec!["a_star".into()],
                    points: rows.iter().map(|(v, c)| (*v, vec![Some(c.a_star)])).collect(),
                };
                out.plot(&PlotData::Sweep(&curve), PlotKind::SweepCurve, stem)?;
            }
        }
        Command::QuenchSweep { param, values } => {
            let table = quench_time_sweep(&config, *param, values)?;
            sweep_failures(&table)?;
            for r in &table.rows {
                println!("{} = {}: {}", table.param, r.value, r.outcome);
            }
            out.csv(stem, report::sweep_report(&table))?;
            let curve = sweep_curve(&table, "T_a", |q| q.t_quench);
            out.plot(&PlotData::Sweep(&curve), PlotKind::SweepCurve, stem)?;
        }
        Command::Location { values } => {
            if values.is_empty() {
                let config = with_plot_snapshots(config);
                let run = simulate(&config)?;
                println!("{}", run.outcome);
                let table = SweepTable {
                    param: SweepParam::B,
                    rows: vec![crate::quenchlab::SweepRow {
                        value: config.spec.b,
                        outcome: run.outcome.clone(),
                    }],
                };
                out.csv(stem, report::location_report(&table, &config))?;
                out.run_plots(&run, stem)?;
            } else {
                let table = quench_time_sweep(&config, SweepParam::B, values)?;
                sweep_failures(&table)?;
                for r in &table.rows {
                    println!("b = {}: {}", r.value, r.outcome);
                }
                out.csv(stem, report::location_report(&table, &config))?;
                let curve = sweep_curve(&table, "x_star", |q| q.x_star);
                out.plot(&PlotData::Sweep(&curve), PlotKind::SweepCurve, stem)?;
            }
        }
        Command::Order { h0, t_eval } => {
            let h0 = h0.unwrap_or(config.spec.a / 100.0);
            let eval = t_eval.map_or(EvalTime::Auto, EvalTime::At);
            let orders = convergence_order(&config, h0, eval)?;
            println!(
                "f = {:.4}, g = {:.4} at t = {:.6} (step {})",
                orders.f, orders.g, orders.t_eval, orders.step
            );
            out.csv(stem, report::order_report(&config, h0, &orders))?;
        }
        Command::Verify { .. } | Command::Presets | Command::Config => unreachable!("handled above"),
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
