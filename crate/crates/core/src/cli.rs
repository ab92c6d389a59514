//! Command-line driver behind the `taskbench` binary.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when a run
//! fails or a self-test checksum disagrees.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::backends::{self, BackendConfig, BackendKind, BarrierMode};
use crate::graph::{Pattern, TaskGraphSpec};
use crate::kernel::{calibrate, Calibration, KernelConfig, KernelKind};
use crate::metrics::{
    self, BackendRunner, CellOutcome, CommPreset, ExperimentPlan, GranularitySweep, MetgSearch, PlanKind,
};
use crate::payload::sequential_execute;
use crate::report::{self, ReportPaths, RunRecord};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "taskbench", version, about = "Synthetic task-graph benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one graph on one backend and print its record as JSON.
    Run(RunArgs),
    /// Efficiency against task size for several widths per core.
    Sweep(SweepArgs),
    /// Minimum effective task granularity per backend.
    Metg(MetgArgs),
    /// Weak scaling over worker counts at 16 width per core.
    Scale(ScaleArgs),
    /// Load-imbalanced kernel over imbalance factors.
    Imbalance(ImbalanceArgs),
    /// Communication-heavy presets over worker counts.
    Comm(CommArgs),
    /// Measure the kernel's seconds per iteration on one core.
    Calibrate(CalibrateArgs),
    /// Check every backend's checksum against sequential execution.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Tasks per step [default: 16 per worker]
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    /// Dependency pattern: stencil, spread or all_to_all
    #[arg(long = "type", default_value = "stencil")]
    pattern: Pattern,
    /// compute_bound or load_imbalance
    #[arg(long, default_value = "compute_bound")]
    kernel: KernelKind,
    /// Kernel iterations per task
    #[arg(long = "iter", default_value_t = 1 << 20)]
    iterations: u64,
    /// Imbalance factor in [0, 2] for load_imbalance
    #[arg(long, default_value_t = 1.0)]
    imbalance: f64,
    /// Dependencies per task for spread
    #[arg(long, default_value_t = 4)]
    radix: usize,
    #[arg(long, default_value_t = 16)]
    output_bytes: usize,
}

#[derive(Debug, Args)]
struct Common {
    /// Worker threads [default: available parallelism]
    #[arg(long, env = "TASKBENCH_WORKERS")]
    workers: Option<usize>,
    /// Timed repetitions after one warm-up run
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    dat: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EfficiencyArgs {
    /// Seconds per kernel iteration; measured when omitted
    #[arg(long)]
    spi: Option<f64>,
    /// Calibration budget in seconds
    #[arg(long, default_value_t = 1.0)]
    calibration_budget: f64,
}

#[derive(Debug, Args)]
struct BackendSet {
    /// Backends to compare: bsp, ws, fbc
    #[arg(long = "backend", value_delimiter = ',', default_value = "bsp,ws,fbc")]
    backends: Vec<BackendKind>,
    /// Also run fbc without a barrier between steps
    #[arg(long)]
    no_barrier: bool,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value = "ws")]
    backend: BackendKind,
    /// fbc only: let tasks of later steps run as soon as their inputs resolve
    #[arg(long)]
    no_barrier: bool,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eff: EfficiencyArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,4,16,32,64")]
    widths_per_core: Vec<usize>,
    /// Largest task size as a power of two
    #[arg(long, default_value_t = 20)]
    max_exp: u32,
    /// Smallest task size as a power of two
    #[arg(long, default_value_t = 6)]
    min_exp: u32,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[command(flatten)]
    set: BackendSet,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eff: EfficiencyArgs,
}

#[derive(Debug, Args)]
struct MetgArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long, default_value_t = 20)]
    max_exp: u32,
    #[arg(long, default_value_t = 6)]
    min_exp: u32,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[command(flatten)]
    set: BackendSet,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eff: EfficiencyArgs,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    /// Worker counts [default: powers of two up to --workers]
    #[arg(long, value_delimiter = ',')]
    worker_counts: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    width_per_core: usize,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[arg(long = "iter", default_value_t = 1 << 20)]
    iterations: u64,
    #[command(flatten)]
    set: BackendSet,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eff: EfficiencyArgs,
}

#[derive(Debug, Args)]
struct ImbalanceArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2")]
    factors: Vec<f64>,
    #[arg(long, default_value_t = 16)]
    width_per_core: usize,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[arg(long = "iter", default_value_t = 1 << 20)]
    iterations: u64,
    #[command(flatten)]
    set: BackendSet,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eff: EfficiencyArgs,
}

#[derive(Debug, Args)]
struct CommArgs {
    /// spread40, spread80 or all_to_all
    #[arg(long)]
    preset: CommPreset,
    #[arg(long, value_delimiter = ',')]
    worker_counts: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    width_per_core: usize,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[arg(long = "iter", default_value_t = 1 << 20)]
    iterations: u64,
    #[command(flatten)]
    set: BackendSet,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    eff: EfficiencyArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long, default_value = "compute_bound")]
    kernel: KernelKind,
    /// Measurement budget in seconds
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, env = "TASKBENCH_WORKERS")]
    workers: Option<usize>,
    #[arg(long = "iter", default_value_t = 256)]
    iterations: u64,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidSpec(_) | Error::InvalidConfig(_) | Error::InvalidSweep(_) | Error::OutOfBounds { .. } => 1,
        _ => 2,
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Run(a) => run_one(a),
        Command::Sweep(a) => sweep(a),
        Command::Metg(a) => metg(a),
        Command::Scale(a) => scale(a),
        Command::Imbalance(a) => imbalance(a),
        Command::Comm(a) => comm(a),
        Command::Calibrate(a) => {
            let cal = calibrate(&KernelConfig { kind: a.kernel, ..KernelConfig::default() }, a.budget)?;
            println!("{}", serde_json::to_string_pretty(&cal).expect("calibration serializes"));
            Ok(0)
        }
        Command::Selftest(a) => selftest(default_workers(a.workers)?, a.iterations),
    }
}

fn default_workers(workers: Option<usize>) -> Result<usize> {
    let w = workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if w == 0 {
        return Err(Error::InvalidConfig("--workers must be at least 1"));
    }
    Ok(w)
}

fn calibration(eff: &EfficiencyArgs) -> Result<Calibration> {
    match eff.spi {
        Some(spi) if spi > 0.0 && spi.is_finite() => Ok(Calibration::fixed(spi)),
        Some(_) => Err(Error::InvalidConfig("--spi must be positive")),
        None => {
            eprintln!("calibrating kernel for {} s", eff.calibration_budget);
            calibrate(&KernelConfig::default(), eff.calibration_budget)
        }
    }
}

fn graph_spec(g: &GraphArgs, workers: usize, seed: u64) -> Result<TaskGraphSpec> {
    let radix = if g.pattern == Pattern::Spread { g.radix } else { 1 };
    let width = g.width.unwrap_or((16 * workers).max(radix));
    let kernel = match g.kernel {
        KernelKind::ComputeBound => KernelConfig::compute_bound(g.iterations),
        KernelKind::LoadImbalance => KernelConfig::load_imbalance(g.iterations, g.imbalance),
    };
    TaskGraphSpec {
        width,
        steps: g.steps,
        pattern: g.pattern,
        spread_radix: radix,
        kernel,
        output_bytes: g.output_bytes,
        seed,
    }
    .validate()
}

fn backend_set(set: &BackendSet) -> Vec<BackendConfig> {
    let mut out: Vec<BackendConfig> = set.backends.iter().map(|&b| BackendConfig::new(b, 1)).collect();
    if set.no_barrier {
        out.push(BackendConfig::new(BackendKind::Futures, 1).with_barrier(BarrierMode::None));
    }
    out
}

fn paths(out: &OutArgs, x_label: &str) -> ReportPaths {
    ReportPaths {
        json: out.json.clone(),
        csv: out.csv.clone(),
        dat: out.dat.clone(),
        x_label: x_label.to_string(),
    }
}

fn run_one(a: RunArgs) -> Result<i32> {
    let workers = default_workers(a.common.workers)?;
    if a.no_barrier && a.backend != BackendKind::Futures {
        return Err(Error::InvalidConfig("--no-barrier is only valid with --backend fbc"));
    }
    let spec = graph_spec(&a.graph, workers, a.common.seed)?;
    let mut cfg = BackendConfig::new(a.backend, workers);
    cfg.rng_seed = a.common.seed;
    if a.no_barrier {
        cfg = cfg.with_barrier(BarrierMode::None);
    }
    cfg.validate()?;
    let cal = calibration(&a.eff)?;
    let m = metrics::measure(&mut BackendRunner, &spec, &cfg, a.common.reps)?;
    let efficiency = metrics::efficiency_from_wall(m.mean_wall_seconds, &spec, &cal, workers).ok();
    let records = vec![RunRecord::measured("", spec.kernel.base_iterations as f64, &spec, &cfg, &m, efficiency)];
    println!("{}", report::to_json(&records));
    write_outputs(&records, &paths(&a.common.out, "iterations"))?;
    Ok(0)
}

fn write_outputs(records: &[RunRecord], p: &ReportPaths) -> Result<()> {
    if p.json.is_some() || p.csv.is_some() || p.dat.is_some() {
        report::emit_reports(records, p)?;
    }
    Ok(())
}

fn run_plan(plan: ExperimentPlan, common: &Common, eff: &EfficiencyArgs) -> Result<i32> {
    if plan.backends.is_empty() {
        return Err(Error::InvalidConfig("--backend needs at least one backend"));
    }
    for cell in plan.cells() {
        cell.spec.clone().validate()?;
        cell.backend.validate()?;
    }
    let cal = calibration(eff)?;
    let table = metrics::run_experiment(&plan, &mut BackendRunner, &cal);
    let records = report::records(&table);
    print_table(&table);
    write_outputs(&records, &paths(&common.out, table.x_label))?;
    let failed = table
        .cells
        .iter()
        .filter(|c| matches!(c.outcome, CellOutcome::Failed(_)))
        .count();
    if failed > 0 {
        eprintln!("error: {failed} of {} cells failed", table.cells.len());
        return Ok(2);
    }
    Ok(0)
}

fn print_table(table: &metrics::ResultTable) {
    println!("{:<20} {:>14} {:<14} {:>10} {:>12}", "series", table.x_label, "backend", "efficiency", "wall_s");
    for cell in &table.cells {
        let c = &cell.config;
        match &cell.outcome {
            CellOutcome::Done {
                measurement,
                efficiency,
            } => println!(
                "{:<20} {:>14} {:<14} {:>10.3} {:>12.6}",
                c.series,
                c.x,
                c.backend.label(),
                efficiency,
                measurement.mean_wall_seconds
            ),
            CellOutcome::Failed(e) => {
                println!("{:<20} {:>14} {:<14} failed: {e}", c.series, c.x, c.backend.label())
            }
        }
    }
}

fn check_exps(max_exp: u32, min_exp: u32) -> Result<()> {
    if max_exp > 40 || min_exp >= max_exp {
        return Err(Error::InvalidSweep("need --min-exp < --max-exp <= 40"));
    }
    Ok(())
}

fn base_plan(kind: PlanKind, workers: usize, set: &BackendSet, common: &Common) -> ExperimentPlan {
    ExperimentPlan {
        kind,
        backends: backend_set(set),
        workers,
        seed: common.seed,
        reps: common.reps,
        ..ExperimentPlan::width_sweep(workers)
    }
}

fn worker_counts(given: &[usize], workers: usize) -> Vec<usize> {
    if !given.is_empty() {
        return given.to_vec();
    }
    let mut out: Vec<usize> = std::iter::successors(Some(1usize), |w| Some(w * 2))
        .take_while(|&w| w < workers)
        .collect();
    out.push(workers);
    out
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let workers = default_workers(a.common.workers)?;
    check_exps(a.max_exp, a.min_exp)?;
    let kind = PlanKind::WidthSweep {
        widths_per_core: a.widths_per_core.clone(),
        iterations: GranularitySweep::powers_of_two(a.max_exp, a.min_exp).iterations,
    };
    let plan = ExperimentPlan {
        steps: a.steps,
        ..base_plan(kind, workers, &a.set, &a.common)
    };
    run_plan(plan, &a.common, &a.eff)
}

fn scale(a: ScaleArgs) -> Result<i32> {
    let workers = default_workers(a.common.workers)?;
    let kind = PlanKind::WeakScaling {
        workers: worker_counts(&a.worker_counts, workers),
    };
    let plan = ExperimentPlan {
        steps: a.steps,
        width_per_core: a.width_per_core,
        base_iterations: a.iterations,
        ..base_plan(kind, workers, &a.set, &a.common)
    };
    run_plan(plan, &a.common, &a.eff)
}

fn imbalance(a: ImbalanceArgs) -> Result<i32> {
    let workers = default_workers(a.common.workers)?;
    let kind = PlanKind::ImbalanceSweep {
        factors: a.factors.clone(),
    };
    let plan = ExperimentPlan {
        steps: a.steps,
        width_per_core: a.width_per_core,
        base_iterations: a.iterations,
        ..base_plan(kind, workers, &a.set, &a.common)
    };
    run_plan(plan, &a.common, &a.eff)
}

fn comm(a: CommArgs) -> Result<i32> {
    let workers = default_workers(a.common.workers)?;
    let kind = PlanKind::CommPattern {
        preset: a.preset,
        workers: worker_counts(&a.worker_counts, workers),
    };
    let plan = ExperimentPlan {
        steps: a.steps,
        width_per_core: a.width_per_core,
        base_iterations: a.iterations,
        ..base_plan(kind, workers, &a.set, &a.common)
    };
    run_plan(plan, &a.common, &a.eff)
}

fn metg(a: MetgArgs) -> Result<i32> {
    let workers = default_workers(a.common.workers)?;
    check_exps(a.max_exp, a.min_exp)?;
    if !(a.threshold > 0.0 && a.threshold <= 1.0) {
        return Err(Error::InvalidConfig("--threshold must be in (0, 1]"));
    }
    let spec = graph_spec(&a.graph, workers, a.common.seed)?;
    let backends = backend_set(&a.set);
    if backends.is_empty() {
        return Err(Error::InvalidConfig("--backend needs at least one backend"));
    }
    let search = MetgSearch {
        sweep: GranularitySweep::powers_of_two(a.max_exp, a.min_exp),
        threshold: a.threshold,
        reps: a.common.reps,
    };
    let cal = calibration(&a.eff)?;
    let mut records = Vec::new();
    for template in backends {
        let cfg = BackendConfig {
            workers,
            rng_seed: a.common.seed,
            ..template
        };
        cfg.validate()?;
        let result = metrics::metg(&mut BackendRunner, &spec, &cfg, &cal, &search)?;
        match result.metg_seconds {
            Some(s) => println!("{:<14} METG({:.0}%) = {:.3e} s", cfg.label(), a.threshold * 100.0, s),
            None => println!("{:<14} METG({:.0}%) not reached in sweep", cfg.label(), a.threshold * 100.0),
        }
        for p in &result.curve {
            let point_spec = TaskGraphSpec {
                kernel: KernelConfig {
                    base_iterations: p.task_granularity_iterations,
                    ..spec.kernel
                },
                ..spec.clone()
            };
            let m = metrics::Measurement {
                mean_wall_seconds: p.wall_seconds,
                stddev: p.stddev,
                reps: p.reps,
                last: Default::default(),
            };
            let mut r = RunRecord::measured("", p.task_granularity_seconds, &point_spec, &cfg, &m, Some(p.efficiency));
            r.tasks_executed = point_spec.task_count() as u64;
            records.push(r);
        }
    }
    write_outputs(&records, &paths(&a.common.out, "task_granularity_seconds"))?;
    Ok(0)
}

/// Oracle matrix over every pattern, a spread of shapes and worker counts.
fn selftest(max_workers: usize, iterations: u64) -> Result<i32> {
    let mut configs = Vec::new();
    for b in BackendKind::ALL {
        configs.push(BackendConfig::new(b, 1));
    }
    configs.push(BackendConfig::new(BackendKind::Futures, 1).with_barrier(BarrierMode::None));
    let mut worker_counts = vec![1, 2, 4];
    worker_counts.retain(|&w| w <= max_workers.max(4));
    let (mut checked, mut failed) = (0, 0);
    for pattern in Pattern::ALL {
        for width in [1, 3, 8, 33] {
            for steps in [1, 2, 7] {
                let spec = TaskGraphSpec {
                    kernel: KernelConfig::compute_bound(iterations),
                    spread_radix: if pattern == Pattern::Spread { width.min(4) } else { 1 },
                    ..TaskGraphSpec::new(width, steps, pattern)
                };
                let (expected, _) = sequential_execute(&spec)?;
                for &w in &worker_counts {
                    for c in &configs {
                        let cfg = BackendConfig { workers: w, ..c.clone() };
                        checked += 1;
                        match backends::run(&spec, &cfg) {
                            Ok(r) if r.checksum == expected => {}
                            Ok(r) => {
                                failed += 1;
                                eprintln!(
                                    "mismatch: {} {width}x{steps} {} workers={w}: {} != {expected}",
                                    pattern,
                                    cfg.label(),
                                    r.checksum
                                );
                            }
                            Err(e) => {
                                failed += 1;
                                eprintln!("failure: {} {width}x{steps} {} workers={w}: {e}", pattern, cfg.label());
                            }
                        }
                    }
                }
            }
        }
    }
    println!("selftest: {} of {checked} runs match sequential execution", checked - failed);
    Ok(if failed == 0 { 0 } else { 2 })
}
