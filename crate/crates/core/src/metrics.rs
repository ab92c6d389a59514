//! Application efficiency, minimum effective task granularity (METG) and the
//! standard experiment plans.
//!
//! Efficiency is useful work over allocated capacity:
//!
//! ```text
//! efficiency = width * steps * base_iterations * seconds_per_iteration
//!              / (wall_seconds * workers)
//! ```
//!
//! where `seconds_per_iteration` comes from a single-core [`Calibration`].
//! METG is the task duration at which a backend's efficiency curve crosses a
//! threshold (50% by default) while granularity shrinks.

use serde::{Deserialize, Serialize};

use crate::backends::{self, BackendConfig, BackendKind, BarrierMode, ExecutionReport};
use crate::graph::{Pattern, TaskGraphSpec};
use crate::kernel::{Calibration, KernelConfig};
use crate::{Error, Result};

/// Wall times shorter than this are treated as unmeasurable.
pub const MIN_WALL_SECONDS: f64 = 1e-9;

/// Something that executes a task graph: the real backends or an analytic model.
pub trait Runner {
    fn run(&mut self, spec: &TaskGraphSpec, cfg: &BackendConfig) -> Result<ExecutionReport>;
}

/// Runs the in-process backends.
#[derive(Debug, Default, Clone, Copy)]
pub struct BackendRunner;

impl Runner for BackendRunner {
    fn run(&mut self, spec: &TaskGraphSpec, cfg: &BackendConfig) -> Result<ExecutionReport> {
        backends::run(spec, cfg)
    }
}

/// Closed-form executor with a fixed per-task overhead:
/// `wall = tasks * (task_seconds + overhead) / workers`.
///
/// Nothing is executed; the checksum is zero. Used to test the METG search
/// and to sketch expected curves.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticRunner {
    pub seconds_per_iteration: f64,
    pub overhead_seconds: f64,
}

impl Runner for AnalyticRunner {
    fn run(&mut self, spec: &TaskGraphSpec, cfg: &BackendConfig) -> Result<ExecutionReport> {
        let spec = spec.clone().validate()?;
        cfg.validate()?;
        let tasks = spec.task_count() as f64;
        let task_seconds = spec.kernel.base_iterations as f64 * self.seconds_per_iteration;
        let wall_seconds = tasks * (task_seconds + self.overhead_seconds) / cfg.workers as f64;
        Ok(ExecutionReport {
            wall_seconds,
            tasks_executed: spec.task_count() as u64,
            per_worker_busy_seconds: vec![tasks * task_seconds / cfg.workers as f64; cfg.workers],
            ..Default::default()
        })
    }
}

/// Arithmetic mean and sample standard deviation (`n - 1` denominator; zero
/// for a single sample).
pub fn aggregate_runs(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

/// Useful work over allocated capacity for one run.
///
/// Load-imbalanced kernels count `base_iterations` per task: the imbalance
/// distribution has mean `base_iterations`, so expected total work is the same.
pub fn application_efficiency(
    report: &ExecutionReport,
    spec: &TaskGraphSpec,
    cal: &Calibration,
    workers: usize,
) -> Result<f64> {
    efficiency_from_wall(report.wall_seconds, spec, cal, workers)
}

pub fn efficiency_from_wall(
    wall_seconds: f64,
    spec: &TaskGraphSpec,
    cal: &Calibration,
    workers: usize,
) -> Result<f64> {
    if wall_seconds.is_nan() || wall_seconds < MIN_WALL_SECONDS {
        return Err(Error::ZeroWallTime(wall_seconds));
    }
    let work = spec.task_count() as f64 * spec.kernel.base_iterations as f64 * cal.seconds_per_iteration;
    Ok(work / (wall_seconds * workers as f64))
}

/// Repeated timing of one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub mean_wall_seconds: f64,
    pub stddev: f64,
    pub reps: usize,
    /// Report of the last timed repetition.
    pub last: ExecutionReport,
}

/// One untimed warm-up followed by `reps` timed runs.
pub fn measure(
    runner: &mut dyn Runner,
    spec: &TaskGraphSpec,
    cfg: &BackendConfig,
    reps: usize,
) -> Result<Measurement> {
    let reps = reps.max(1);
    runner.run(spec, cfg)?;
    let mut walls = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let r = runner.run(spec, cfg)?;
        walls.push(r.wall_seconds);
        last = Some(r);
    }
    let (mean_wall_seconds, stddev) = aggregate_runs(&walls)?;
    Ok(Measurement {
        mean_wall_seconds,
        stddev,
        reps,
        last: last.expect("at least one repetition"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub task_granularity_iterations: u64,
    pub task_granularity_seconds: f64,
    pub efficiency: f64,
    pub wall_seconds: f64,
    pub reps: usize,
    pub stddev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetgResult {
    /// Points in descending granularity.
    pub curve: Vec<EfficiencyPoint>,
    /// `None` when the curve never crosses the threshold inside the sweep.
    pub metg_seconds: Option<f64>,
    pub threshold: f64,
}

/// Descending geometric grid of task sizes in kernel iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularitySweep {
    pub iterations: Vec<u64>,
}

impl Default for GranularitySweep {
    /// 2^20 down to 2^6 iterations in factors of two.
    fn default() -> Self {
        GranularitySweep::powers_of_two(20, 6)
    }
}

impl GranularitySweep {
    pub fn powers_of_two(from_exp: u32, to_exp: u32) -> Self {
        GranularitySweep {
            iterations: (to_exp..=from_exp).rev().map(|e| 1u64 << e).collect(),
        }
    }

    /// At least two points, strictly descending, constant ratio.
    pub fn validate(&self) -> Result<()> {
        let it = &self.iterations;
        if it.len() < 2 {
            return Err(Error::InvalidSweep("need at least two granularities"));
        }
        if it.contains(&0) {
            return Err(Error::InvalidSweep("granularities must be positive"));
        }
        if it.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidSweep("granularities must be strictly descending"));
        }
        let ratio = it[0] as f64 / it[1] as f64;
        if it
            .windows(2)
            .any(|w| ((w[0] as f64 / w[1] as f64) / ratio - 1.0).abs() > 1e-6)
        {
            return Err(Error::InvalidSweep("granularities must form a geometric grid"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetgSearch {
    pub sweep: GranularitySweep,
    pub threshold: f64,
    pub reps: usize,
}

impl Default for MetgSearch {
    fn default() -> Self {
        MetgSearch {
            sweep: GranularitySweep::default(),
            threshold: 0.5,
            reps: 5,
        }
    }
}

/// Sweeps task granularity from coarse to fine and locates the threshold
/// crossing.
///
/// The sweep stops after two consecutive points below the threshold. The
/// crossing is interpolated linearly in `(ln granularity_seconds, efficiency)`
/// between the finest point at or above the threshold and its successor.
pub fn metg(
    runner: &mut dyn Runner,
    spec_template: &TaskGraphSpec,
    cfg: &BackendConfig,
    cal: &Calibration,
    search: &MetgSearch,
) -> Result<MetgResult> {
    search.sweep.validate()?;
    let threshold = search.threshold;
    let mut curve = Vec::new();
    let mut below = 0;
    for &iterations in &search.sweep.iterations {
        let spec = TaskGraphSpec {
            kernel: KernelConfig {
                base_iterations: iterations,
                ..spec_template.kernel
            },
            ..spec_template.clone()
        };
        let m = measure(runner, &spec, cfg, search.reps)?;
        let efficiency = efficiency_from_wall(m.mean_wall_seconds, &spec, cal, cfg.workers)?;
        curve.push(EfficiencyPoint {
            task_granularity_iterations: iterations,
            task_granularity_seconds: iterations as f64 * cal.seconds_per_iteration,
            efficiency,
            wall_seconds: m.mean_wall_seconds,
            reps: m.reps,
            stddev: m.stddev,
        });
        if efficiency < threshold {
            below += 1;
            if below == 2 {
                break;
            }
        } else {
            below = 0;
        }
    }
    let metg_seconds = crossing(&curve, threshold);
    Ok(MetgResult {
        curve,
        metg_seconds,
        threshold,
    })
}

/// Threshold crossing of a curve in descending granularity.
pub fn crossing(curve: &[EfficiencyPoint], threshold: f64) -> Option<f64> {
    let last = curve.last()?;
    if last.efficiency >= threshold {
        return None;
    }
    let i = curve.iter().rposition(|p| p.efficiency >= threshold)?;
    let (a, b) = (&curve[i], &curve[i + 1]);
    let (xa, xb) = (a.task_granularity_seconds.ln(), b.task_granularity_seconds.ln());
    let t = (threshold - a.efficiency) / (b.efficiency - a.efficiency);
    Some((xa + t * (xb - xa)).exp())
}

/// Output-size and dependency presets for the communication experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommPreset {
    /// Spread graph, 40 dependencies per task, 1 KiB outputs.
    Spread40,
    /// Spread graph, 80 dependencies per task, 1 KiB outputs.
    Spread80,
    /// All-to-all graph, 16 B outputs.
    AllToAll,
}

impl CommPreset {
    pub fn pattern(self) -> Pattern {
        match self {
            CommPreset::Spread40 | CommPreset::Spread80 => Pattern::Spread,
            CommPreset::AllToAll => Pattern::AllToAll,
        }
    }

    pub fn radix(self) -> usize {
        match self {
            CommPreset::Spread40 => 40,
            CommPreset::Spread80 => 80,
            CommPreset::AllToAll => 1,
        }
    }

    pub fn output_bytes(self) -> usize {
        match self {
            CommPreset::Spread40 | CommPreset::Spread80 => 1024,
            CommPreset::AllToAll => 16,
        }
    }

    /// Smallest multiple of the radix that is at least `min_width`, so every
    /// task has exactly `radix` distinct parents.
    pub fn width_for(self, min_width: usize) -> usize {
        min_width.max(1).next_multiple_of(self.radix())
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CommPreset::Spread40 => "spread40",
            CommPreset::Spread80 => "spread80",
            CommPreset::AllToAll => "all_to_all",
        }
    }
}

impl std::str::FromStr for CommPreset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "spread40" => Ok(CommPreset::Spread40),
            "spread80" => Ok(CommPreset::Spread80),
            "all_to_all" => Ok(CommPreset::AllToAll),
            other => Err(format!(
                "unknown preset `{other}` (expected spread40, spread80 or all_to_all)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanKind {
    /// Efficiency against task size for several widths per core.
    WidthSweep {
        widths_per_core: Vec<usize>,
        iterations: Vec<u64>,
    },
    /// Width grows with the worker count.
    WeakScaling { workers: Vec<usize> },
    /// Load-imbalanced kernel at several imbalance factors.
    ImbalanceSweep { factors: Vec<f64> },
    /// Communication-heavy presets over several worker counts.
    CommPattern { preset: CommPreset, workers: Vec<usize> },
}

/// A table of (backend x configuration) cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    /// Backend templates; `workers` is overridden per cell.
    pub backends: Vec<BackendConfig>,
    /// Worker count for plans that do not vary it.
    pub workers: usize,
    pub width_per_core: usize,
    pub steps: usize,
    pub base_iterations: u64,
    pub seed: u64,
    pub reps: usize,
    /// Cells whose estimated footprint exceeds this are marked failed instead of run.
    pub memory_limit_bytes: u64,
}

/// The three backends with a barrier between steps.
pub fn default_backends() -> Vec<BackendConfig> {
    BackendKind::ALL.iter().map(|&b| BackendConfig::new(b, 1)).collect()
}

impl ExperimentPlan {
    fn with_kind(kind: PlanKind, workers: usize) -> Self {
        ExperimentPlan {
            kind,
            backends: default_backends(),
            workers,
            width_per_core: 16,
            steps: 16,
            base_iterations: 1 << 20,
            seed: 0,
            reps: 5,
            memory_limit_bytes: 1 << 30,
        }
    }

    /// Widths per core {1, 4, 16, 32, 64} against task sizes 2^6..2^20.
    pub fn width_sweep(workers: usize) -> Self {
        ExperimentPlan::with_kind(
            PlanKind::WidthSweep {
                widths_per_core: vec![1, 4, 16, 32, 64],
                iterations: GranularitySweep::default().iterations,
            },
            workers,
        )
    }

    /// 16 width per core for each worker count.
    pub fn weak_scaling(workers: Vec<usize>) -> Self {
        let first = workers.first().copied().unwrap_or(1);
        ExperimentPlan::with_kind(PlanKind::WeakScaling { workers }, first)
    }

    /// Imbalance factors 0.5, 1.0, 1.5 and 2.0 at 2^20 iterations.
    pub fn imbalance_sweep(workers: usize) -> Self {
        ExperimentPlan::with_kind(
            PlanKind::ImbalanceSweep {
                factors: vec![0.5, 1.0, 1.5, 2.0],
            },
            workers,
        )
    }

    pub fn comm_pattern(preset: CommPreset, workers: Vec<usize>) -> Self {
        let first = workers.first().copied().unwrap_or(1);
        ExperimentPlan::with_kind(PlanKind::CommPattern { preset, workers }, first)
    }

    /// Name of the plan's x axis.
    pub fn x_label(&self) -> &'static str {
        match self.kind {
            PlanKind::WidthSweep { .. } => "iterations",
            PlanKind::WeakScaling { .. } | PlanKind::CommPattern { .. } => "workers",
            PlanKind::ImbalanceSweep { .. } => "imbalance_factor",
        }
    }

    /// Every cell configuration in execution order.
    pub fn cells(&self) -> Vec<CellConfig> {
        let stencil = |width: usize, kernel: KernelConfig| TaskGraphSpec {
            width,
            steps: self.steps,
            pattern: Pattern::Stencil,
            spread_radix: 1,
            kernel,
            output_bytes: 16,
            seed: self.seed,
        };
        let mut out = Vec::new();
        let mut push = |series: String, x: f64, workers: usize, spec: TaskGraphSpec| {
            for b in &self.backends {
                out.push(CellConfig {
                    series: series.clone(),
                    x,
                    backend: BackendConfig {
                        workers,
                        rng_seed: self.seed,
                        ..b.clone()
                    },
                    spec: spec.clone(),
                });
            }
        };
        match &self.kind {
            PlanKind::WidthSweep {
                widths_per_core,
                iterations,
            } => {
                for &wpc in widths_per_core {
                    for &it in iterations {
                        let spec = stencil(wpc * self.workers, KernelConfig::compute_bound(it));
                        push(format!("width_per_core={wpc}"), it as f64, self.workers, spec);
                    }
                }
            }
            PlanKind::WeakScaling { workers } => {
                for &w in workers {
                    let spec = stencil(
                        self.width_per_core * w,
                        KernelConfig::compute_bound(self.base_iterations),
                    );
                    push(String::new(), w as f64, w, spec);
                }
            }
            PlanKind::ImbalanceSweep { factors } => {
                for &f in factors {
                    let spec = stencil(
                        self.width_per_core * self.workers,
                        KernelConfig::load_imbalance(self.base_iterations, f),
                    );
                    push(String::new(), f, self.workers, spec);
                }
            }
            PlanKind::CommPattern { preset, workers } => {
                for &w in workers {
                    let spec = TaskGraphSpec {
                        width: preset.width_for(self.width_per_core * w),
                        steps: self.steps,
                        pattern: preset.pattern(),
                        spread_radix: preset.radix(),
                        kernel: KernelConfig::compute_bound(self.base_iterations),
                        output_bytes: preset.output_bytes(),
                        seed: self.seed,
                    };
                    push(preset.as_str().to_string(), w as f64, w, spec);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellConfig {
    /// Groups cells that share a curve (e.g. one width per core).
    pub series: String,
    pub x: f64,
    pub backend: BackendConfig,
    pub spec: TaskGraphSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done {
        measurement: Measurement,
        efficiency: f64,
    },
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub config: CellConfig,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub x_label: &'static str,
    pub cells: Vec<Cell>,
}

/// Rough peak memory of one run, used to refuse cells that would not fit.
pub fn estimated_footprint(spec: &TaskGraphSpec, cfg: &BackendConfig) -> u64 {
    let row = spec.width as u64 * spec.output_bytes as u64;
    let workers = cfg.workers as u64;
    let base = match (cfg.backend, cfg.barrier_mode) {
        // strips plus in-flight messages of one step
        (BackendKind::Bsp, _) => 2 * row + row * workers,
        // two buffers plus one cached row per worker
        (BackendKind::WorkSteal, _) => 2 * row + row * workers,
        (BackendKind::Futures, BarrierMode::PerStep) => 2 * row,
        // every output may be alive at once
        (BackendKind::Futures, BarrierMode::None) => row * spec.steps as u64,
    };
    base + spec.task_count() as u64 * 64
}

/// Runs every cell of `plan` serially. A cell that cannot run is recorded as
/// [`CellOutcome::Failed`] and the table continues.
pub fn run_experiment(plan: &ExperimentPlan, runner: &mut dyn Runner, cal: &Calibration) -> ResultTable {
    let cells = plan
        .cells()
        .into_iter()
        .map(|config| {
            let outcome = run_cell(plan, runner, cal, &config);
            Cell { config, outcome }
        })
        .collect();
    ResultTable {
        x_label: plan.x_label(),
        cells,
    }
}

fn run_cell(plan: &ExperimentPlan, runner: &mut dyn Runner, cal: &Calibration, config: &CellConfig) -> CellOutcome {
    let footprint = estimated_footprint(&config.spec, &config.backend);
    if footprint > plan.memory_limit_bytes {
        return CellOutcome::Failed(format!(
            "estimated footprint {footprint} B exceeds limit {} B",
            plan.memory_limit_bytes
        ));
    }
    let result = measure(runner, &config.spec, &config.backend, plan.reps).and_then(|m| {
        let efficiency = efficiency_from_wall(m.mean_wall_seconds, &config.spec, cal, config.backend.workers)?;
        Ok(CellOutcome::Done {
            measurement: m,
            efficiency,
        })
    });
    result.unwrap_or_else(|e| CellOutcome::Failed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;

    fn report(wall: f64) -> ExecutionReport {
        ExecutionReport {
            wall_seconds: wall,
            ..Default::default()
        }
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_runs(&[2.0]).unwrap(), (2.0, 0.0));
        let (m, s) = aggregate_runs(&[1.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(aggregate_runs(&[0.7; 5]).unwrap().1, 0.0);
        assert!(matches!(aggregate_runs(&[]), Err(Error::EmptySamples)));
    }

    #[test]
    fn efficiency_examples() {
        let spec = TaskGraphSpec {
            kernel: KernelConfig::compute_bound(1000),
            ..TaskGraphSpec::new(8, 4, Pattern::Stencil)
        };
        let cal = Calibration::fixed(1e-8);
        let ideal = 8.0 * 4.0 * 1000.0 * 1e-8 / 2.0;
        let e = |wall| application_efficiency(&report(wall), &spec, &cal, 2).unwrap();
        assert!((e(ideal) - 1.0).abs() < 1e-9);
        assert!((e(2.0 * ideal) - 0.5).abs() < 1e-9);
        assert!((e(1.1 * ideal) - 1.0 / 1.1).abs() < 1e-9);
        assert!(matches!(
            application_efficiency(&report(0.0), &spec, &cal, 2),
            Err(Error::ZeroWallTime(_))
        ));
    }

    #[test]
    fn sweep_validation() {
        assert!(GranularitySweep::default().validate().is_ok());
        assert_eq!(GranularitySweep::default().iterations.len(), 15);
        let bad = |v: Vec<u64>| GranularitySweep { iterations: v }.validate().is_err();
        assert!(bad(vec![64]));
        assert!(bad(vec![64, 128]));
        assert!(bad(vec![256, 128, 32]));
        assert!(!bad(vec![81, 27, 9, 3]));
    }

    fn analytic(overhead: f64) -> (AnalyticRunner, Calibration) {
        let spi = 1e-8;
        (
            AnalyticRunner {
                seconds_per_iteration: spi,
                overhead_seconds: overhead,
            },
            Calibration::fixed(spi),
        )
    }

    fn analytic_metg(overhead: f64) -> MetgResult {
        let (mut runner, cal) = analytic(overhead);
        let spec = TaskGraphSpec::new(32, 4, Pattern::Stencil);
        let cfg = BackendConfig::new(BackendKind::WorkSteal, 4);
        let search = MetgSearch {
            reps: 1,
            ..Default::default()
        };
        metg(&mut runner, &spec, &cfg, &cal, &search).unwrap()
    }

    #[test]
    fn analytic_metg_recovers_overhead() {
        for o in [1e-6, 3e-6, 10e-6, 100e-6] {
            let r = analytic_metg(o);
            let m = r.metg_seconds.expect("crossing");
            assert!(m >= o / 2f64.sqrt() && m <= o * 2f64.sqrt(), "o={o} metg={m}");
            // the early stop leaves at most two points below threshold
            let below = r.curve.iter().filter(|p| p.efficiency < 0.5).count();
            assert!((1..=2).contains(&below));
            if o >= 3e-6 {
                assert_eq!(below, 2);
            }
            assert!(r.curve.windows(2).all(|w| w[0].task_granularity_iterations > w[1].task_granularity_iterations));
        }
    }

    #[test]
    fn no_overhead_never_crosses() {
        let r = analytic_metg(0.0);
        assert_eq!(r.metg_seconds, None);
        assert_eq!(r.curve.len(), 15);
        assert!(r.curve.iter().all(|p| (p.efficiency - 1.0).abs() < 1e-9));
    }

    #[test]
    fn huge_overhead_is_not_reached() {
        let r = analytic_metg(1.0);
        assert_eq!(r.metg_seconds, None);
        assert_eq!(r.curve.len(), 2);
    }

    #[test]
    fn crossing_interpolates_in_log_space() {
        let p = |s: f64, e: f64| EfficiencyPoint {
            task_granularity_iterations: 1,
            task_granularity_seconds: s,
            efficiency: e,
            wall_seconds: 1.0,
            reps: 1,
            stddev: 0.0,
        };
        let curve = [p(4.0, 0.9), p(2.0, 0.6), p(1.0, 0.4)];
        let m = crossing(&curve, 0.5).unwrap();
        assert!((m - 2f64.sqrt()).abs() < 1e-12);
        // a dip above the threshold further down the curve moves the crossing
        let curve = [p(8.0, 0.9), p(4.0, 0.45), p(2.0, 0.55), p(1.0, 0.3)];
        let m = crossing(&curve, 0.5).unwrap();
        assert!(m > 1.0 && m < 2.0);
    }

    #[test]
    fn width_sweep_cardinality() {
        let plan = ExperimentPlan {
            kind: PlanKind::WidthSweep {
                widths_per_core: vec![1, 4],
                iterations: vec![1 << 10, 1 << 8],
            },
            backends: vec![BackendConfig::new(BackendKind::WorkSteal, 1)],
            ..ExperimentPlan::width_sweep(2)
        };
        let (mut runner, cal) = analytic(1e-6);
        let table = run_experiment(&plan, &mut runner, &cal);
        assert_eq!(table.cells.len(), 4);
        for cell in &table.cells {
            match &cell.outcome {
                CellOutcome::Done { measurement, .. } => assert_eq!(measurement.reps, 5),
                CellOutcome::Failed(e) => panic!("{e}"),
            }
        }
        assert_eq!(table.cells[2].config.spec.width, 8);
    }

    #[test]
    fn weak_scaling_widths() {
        let plan = ExperimentPlan::weak_scaling(vec![1, 2, 4]);
        let widths: Vec<usize> = plan
            .cells()
            .iter()
            .filter(|c| c.backend.backend == BackendKind::Bsp)
            .map(|c| c.spec.width)
            .collect();
        assert_eq!(widths, vec![16, 32, 64]);
    }

    #[test]
    fn comm_presets() {
        let plan = ExperimentPlan::comm_pattern(CommPreset::AllToAll, vec![2]);
        let cells = plan.cells();
        assert!(cells.iter().all(|c| c.spec.output_bytes == 16 && c.spec.pattern == Pattern::AllToAll));
        let plan = ExperimentPlan::comm_pattern(CommPreset::Spread80, vec![1, 4]);
        for c in plan.cells() {
            assert_eq!(c.spec.output_bytes, 1024);
            assert_eq!(c.spec.spread_radix, 80);
            assert!(c.spec.clone().validate().is_ok());
            assert_eq!(c.spec.dependencies(crate::TaskCoord::new(1, 3)).unwrap().len(), 80);
        }
        let plan = ExperimentPlan::comm_pattern(CommPreset::Spread40, vec![1, 4, 16]);
        let widths: Vec<usize> = plan.cells().iter().map(|c| c.spec.width).step_by(3).collect();
        assert_eq!(widths, vec![40, 80, 280]);
        for c in plan.cells() {
            assert_eq!(c.spec.dependencies(crate::TaskCoord::new(2, 7)).unwrap().len(), 40);
        }
    }

    #[test]
    fn oversized_cells_fail_without_aborting() {
        let mut plan = ExperimentPlan::comm_pattern(CommPreset::AllToAll, vec![1, 2]);
        plan.memory_limit_bytes = 1;
        plan.reps = 1;
        let (mut runner, cal) = analytic(0.0);
        let table = run_experiment(&plan, &mut runner, &cal);
        assert_eq!(table.cells.len(), 6);
        assert!(table.cells.iter().all(|c| matches!(c.outcome, CellOutcome::Failed(_))));
    }

    #[test]
    fn imbalance_plan_uses_load_imbalance_kernel() {
        let plan = ExperimentPlan::imbalance_sweep(4);
        let cells = plan.cells();
        assert_eq!(cells.len(), 12);
        assert!(cells.iter().all(|c| c.spec.kernel.kind == KernelKind::LoadImbalance && c.spec.width == 64));
        assert_eq!(cells[11].x, 2.0);
    }
}
