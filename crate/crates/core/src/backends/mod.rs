//! In-process runtime models that execute a task graph on a pool of worker
//! threads.
//!
//! All three backends compute the same per-task digests as
//! [`sequential_execute`](crate::payload::sequential_execute); they differ in
//! how work is placed on workers and how outputs reach dependent tasks, which
//! is what the counters in [`ExecutionReport`] expose.

mod barrier;
mod bsp;
mod futures;
mod sched;
mod store;
mod worksteal;

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::graph::{TaskCoord, TaskGraphSpec};
use crate::payload::GraphChecksum;
use crate::{Error, Result};

pub use bsp::{run_bsp, strip_range};
pub use futures::run_futures;
pub use store::GlobalStore;
pub use worksteal::run_worksteal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Static strips, pairwise exchange, barrier per step.
    Bsp,
    /// Random work stealing over a double-buffered global store.
    WorkSteal,
    /// Single-assignment futures per task output.
    Futures,
}

impl BackendKind {
    pub const ALL: [BackendKind; 3] = [BackendKind::Bsp, BackendKind::WorkSteal, BackendKind::Futures];

    /// Short name used on the command line and in reports.
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Bsp => "bsp",
            BackendKind::WorkSteal => "ws",
            BackendKind::Futures => "fbc",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "bsp" => Ok(BackendKind::Bsp),
            "ws" => Ok(BackendKind::WorkSteal),
            "fbc" => Ok(BackendKind::Futures),
            other => Err(format!("unknown backend `{other}` (expected bsp, ws or fbc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierMode {
    PerStep,
    /// Tasks of later steps may start as soon as their inputs resolve. Futures only.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub workers: usize,
    pub backend: BackendKind,
    pub barrier_mode: BarrierMode,
    /// Distinct random victims a thief tries before yielding the CPU.
    pub steal_retry_limit: usize,
    pub rng_seed: u64,
    /// Bsp only: send one message per contiguous run of points instead of one
    /// per point.
    pub bsp_aggregate_runs: bool,
    /// Record a [`TaskEvent`] per executed task.
    pub trace: bool,
}

impl BackendConfig {
    pub fn new(backend: BackendKind, workers: usize) -> Self {
        BackendConfig {
            workers,
            backend,
            barrier_mode: BarrierMode::PerStep,
            steal_retry_limit: 4,
            rng_seed: 0,
            bsp_aggregate_runs: false,
            trace: false,
        }
    }

    pub fn with_barrier(mut self, mode: BarrierMode) -> Self {
        self.barrier_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be at least 1"));
        }
        if self.steal_retry_limit == 0 {
            return Err(Error::InvalidConfig("steal_retry_limit must be at least 1"));
        }
        if self.barrier_mode == BarrierMode::None && self.backend != BackendKind::Futures {
            return Err(Error::InvalidConfig("barrier mode None is only valid for the futures backend"));
        }
        Ok(())
    }

    /// Label distinguishing the futures backend's barrier modes.
    pub fn label(&self) -> String {
        match (self.backend, self.barrier_mode) {
            (BackendKind::Futures, BarrierMode::None) => "fbc-nobarrier".to_string(),
            (b, _) => b.as_str().to_string(),
        }
    }
}

/// Start and end of one task, relative to the start of the timed region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskEvent {
    pub task: TaskCoord,
    pub worker: usize,
    pub start_seconds: f64,
    pub end_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub wall_seconds: f64,
    pub tasks_executed: u64,
    pub checksum: GraphChecksum,
    pub per_worker_busy_seconds: Vec<f64>,
    pub steal_attempts: u64,
    pub steal_failures: u64,
    /// Bsp point-to-point sends.
    pub messages_sent: u64,
    /// WorkSteal remote block fetches.
    pub fetch_ops: u64,
    pub bytes_transferred: u64,
    pub futures_touched: u64,
    pub suspensions: u64,
    #[serde(skip)]
    pub events: Vec<TaskEvent>,
}

impl ExecutionReport {
    /// max/min ratio of per-worker busy time (infinite if some worker never ran a task).
    pub fn busy_imbalance(&self) -> f64 {
        let max = self.per_worker_busy_seconds.iter().copied().fold(0.0, f64::max);
        let min = self
            .per_worker_busy_seconds
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }

    /// True if, for every step, no task of step `s + 1` started before the last
    /// task of step `s` finished. Needs a run with `trace` enabled.
    pub fn respects_step_barriers(&self) -> bool {
        let steps = self.events.iter().map(|e| e.task.step + 1).max().unwrap_or(0);
        let mut last_end = vec![f64::NEG_INFINITY; steps];
        let mut first_start = vec![f64::INFINITY; steps];
        for e in &self.events {
            last_end[e.task.step] = last_end[e.task.step].max(e.end_seconds);
            first_start[e.task.step] = first_start[e.task.step].min(e.start_seconds);
        }
        (1..steps).all(|s| first_start[s] >= last_end[s - 1])
    }
}

/// Runs `spec` on the backend selected by `cfg.backend`.
pub fn run(spec: &TaskGraphSpec, cfg: &BackendConfig) -> Result<ExecutionReport> {
    match cfg.backend {
        BackendKind::Bsp => run_bsp(spec, cfg),
        BackendKind::WorkSteal => run_worksteal(spec, cfg),
        BackendKind::Futures => run_futures(spec, cfg),
    }
}

fn check_inputs(spec: &TaskGraphSpec, cfg: &BackendConfig, expected: BackendKind) -> Result<TaskGraphSpec> {
    cfg.validate()?;
    if cfg.backend != expected {
        return Err(Error::InvalidConfig("backend kind does not match the runner"));
    }
    spec.clone().validate()
}

/// Counters and timestamps one worker accumulates during a run.
#[derive(Debug, Default)]
pub(crate) struct WorkerStats {
    pub start: Option<Instant>,
    pub end: Option<Instant>,
    pub busy_seconds: f64,
    pub tasks: u64,
    pub steal_attempts: u64,
    pub steal_failures: u64,
    pub messages_sent: u64,
    pub fetch_ops: u64,
    pub bytes_transferred: u64,
    pub futures_touched: u64,
    pub suspensions: u64,
    pub events: Vec<(TaskCoord, Instant, Instant)>,
}

impl WorkerStats {
    pub fn record(&mut self, trace: bool, task: TaskCoord, start: Instant, end: Instant) {
        self.busy_seconds += (end - start).as_secs_f64();
        self.tasks += 1;
        if trace {
            self.events.push((task, start, end));
        }
    }
}

pub(crate) fn merge_stats(stats: Vec<WorkerStats>, checksum: u64) -> ExecutionReport {
    let origin = stats.iter().filter_map(|s| s.start).min();
    let end = stats.iter().filter_map(|s| s.end).max();
    let wall_seconds = match (origin, end) {
        (Some(a), Some(b)) => (b - a).as_secs_f64(),
        _ => 0.0,
    };
    let mut report = ExecutionReport {
        wall_seconds,
        checksum: GraphChecksum(checksum),
        ..Default::default()
    };
    for (worker, s) in stats.into_iter().enumerate() {
        report.per_worker_busy_seconds.push(s.busy_seconds);
        report.tasks_executed += s.tasks;
        report.steal_attempts += s.steal_attempts;
        report.steal_failures += s.steal_failures;
        report.messages_sent += s.messages_sent;
        report.fetch_ops += s.fetch_ops;
        report.bytes_transferred += s.bytes_transferred;
        report.futures_touched += s.futures_touched;
        report.suspensions += s.suspensions;
        if let Some(origin) = origin {
            report.events.extend(s.events.into_iter().map(|(task, a, b)| TaskEvent {
                task,
                worker,
                start_seconds: a.saturating_duration_since(origin).as_secs_f64(),
                end_seconds: b.saturating_duration_since(origin).as_secs_f64(),
            }));
        }
    }
    report
        .events
        .sort_by(|a, b| a.start_seconds.total_cmp(&b.start_seconds));
    report
}

/// Set when any worker panics so that the others stop waiting for it.
#[derive(Debug, Default)]
pub(crate) struct AbortFlag(AtomicBool);

impl AbortFlag {
    pub fn raise(&self) {
        self.0.store(true, Ordering::Release);
    }

    pub fn is_raised(&self) -> bool {
        self.0.load(Ordering::Acquire)
    }
}

/// Raises the abort flag if the owning worker unwinds.
pub(crate) struct PanicGuard<'a>(pub &'a AbortFlag);

impl Drop for PanicGuard<'_> {
    fn drop(&mut self) {
        if std::thread::panicking() {
            self.0.raise();
        }
    }
}

/// Runs `body` once per worker on scoped threads and collects each worker's
/// result. A panicking worker raises `abort` and turns into an
/// [`Error::ExecutionFailure`].
pub(crate) fn run_workers<F>(workers: usize, abort: &AbortFlag, body: F) -> Result<Vec<WorkerStats>>
where
    F: Fn(usize) -> Result<WorkerStats> + Sync,
{
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|id| {
                let body = &body;
                std::thread::Builder::new()
                    .name(format!("taskbench-worker-{id}"))
                    .spawn_scoped(scope, move || {
                        let _guard = PanicGuard(abort);
                        let r = body(id);
                        if r.is_err() {
                            abort.raise();
                        }
                        r
                    })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| match h {
                Ok(h) => h.join().unwrap_or_else(|panic| {
                    let msg = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "worker panicked".to_string());
                    Err(Error::ExecutionFailure(msg))
                }),
                Err(e) => {
                    abort.raise();
                    Err(Error::ExecutionFailure(format!("cannot spawn worker: {e}")))
                }
            })
            .collect()
    });
    // prefer the root cause over the secondary "aborted" errors of other workers
    let mut stats = Vec::with_capacity(workers);
    let mut first_err = None;
    for r in results {
        match r {
            Ok(s) => stats.push(s),
            Err(Error::ExecutionFailure(m)) if m == ABORTED => {}
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    if stats.len() != workers {
        return Err(Error::ExecutionFailure(ABORTED.to_string()));
    }
    Ok(stats)
}

pub(crate) const ABORTED: &str = "run aborted by another worker";

pub(crate) fn aborted() -> Error {
    Error::ExecutionFailure(ABORTED.to_string())
}
