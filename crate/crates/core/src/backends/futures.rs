//! Future-based cooperation: every task output is a single-assignment future
//! that dependent tasks touch.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use super::barrier::SenseBarrier;
use super::sched::{deques, LocalQueue};
use super::{aborted, check_inputs, merge_stats, run_workers, AbortFlag, BackendConfig, BackendKind, BarrierMode, ExecutionReport, WorkerStats};
use crate::graph::{TaskCoord, TaskGraphSpec};
use crate::kernel::Scratch;
use crate::payload::{run_task, TaskOutput};
use crate::{Error, Result};

/// A task, possibly partway through touching its parents.
#[derive(Debug, Clone, Copy)]
struct Pending {
    step: usize,
    point: usize,
    /// Index into the flattened parent list of the next future to touch.
    next_parent: usize,
    inputs_xor: u64,
}

impl Pending {
    fn new(step: usize, point: usize) -> Self {
        Pending {
            step,
            point,
            next_parent: 0,
            inputs_xor: 0,
        }
    }
}

enum CellState {
    Unresolved(Vec<Pending>),
    Resolved { digest: u64, output: Option<Arc<TaskOutput>> },
}

/// Single-assignment future with a queue of suspended touchers.
struct FutureCell {
    state: Mutex<CellState>,
    /// Dependents that have not touched this future yet; the payload is
    /// released when it reaches zero.
    consumers_left: AtomicUsize,
}

enum Touch {
    Ready(u64),
    Suspended,
}

impl FutureCell {
    fn new(consumers: usize) -> Self {
        FutureCell {
            state: Mutex::new(CellState::Unresolved(Vec::new())),
            consumers_left: AtomicUsize::new(consumers),
        }
    }

    /// Returns the value, or parks `waiter` until the future is resolved.
    fn touch(&self, waiter: Pending) -> Touch {
        let mut state = self.state.lock().expect("future lock");
        match &mut *state {
            CellState::Resolved { digest, output } => {
                let digest = match output {
                    Some(out) => out.digest(),
                    None => *digest,
                };
                if self.consumers_left.fetch_sub(1, Ordering::AcqRel) == 1 {
                    *output = None;
                }
                Touch::Ready(digest)
            }
            CellState::Unresolved(waiters) => {
                waiters.push(waiter);
                Touch::Suspended
            }
        }
    }

    /// Publishes the value and hands back the suspended touchers.
    fn resolve(&self, output: TaskOutput) -> Vec<Pending> {
        let digest = output.digest();
        let keep = self.consumers_left.load(Ordering::Acquire) > 0;
        let mut state = self.state.lock().expect("future lock");
        let resolved = CellState::Resolved {
            digest,
            output: keep.then(|| Arc::new(output)),
        };
        match std::mem::replace(&mut *state, resolved) {
            CellState::Unresolved(waiters) => waiters,
            CellState::Resolved { .. } => panic!("future resolved twice"),
        }
    }
}

/// Executes `spec` with futures.
///
/// With [`BarrierMode::PerStep`] worker 0 pushes one step's tasks at a time
/// and a barrier separates steps, so every touch finds a resolved future.
/// With [`BarrierMode::None`] all tasks are pushed up front (earliest step on
/// top of worker 0's deque); a task touching an unresolved future is parked
/// on it and re-queued by whichever worker resolves it.
pub fn run_futures(spec: &TaskGraphSpec, cfg: &BackendConfig) -> Result<ExecutionReport> {
    let spec = check_inputs(spec, cfg, BackendKind::Futures)?;
    let workers = cfg.workers;
    let abort = AbortFlag::default();
    let barrier = SenseBarrier::new(workers, &abort);
    let cells: Vec<FutureCell> = (0..spec.task_count())
        .map(|i| {
            let task = TaskCoord::new(i / spec.width, i % spec.width);
            let consumers = spec.reverse_dependencies(task).map(|s| s.len()).unwrap_or(0);
            FutureCell::new(consumers)
        })
        .collect();
    let graph = FutureGraph {
        spec: &spec,
        cells,
        remaining: AtomicUsize::new(spec.task_count()),
        step_remaining: (0..spec.steps).map(|_| AtomicUsize::new(spec.width)).collect(),
        in_flight: AtomicUsize::new(0),
        checksum: AtomicU64::new(0),
    };
    let (locals, stealers) = deques::<Pending>(workers);
    let locals: Vec<_> = locals.into_iter().map(|w| Mutex::new(Some(w))).collect();

    let stats = run_workers(workers, &abort, |id| {
        let deque = locals[id].lock().expect("deque lock").take().expect("deque taken once");
        let mut worker = FutureWorker {
            graph: &graph,
            queue: LocalQueue::new(id, deque, &stealers, cfg.steal_retry_limit, cfg.rng_seed),
            scratch: Scratch::for_task(TaskCoord::new(0, 0), spec.seed),
            stats: WorkerStats::default(),
            trace: cfg.trace,
            abort: &abort,
        };
        let mut barrier = barrier.handle();
        barrier.wait()?;
        worker.stats.start = Some(Instant::now());
        match cfg.barrier_mode {
            BarrierMode::PerStep => {
                for step in 0..spec.steps {
                    if id == 0 {
                        graph.in_flight.fetch_add(spec.width, Ordering::AcqRel);
                        for point in (0..spec.width).rev() {
                            worker.queue.push(Pending::new(step, point));
                        }
                    }
                    worker.drain(&graph.step_remaining[step], false)?;
                    barrier.wait()?;
                }
            }
            BarrierMode::None => {
                if id == 0 {
                    graph.in_flight.fetch_add(spec.task_count(), Ordering::AcqRel);
                    for step in (0..spec.steps).rev() {
                        for point in (0..spec.width).rev() {
                            worker.queue.push(Pending::new(step, point));
                        }
                    }
                }
                // nothing may be judged deadlocked before the root has spawned
                barrier.wait()?;
                worker.drain(&graph.remaining, true)?;
            }
        }
        worker.stats.end = Some(Instant::now());
        worker.stats.steal_attempts = worker.queue.steal_attempts;
        worker.stats.steal_failures = worker.queue.steal_failures;
        Ok(worker.stats)
    })?;
    Ok(merge_stats(stats, graph.checksum.load(Ordering::Acquire)))
}

struct FutureGraph<'a> {
    spec: &'a TaskGraphSpec,
    cells: Vec<FutureCell>,
    remaining: AtomicUsize,
    step_remaining: Vec<AtomicUsize>,
    /// Tasks queued or running. Suspended tasks are not counted, so zero with
    /// work remaining means every remaining task is parked.
    in_flight: AtomicUsize,
    checksum: AtomicU64,
}

impl FutureGraph<'_> {
    fn cell(&self, step: usize, point: usize) -> &FutureCell {
        &self.cells[step * self.spec.width + point]
    }
}

struct FutureWorker<'g, 'a> {
    graph: &'g FutureGraph<'a>,
    queue: LocalQueue<'g, Pending>,
    scratch: Scratch,
    stats: WorkerStats,
    trace: bool,
    abort: &'g AbortFlag,
}

impl FutureWorker<'_, '_> {
    /// Runs and steals tasks until `remaining` reaches zero. With
    /// `detect_deadlock`, fails once every outstanding task is parked.
    fn drain(&mut self, remaining: &AtomicUsize, detect_deadlock: bool) -> Result<()> {
        loop {
            if let Some(task) = self.queue.next() {
                self.execute(task);
                continue;
            }
            let left = remaining.load(Ordering::Acquire);
            if left == 0 {
                return Ok(());
            }
            if detect_deadlock && self.graph.in_flight.load(Ordering::Acquire) == 0 {
                // in_flight is retired after remaining, so a finished run shows up here as zero
                let left = remaining.load(Ordering::Acquire);
                if left == 0 {
                    return Ok(());
                }
                self.abort.raise();
                return Err(Error::DeadlockDetected { remaining: left });
            }
            if self.abort.is_raised() {
                return Err(aborted());
            }
            std::thread::yield_now();
        }
    }

    fn execute(&mut self, mut task: Pending) {
        let graph = self.graph;
        let spec = graph.spec;
        let start = Instant::now();
        if task.step > 0 {
            let parents = spec.parents_unchecked(task.step, task.point);
            for (i, parent) in parents.points().enumerate().skip(task.next_parent) {
                task.next_parent = i;
                match graph.cell(task.step - 1, parent).touch(task) {
                    Touch::Ready(digest) => {
                        task.inputs_xor ^= digest;
                        self.stats.futures_touched += 1;
                    }
                    Touch::Suspended => {
                        self.stats.suspensions += 1;
                        graph.in_flight.fetch_sub(1, Ordering::AcqRel);
                        return;
                    }
                }
            }
        }
        let coord = TaskCoord::new(task.step, task.point);
        let digest = run_task(spec, coord, task.inputs_xor, &mut self.scratch);
        let waiters = graph
            .cell(task.step, task.point)
            .resolve(TaskOutput::new(digest, spec.output_bytes));
        // wake before retiring this task so in_flight never dips to zero in between
        graph.in_flight.fetch_add(waiters.len(), Ordering::AcqRel);
        for w in waiters {
            self.queue.push(w);
        }
        if task.step + 1 == spec.steps {
            graph.checksum.fetch_xor(digest, Ordering::AcqRel);
        }
        self.stats.record(self.trace, coord, start, Instant::now());
        graph.step_remaining[task.step].fetch_sub(1, Ordering::AcqRel);
        graph.remaining.fetch_sub(1, Ordering::AcqRel);
        graph.in_flight.fetch_sub(1, Ordering::AcqRel);
    }
}
