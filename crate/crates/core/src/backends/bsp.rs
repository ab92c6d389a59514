//! Bulk-synchronous execution over static vertical strips.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use super::barrier::SenseBarrier;
use super::{aborted, check_inputs, merge_stats, run_workers, AbortFlag, BackendConfig, BackendKind, ExecutionReport, WorkerStats};
use crate::graph::{IntervalSet, Pattern, TaskCoord, TaskGraphSpec};
use crate::kernel::Scratch;
use crate::payload::{read_digest, run_task, write_payload};
use crate::{Error, Result};

/// Points owned by `rank` when `width` points are split into `workers`
/// contiguous strips; the first `width % workers` ranks get one extra point.
pub fn strip_range(width: usize, workers: usize, rank: usize) -> Range<usize> {
    let base = width / workers;
    let extra = width % workers;
    let lo = rank * base + rank.min(extra);
    let len = base + usize::from(rank < extra);
    lo..lo + len
}

fn owner_of(width: usize, workers: usize, point: usize) -> usize {
    let base = width / workers;
    let extra = width % workers;
    let fat = extra * (base + 1);
    if point < fat {
        point / (base + 1)
    } else {
        extra + (point - fat) / base
    }
}

/// Outputs of a contiguous run of points of one step.
struct Message {
    step: usize,
    points: Range<usize>,
    payload: Vec<u8>,
}

/// Executes `spec` with one strip per worker.
///
/// Each step: post sends of the previous step's outputs to every other worker
/// that consumes them, receive every remotely owned input, run the strip and
/// join the barrier. By default every (receiver, point) pair is its own
/// message; with `bsp_aggregate_runs` a contiguous run of points is sent as
/// one message.
pub fn run_bsp(spec: &TaskGraphSpec, cfg: &BackendConfig) -> Result<ExecutionReport> {
    let spec = check_inputs(spec, cfg, BackendKind::Bsp)?;
    let workers = cfg.workers;
    let abort = AbortFlag::default();
    let barrier = SenseBarrier::new(workers, &abort);
    let checksum = AtomicU64::new(0);

    let (senders, receivers): (Vec<Sender<Message>>, Vec<Receiver<Message>>) =
        (0..workers).map(|_| mpsc::channel()).unzip();
    let receivers: Vec<_> = receivers.into_iter().map(std::sync::Mutex::new).collect();

    let stats = run_workers(workers, &abort, |rank| {
        let inbox = receivers[rank].lock().expect("inbox lock");
        let ctx = StripWorker {
            spec: &spec,
            cfg,
            rank,
            strip: strip_range(spec.width, workers, rank),
            senders: &senders,
            inbox: &inbox,
            abort: &abort,
        };
        ctx.run(&barrier, &checksum)
    })?;
    Ok(merge_stats(stats, checksum.load(Ordering::Acquire)))
}

struct StripWorker<'a> {
    spec: &'a TaskGraphSpec,
    cfg: &'a BackendConfig,
    rank: usize,
    strip: Range<usize>,
    senders: &'a [Sender<Message>],
    inbox: &'a Receiver<Message>,
    abort: &'a AbortFlag,
}

impl StripWorker<'_> {
    fn run(&self, barrier: &SenseBarrier<'_>, checksum: &AtomicU64) -> Result<WorkerStats> {
        let spec = self.spec;
        let ob = spec.output_bytes;
        let mut stats = WorkerStats::default();
        let mut barrier = barrier.handle();
        let mut scratch = Scratch::for_task(TaskCoord::new(0, 0), spec.seed);
        // outputs of this strip for the previous and current step
        let mut prev = vec![0u8; self.strip.len() * ob];
        let mut cur = vec![0u8; self.strip.len() * ob];
        // digests of every point of the previous step this worker has seen
        let mut inputs = vec![0u64; spec.width];
        let period = if spec.pattern == Pattern::Spread { spec.width } else { 1 };
        let mut plans: HashMap<usize, StepPlan> = HashMap::new();

        barrier.wait()?;
        stats.start = Some(Instant::now());
        for step in 0..spec.steps {
            let plan = if step == 0 {
                None
            } else {
                let key = step % period;
                let plan = plans.entry(key).or_insert_with(|| self.plan(step));
                self.send_outputs(step, plan, &prev, &mut stats)?;
                for (i, p) in self.strip.clone().enumerate() {
                    inputs[p] = read_digest(&prev[i * ob..]);
                }
                self.receive_inputs(step, plan, &mut inputs)?;
                Some(&*plan)
            };
            for (i, point) in self.strip.clone().enumerate() {
                let task = TaskCoord::new(step, point);
                let start = Instant::now();
                let inputs_xor = plan.map_or(0, |plan| {
                    plan.parents[i].points().fold(0, |acc, p| acc ^ inputs[p])
                });
                let digest = run_task(spec, task, inputs_xor, &mut scratch);
                write_payload(&mut cur[i * ob..(i + 1) * ob], digest);
                if step + 1 == spec.steps {
                    checksum.fetch_xor(digest, Ordering::AcqRel);
                }
                stats.record(self.cfg.trace, task, start, Instant::now());
            }
            std::mem::swap(&mut prev, &mut cur);
            barrier.wait()?;
        }
        stats.end = Some(Instant::now());
        Ok(stats)
    }

    /// Sends and receives of one step. Stencil and all-to-all graphs repeat
    /// the same plan every step; spread graphs repeat with period `width`.
    fn plan(&self, step: usize) -> StepPlan {
        let spec = self.spec;
        let workers = self.cfg.workers;
        let parents: Vec<IntervalSet> = self
            .strip
            .clone()
            .map(|p| spec.parents_unchecked(step, p))
            .collect();

        let mut sends = Vec::new();
        if !self.strip.is_empty() {
            for receiver in (0..workers).filter(|&r| r != self.rank) {
                let needed = strip_range(spec.width, workers, receiver)
                    .map(|p| spec.parents_unchecked(step, p).intersect_range(self.strip.clone()))
                    .fold(IntervalSet::new(), |acc, s| acc.union(&s));
                for run in self.message_runs(&needed) {
                    sends.push((receiver, run));
                }
            }
        }

        let needed = parents.iter().fold(IntervalSet::new(), |acc, s| acc.union(s));
        let expected_messages = (0..workers)
            .filter(|&o| o != self.rank)
            .map(|o| {
                let remote = needed.intersect_range(strip_range(spec.width, workers, o));
                self.message_runs(&remote).len()
            })
            .sum();
        StepPlan {
            parents,
            sends,
            expected_messages,
        }
    }

    fn message_runs(&self, set: &IntervalSet) -> Vec<Range<usize>> {
        if self.cfg.bsp_aggregate_runs {
            set.intervals().to_vec()
        } else {
            set.points().map(|p| p..p + 1).collect()
        }
    }

    fn send_outputs(&self, step: usize, plan: &StepPlan, prev: &[u8], stats: &mut WorkerStats) -> Result<()> {
        let ob = self.spec.output_bytes;
        for (receiver, run) in &plan.sends {
            let lo = (run.start - self.strip.start) * ob;
            let hi = (run.end - self.strip.start) * ob;
            let msg = Message {
                step,
                points: run.clone(),
                payload: prev[lo..hi].to_vec(),
            };
            stats.messages_sent += 1;
            stats.bytes_transferred += (hi - lo) as u64;
            self.senders[*receiver]
                .send(msg)
                .map_err(|_| Error::ExecutionFailure(format!("channel to worker {receiver} closed")))?;
        }
        Ok(())
    }

    fn receive_inputs(&self, step: usize, plan: &StepPlan, inputs: &mut [u64]) -> Result<()> {
        let ob = self.spec.output_bytes;
        for _ in 0..plan.expected_messages {
            let msg = loop {
                match self.inbox.recv_timeout(Duration::from_millis(50)) {
                    Ok(m) => break m,
                    Err(RecvTimeoutError::Timeout) if !self.abort.is_raised() => continue,
                    Err(RecvTimeoutError::Timeout) => return Err(aborted()),
                    Err(RecvTimeoutError::Disconnected) => {
                        return Err(Error::ExecutionFailure("inbox disconnected".to_string()))
                    }
                }
            };
            if msg.step != step {
                return Err(Error::ExecutionFailure(format!(
                    "worker {} got a step {} message during step {step}",
                    self.rank, msg.step
                )));
            }
            debug_assert!(msg.points.clone().all(|p| owner_of(self.spec.width, self.cfg.workers, p) != self.rank));
            for (i, p) in msg.points.enumerate() {
                inputs[p] = read_digest(&msg.payload[i * ob..]);
            }
        }
        Ok(())
    }
}

struct StepPlan {
    /// Parents of each point of the strip, in strip order.
    parents: Vec<IntervalSet>,
    sends: Vec<(usize, Range<usize>)>,
    expected_messages: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_cover_width_with_remainder_on_low_ranks() {
        assert_eq!(strip_range(10, 4, 0), 0..3);
        assert_eq!(strip_range(10, 4, 1), 3..6);
        assert_eq!(strip_range(10, 4, 2), 6..8);
        assert_eq!(strip_range(10, 4, 3), 8..10);
        assert_eq!(strip_range(2, 4, 3), 2..2);
        for width in 1..40 {
            for workers in 1..9 {
                let mut next = 0;
                for r in 0..workers {
                    let s = strip_range(width, workers, r);
                    assert_eq!(s.start, next);
                    next = s.end;
                    for p in s {
                        assert_eq!(owner_of(width, workers, p), r);
                    }
                }
                assert_eq!(next, width);
            }
        }
    }
}
