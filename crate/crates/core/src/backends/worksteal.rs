//! Random work stealing over a double-buffered global store.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::Instant;

use super::barrier::SenseBarrier;
use super::sched::{deques, LocalQueue};
use super::store::GlobalStore;
use super::{aborted, check_inputs, merge_stats, run_workers, AbortFlag, BackendConfig, BackendKind, ExecutionReport, WorkerStats};
use crate::graph::{IntervalSet, TaskCoord, TaskGraphSpec};
use crate::kernel::Scratch;
use crate::payload::{read_digest, run_task};
use crate::Result;

/// Per-worker copy of remote home blocks of the previous step's buffer.
///
/// A block is fetched whole on first touch within a step (one fetch
/// operation, whole-block bytes) and dropped when the step ends.
pub(crate) struct BlockCache {
    home: usize,
    block_size: usize,
    output_bytes: usize,
    /// `(step, bytes)` per block; the copy is valid only for that step.
    blocks: Vec<Option<(usize, Vec<u8>)>>,
    pub fetch_ops: u64,
    pub bytes_transferred: u64,
}

impl BlockCache {
    pub fn new(store: &GlobalStore, home: usize) -> Self {
        let block_count = store.width().div_ceil(store.block_size());
        BlockCache {
            home,
            block_size: store.block_size(),
            output_bytes: store.output_bytes(),
            blocks: vec![None; block_count],
            fetch_ops: 0,
            bytes_transferred: 0,
        }
    }

    /// XOR of the digests at `points` of `step`'s outputs.
    pub fn read_xor(&mut self, store: &GlobalStore, step: usize, points: &IntervalSet) -> u64 {
        let mut acc = 0;
        let ob = self.output_bytes;
        for range in points.intervals() {
            let mut p = range.start;
            while p < range.end {
                let block = p / self.block_size;
                let block_range = store.block_range(block);
                let hi = range.end.min(block_range.end);
                if block == self.home {
                    for q in p..hi {
                        acc ^= store.read_digest(step, q);
                    }
                } else {
                    let data = self.fetch(store, step, block);
                    for q in p..hi {
                        acc ^= read_digest(&data[(q - block_range.start) * ob..]);
                    }
                }
                p = hi;
            }
        }
        acc
    }

    fn fetch(&mut self, store: &GlobalStore, step: usize, block: usize) -> &[u8] {
        let cached = matches!(&self.blocks[block], Some((s, _)) if *s == step);
        if !cached {
            let range = store.block_range(block);
            let mut data = match self.blocks[block].take() {
                Some((_, mut buf)) => {
                    buf.clear();
                    buf
                }
                None => Vec::with_capacity(range.len() * self.output_bytes),
            };
            for q in range.clone() {
                data.extend_from_slice(store.read(step, q));
            }
            self.fetch_ops += 1;
            self.bytes_transferred += data.len() as u64;
            self.blocks[block] = Some((step, data));
        }
        match &self.blocks[block] {
            Some((_, data)) => data,
            None => unreachable!(),
        }
    }

    /// Drops every cached block (checkin at the step barrier).
    pub fn invalidate(&mut self) {
        for (s, _) in self.blocks.iter_mut().flatten() {
            *s = usize::MAX;
        }
    }
}

/// Executes `spec` by random work stealing.
///
/// For every step, worker 0 acts as the root and pushes one task per point
/// onto its own deque; idle workers steal. Tasks read their inputs from the
/// previous step's buffer through a [`BlockCache`] and write their output to
/// the current step's buffer. A barrier ends each step, invalidates caches
/// and flips the buffers' roles.
pub fn run_worksteal(spec: &TaskGraphSpec, cfg: &BackendConfig) -> Result<ExecutionReport> {
    let spec = check_inputs(spec, cfg, BackendKind::WorkSteal)?;
    let workers = cfg.workers;
    let abort = AbortFlag::default();
    let barrier = SenseBarrier::new(workers, &abort);
    let store = GlobalStore::new(spec.width, spec.output_bytes, workers);
    let remaining: Vec<AtomicUsize> = (0..spec.steps).map(|_| AtomicUsize::new(spec.width)).collect();
    let checksum = AtomicU64::new(0);
    let (locals, stealers) = deques::<usize>(workers);
    let locals: Vec<_> = locals.into_iter().map(|w| std::sync::Mutex::new(Some(w))).collect();

    let stats = run_workers(workers, &abort, |id| {
        let deque = locals[id].lock().expect("deque lock").take().expect("deque taken once");
        let mut queue = LocalQueue::new(id, deque, &stealers, cfg.steal_retry_limit, cfg.rng_seed);
        let mut cache = BlockCache::new(&store, id);
        let mut scratch = Scratch::for_task(TaskCoord::new(0, 0), spec.seed);
        let mut barrier = barrier.handle();
        let mut stats = WorkerStats::default();

        barrier.wait()?;
        stats.start = Some(Instant::now());
        for step in 0..spec.steps {
            if id == 0 {
                // reversed so the root itself starts at point 0 and thieves take the far end
                for point in (0..spec.width).rev() {
                    queue.push(point);
                }
            }
            loop {
                if let Some(point) = queue.next() {
                    let task = TaskCoord::new(step, point);
                    let start = Instant::now();
                    let inputs_xor = if step == 0 {
                        0
                    } else {
                        cache.read_xor(&store, step - 1, &spec.parents_unchecked(step, point))
                    };
                    let digest = run_task(&spec, task, inputs_xor, &mut scratch);
                    store.write(step, point, digest);
                    if step + 1 == spec.steps {
                        checksum.fetch_xor(digest, Ordering::AcqRel);
                    }
                    stats.record(cfg.trace, task, start, Instant::now());
                    remaining[step].fetch_sub(1, Ordering::AcqRel);
                    continue;
                }
                if remaining[step].load(Ordering::Acquire) == 0 {
                    break;
                }
                if abort.is_raised() {
                    return Err(aborted());
                }
                std::thread::yield_now();
            }
            cache.invalidate();
            barrier.wait()?;
        }
        stats.end = Some(Instant::now());
        stats.steal_attempts = queue.steal_attempts;
        stats.steal_failures = queue.steal_failures;
        stats.fetch_ops = cache.fetch_ops;
        stats.bytes_transferred = cache.bytes_transferred;
        Ok(stats)
    })?;
    Ok(merge_stats(stats, checksum.load(Ordering::Acquire)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_fetches_each_remote_block_once_per_step() {
        let store = GlobalStore::new(16, 16, 4);
        for p in 0..16 {
            store.write(0, p, p as u64 + 1);
        }
        let mut cache = BlockCache::new(&store, 1);
        let all = IntervalSet::from_range(0..16);
        let expected = (1..=16u64).fold(0, |a, d| a ^ d);
        assert_eq!(cache.read_xor(&store, 0, &all), expected);
        assert_eq!(cache.read_xor(&store, 0, &all), expected);
        assert_eq!(cache.fetch_ops, 3);
        assert_eq!(cache.bytes_transferred, 3 * 4 * 16);

        // home-only reads never fetch
        let mut home = BlockCache::new(&store, 0);
        assert_eq!(home.read_xor(&store, 0, &IntervalSet::from_range(0..4)), 1 ^ 2 ^ 3 ^ 4);
        assert_eq!(home.fetch_ops, 0);

        cache.invalidate();
        cache.read_xor(&store, 0, &IntervalSet::from_points([5, 15]));
        assert_eq!(cache.fetch_ops, 4);
    }
}
