use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::payload::{read_digest, write_payload};

const NEVER: usize = usize::MAX;

struct Slot {
    data: UnsafeCell<Box<[u8]>>,
    /// Step whose output the slot holds.
    written_step: AtomicUsize,
}

/// Two buffers of `width` task outputs that alternate between the input and
/// output role from one step to the next, plus the block partition that maps
/// each point to its home worker.
///
/// During step `s`, slots of buffer `s % 2` are written (each exactly once)
/// and slots of buffer `(s - 1) % 2` are only read. The per-step barrier
/// separates a buffer's read phase from its next write phase.
pub struct GlobalStore {
    width: usize,
    output_bytes: usize,
    block_size: usize,
    buffers: [Box<[Slot]>; 2],
}

// Safety: a slot's data is written by one worker during a step in which no
// worker reads it (readers look at the other buffer), and the release store
// of `written_step` plus the step barrier order that write before any read.
unsafe impl Sync for GlobalStore {}

impl GlobalStore {
    pub fn new(width: usize, output_bytes: usize, workers: usize) -> Self {
        let buffer = || -> Box<[Slot]> {
            (0..width)
                .map(|_| Slot {
                    data: UnsafeCell::new(vec![0u8; output_bytes].into_boxed_slice()),
                    written_step: AtomicUsize::new(NEVER),
                })
                .collect()
        };
        GlobalStore {
            width,
            output_bytes,
            block_size: width.div_ceil(workers.max(1)).max(1),
            buffers: [buffer(), buffer()],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn output_bytes(&self) -> usize {
        self.output_bytes
    }

    /// Points per home block (`ceil(width / workers)`).
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn home_of(&self, point: usize) -> usize {
        point / self.block_size
    }

    pub fn block_range(&self, block: usize) -> std::ops::Range<usize> {
        let lo = (block * self.block_size).min(self.width);
        lo..(lo + self.block_size).min(self.width)
    }

    /// Writes the output of `(step, point)`. Panics if the slot was already
    /// written during this step.
    pub fn write(&self, step: usize, point: usize, digest: u64) {
        let slot = &self.buffers[step % 2][point];
        let prev = slot.written_step.load(Ordering::Relaxed);
        assert!(
            prev != step,
            "slot {point} written twice in step {step}"
        );
        // Safety: see the `Sync` impl; this worker is the slot's only writer in this step.
        unsafe { write_payload(&mut *slot.data.get(), digest) };
        slot.written_step.store(step, Ordering::Release);
    }

    /// Output bytes of `(step, point)`. Panics if that output is not there.
    pub fn read(&self, step: usize, point: usize) -> &[u8] {
        let slot = &self.buffers[step % 2][point];
        let tag = slot.written_step.load(Ordering::Acquire);
        assert_eq!(tag, step, "slot {point} read for step {step} holds step {tag}");
        // Safety: the slot is not written again until step + 2, which starts
        // after every reader of step + 1 has passed the barrier.
        unsafe { &*slot.data.get() }
    }

    pub fn read_digest(&self, step: usize, point: usize) -> u64 {
        read_digest(self.read(step, point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffers_alternate() {
        let store = GlobalStore::new(6, 16, 4);
        assert_eq!(store.block_size(), 2);
        assert_eq!(store.home_of(5), 2);
        assert_eq!(store.block_range(2), 4..6);
        assert_eq!(store.block_range(3), 6..6);
        store.write(0, 3, 11);
        store.write(1, 3, 22);
        assert_eq!(store.read_digest(0, 3), 11);
        assert_eq!(store.read_digest(1, 3), 22);
        store.write(2, 3, 33);
        assert_eq!(store.read_digest(2, 3), 33);
        assert_eq!(store.read(2, 3).len(), 16);
    }

    #[test]
    #[should_panic(expected = "written twice")]
    fn double_write_panics() {
        let store = GlobalStore::new(2, 8, 1);
        store.write(4, 1, 1);
        store.write(4, 1, 2);
    }

    #[test]
    #[should_panic(expected = "holds step")]
    fn stale_read_panics() {
        let store = GlobalStore::new(2, 8, 1);
        store.write(0, 0, 1);
        store.read(2, 0);
    }
}
