use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use super::{aborted, AbortFlag};
use crate::Result;

const SPINS_BEFORE_YIELD: u32 = 64;

/// Centralized sense-reversing barrier.
pub(crate) struct SenseBarrier<'a> {
    parties: usize,
    arrived: AtomicUsize,
    sense: AtomicBool,
    abort: &'a AbortFlag,
}

/// Per-worker view of a [`SenseBarrier`]; carries the worker's local sense.
pub(crate) struct BarrierHandle<'b, 'a> {
    barrier: &'b SenseBarrier<'a>,
    local_sense: bool,
}

impl<'a> SenseBarrier<'a> {
    pub fn new(parties: usize, abort: &'a AbortFlag) -> Self {
        SenseBarrier {
            parties,
            arrived: AtomicUsize::new(0),
            sense: AtomicBool::new(false),
            abort,
        }
    }

    pub fn handle(&self) -> BarrierHandle<'_, 'a> {
        BarrierHandle {
            barrier: self,
            local_sense: false,
        }
    }
}

impl BarrierHandle<'_, '_> {
    /// Blocks until every party has arrived. Fails if the run is aborted.
    pub fn wait(&mut self) -> Result<()> {
        let b = self.barrier;
        self.local_sense = !self.local_sense;
        if b.arrived.fetch_add(1, Ordering::AcqRel) + 1 == b.parties {
            b.arrived.store(0, Ordering::Relaxed);
            b.sense.store(self.local_sense, Ordering::Release);
            return Ok(());
        }
        let mut spins = 0u32;
        while b.sense.load(Ordering::Acquire) != self.local_sense {
            if b.abort.is_raised() {
                return Err(aborted());
            }
            if spins < SPINS_BEFORE_YIELD {
                spins += 1;
                std::hint::spin_loop();
            } else {
                std::thread::yield_now();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicU64;

    #[test]
    fn no_one_passes_early() {
        let abort = AbortFlag::default();
        let barrier = SenseBarrier::new(4, &abort);
        let counter = AtomicU64::new(0);
        std::thread::scope(|s| {
            for _ in 0..4 {
                s.spawn(|| {
                    let mut h = barrier.handle();
                    for round in 1..=50u64 {
                        counter.fetch_add(1, Ordering::SeqCst);
                        h.wait().unwrap();
                        assert!(counter.load(Ordering::SeqCst) >= 4 * round);
                        h.wait().unwrap();
                    }
                });
            }
        });
        assert_eq!(counter.load(Ordering::SeqCst), 200);
    }

    #[test]
    fn abort_releases_waiters() {
        let abort = AbortFlag::default();
        let barrier = SenseBarrier::new(2, &abort);
        std::thread::scope(|s| {
            let waiter = s.spawn(|| barrier.handle().wait());
            std::thread::sleep(std::time::Duration::from_millis(10));
            abort.raise();
            assert!(waiter.join().unwrap().is_err());
        });
    }
}
