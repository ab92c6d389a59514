use std::sync::{Mutex, MutexGuard};

static TIMING: Mutex<()> = Mutex::new(());

/// Serializes tests that measure wall time so they do not compete for cores.
pub(crate) fn timing_lock() -> MutexGuard<'static, ()> {
    TIMING.lock().unwrap_or_else(|e| e.into_inner())
}
