//! Futures with and without a barrier between steps. Without it, tasks of
//! later steps start as soon as their inputs resolve and park on futures
//! that are not ready yet.
//!
//! ```bash
//! cargo run --release --example futures_without_barrier
//! ```

use taskbench::backends::{self, BackendConfig, BackendKind, BarrierMode};
use taskbench::{KernelConfig, Pattern, TaskGraphSpec};

fn main() -> taskbench::Result<()> {
    let spec = TaskGraphSpec {
        kernel: KernelConfig::load_imbalance(1 << 12, 2.0),
        ..TaskGraphSpec::new(32, 24, Pattern::Stencil)
    };
    for mode in [BarrierMode::PerStep, BarrierMode::None] {
        let mut cfg = BackendConfig::new(BackendKind::Futures, 4).with_barrier(mode);
        cfg.trace = true;
        let r = backends::run(&spec, &cfg)?;
        println!(
            "{:<14} wall {:>7.2} ms  touched {:>5}  suspended {:>4}  steps kept apart: {}  checksum {}",
            cfg.label(),
            r.wall_seconds * 1e3,
            r.futures_touched,
            r.suspensions,
            r.respects_step_barriers(),
            r.checksum
        );
    }
    Ok(())
}
