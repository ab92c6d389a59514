//! Runs one graph on every backend and prints checksums and counters.
//!
//! ```bash
//! cargo run --release --example compare_backends -- [workers]
//! ```

use taskbench::backends::{self, BackendConfig, BackendKind, BarrierMode};
use taskbench::payload::sequential_execute;
use taskbench::{KernelConfig, Pattern, TaskGraphSpec};

fn main() -> taskbench::Result<()> {
    let workers: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let spec = TaskGraphSpec {
        kernel: KernelConfig::compute_bound(1 << 12),
        output_bytes: 64,
        ..TaskGraphSpec::new(16 * workers, 16, Pattern::AllToAll)
    };
    let (expected, _) = sequential_execute(&spec)?;
    println!("sequential checksum {expected}");

    let configs = [
        BackendConfig::new(BackendKind::Bsp, workers),
        BackendConfig::new(BackendKind::WorkSteal, workers),
        BackendConfig::new(BackendKind::Futures, workers),
        BackendConfig::new(BackendKind::Futures, workers).with_barrier(BarrierMode::None),
    ];
    println!(
        "{:<14} {:>10} {:>9} {:>9} {:>9} {:>9} {:>11}  checksum",
        "backend", "wall_ms", "messages", "fetches", "steals", "touched", "suspended"
    );
    for cfg in configs {
        let r = backends::run(&spec, &cfg)?;
        println!(
            "{:<14} {:>10.2} {:>9} {:>9} {:>9} {:>9} {:>11}  {}{}",
            cfg.label(),
            r.wall_seconds * 1e3,
            r.messages_sent,
            r.fetch_ops,
            r.steal_attempts - r.steal_failures,
            r.futures_touched,
            r.suspensions,
            r.checksum,
            if r.checksum == expected { "" } else { "  MISMATCH" }
        );
    }
    Ok(())
}
