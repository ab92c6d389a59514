//! Load-imbalanced tasks: static strips against work stealing and futures.
//!
//! ```bash
//! cargo run --release --example load_imbalance -- [workers]
//! ```

use taskbench::backends::{self, BackendConfig, BackendKind};
use taskbench::kernel::calibrate;
use taskbench::metrics::application_efficiency;
use taskbench::{KernelConfig, Pattern, TaskGraphSpec};

fn main() -> taskbench::Result<()> {
    let workers: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or_else(default_workers);
    let cal = calibrate(&KernelConfig::default(), 0.3)?;
    println!("{:>6} {:<5} {:>10} {:>14}", "factor", "", "efficiency", "busy max/min");
    for factor in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let spec = TaskGraphSpec {
            kernel: KernelConfig::load_imbalance(1 << 16, factor),
            ..TaskGraphSpec::new(16 * workers, 8, Pattern::Stencil)
        };
        for backend in BackendKind::ALL {
            let r = backends::run(&spec, &BackendConfig::new(backend, workers))?;
            let e = application_efficiency(&r, &spec, &cal, workers)?;
            println!("{factor:>6} {backend:<5} {:>9.1}% {:>14.3}", e * 100.0, r.busy_imbalance());
        }
    }
    Ok(())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
