//! Calibrates the compute kernel and shows that its cost is linear in the
//! iteration count.
//!
//! ```bash
//! cargo run --release --example calibrate_kernel
//! ```

use std::time::Instant;

use taskbench::kernel::{calibrate, execute_kernel, Scratch};
use taskbench::{KernelConfig, TaskCoord};

fn main() -> taskbench::Result<()> {
    let cal = calibrate(&KernelConfig::default(), 0.5)?;
    println!("{:.3} ns per iteration ({})", cal.seconds_per_iteration * 1e9, cal.measured_at);

    let mut scratch = Scratch::for_task(TaskCoord::new(0, 0), 0);
    println!("{:>10} {:>12} {:>12}", "iterations", "measured_us", "predicted_us");
    for e in (8..=20).step_by(2) {
        let iterations = 1u64 << e;
        let start = Instant::now();
        std::hint::black_box(execute_kernel(iterations, &mut scratch));
        let t = start.elapsed().as_secs_f64();
        println!(
            "{iterations:>10} {:>12.2} {:>12.2}",
            t * 1e6,
            iterations as f64 * cal.seconds_per_iteration * 1e6
        );
    }
    Ok(())
}
