//! Finds the minimum effective task granularity of each backend, then the
//! same search against a closed-form model with a known overhead.
//!
//! ```bash
//! cargo run --release --example metg_sweep -- [workers]
//! ```

use taskbench::kernel::calibrate;
use taskbench::metrics::{metg, AnalyticRunner, BackendRunner, GranularitySweep, MetgSearch};
use taskbench::{BackendConfig, BackendKind, Calibration, KernelConfig, Pattern, TaskGraphSpec};

fn main() -> taskbench::Result<()> {
    let workers: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or_else(default_workers);
    let cal = calibrate(&KernelConfig::default(), 0.3)?;
    let spec = TaskGraphSpec::new(8 * workers, 8, Pattern::Stencil);
    let search = MetgSearch {
        sweep: GranularitySweep::powers_of_two(16, 4),
        reps: 2,
        ..Default::default()
    };

    for backend in BackendKind::ALL {
        let r = metg(&mut BackendRunner, &spec, &BackendConfig::new(backend, workers), &cal, &search)?;
        let curve: Vec<String> = r
            .curve
            .iter()
            .map(|p| format!("{:.0}%", p.efficiency * 100.0))
            .collect();
        match r.metg_seconds {
            Some(s) => println!("{backend:<4} METG {:>8.2} us   {}", s * 1e6, curve.join(" ")),
            None => println!("{backend:<4} METG not reached   {}", curve.join(" ")),
        }
    }

    // a model whose per-task overhead is exactly 5 us
    let mut model = AnalyticRunner {
        seconds_per_iteration: 1e-8,
        overhead_seconds: 5e-6,
    };
    let search = MetgSearch {
        reps: 1,
        ..Default::default()
    };
    let r = metg(&mut model, &spec, &BackendConfig::new(BackendKind::WorkSteal, workers), &Calibration::fixed(1e-8), &search)?;
    println!("model with 5 us overhead: METG {:.2} us", r.metg_seconds.unwrap_or(f64::NAN) * 1e6);
    Ok(())
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
