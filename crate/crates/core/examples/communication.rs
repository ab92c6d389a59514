//! Communication presets: point-to-point messages against whole-block fetches.
//!
//! ```bash
//! cargo run --release --example communication
//! ```

use taskbench::backends::{self, BackendConfig, BackendKind};
use taskbench::metrics::{CommPreset, ExperimentPlan};

fn main() -> taskbench::Result<()> {
    for preset in [CommPreset::Spread40, CommPreset::Spread80, CommPreset::AllToAll] {
        let plan = ExperimentPlan {
            steps: 4,
            base_iterations: 1 << 8,
            ..ExperimentPlan::comm_pattern(preset, vec![4])
        };
        let spec = &plan.cells()[0].spec;
        println!(
            "{} width={} deps/task={} output={} B",
            preset.as_str(),
            spec.width,
            spec.dependencies(taskbench::TaskCoord::new(1, 0))?.len(),
            spec.output_bytes
        );
        for aggregate in [false, true] {
            let mut cfg = BackendConfig::new(BackendKind::Bsp, 4);
            cfg.bsp_aggregate_runs = aggregate;
            let r = backends::run(spec, &cfg)?;
            let label = if aggregate { "bsp (runs)" } else { "bsp" };
            println!("  {label:<11} messages={:<6} bytes={}", r.messages_sent, r.bytes_transferred);
        }
        let r = backends::run(spec, &BackendConfig::new(BackendKind::WorkSteal, 4))?;
        println!("  {:<11} fetches={:<7} bytes={}", "ws", r.fetch_ops, r.bytes_transferred);
    }
    Ok(())
}
