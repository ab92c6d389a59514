//! Weak scaling at 16 tasks per worker, written as JSON, CSV and `.dat`.
//!
//! ```bash
//! cargo run --release --example weak_scaling -- [output-dir]
//! ```

use std::path::PathBuf;

use taskbench::kernel::calibrate;
use taskbench::metrics::{run_experiment, BackendRunner, ExperimentPlan};
use taskbench::report::{self, ReportPaths};
use taskbench::KernelConfig;

fn main() -> taskbench::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let cal = calibrate(&KernelConfig::default(), 0.3)?;
    let plan = ExperimentPlan {
        steps: 8,
        base_iterations: 1 << 14,
        reps: 3,
        ..ExperimentPlan::weak_scaling(vec![1, 2, 4])
    };
    let table = run_experiment(&plan, &mut BackendRunner, &cal);
    let records = report::records(&table);
    print!("{}", report::dat_string(&records, table.x_label));

    let paths = ReportPaths {
        json: Some(out.join("weak_scaling.json")),
        csv: Some(out.join("weak_scaling.csv")),
        dat: Some(out.join("weak_scaling.dat")),
        x_label: table.x_label.to_string(),
    };
    report::emit_reports(&records, &paths)?;
    println!("wrote {}", out.join("weak_scaling.{json,csv,dat}").display());
    Ok(())
}
