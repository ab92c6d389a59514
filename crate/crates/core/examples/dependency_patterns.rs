//! Prints the dependency structure of each graph pattern and checks the
//! reverse relation against it.
//!
//! ```bash
//! cargo run --release --example dependency_patterns
//! ```

use taskbench::graph::{Pattern, TaskCoord, TaskGraphSpec};
use taskbench::payload::sequential_execute;

fn main() -> taskbench::Result<()> {
    for pattern in Pattern::ALL {
        let spec = TaskGraphSpec {
            spread_radix: 3,
            ..TaskGraphSpec::new(8, 4, pattern)
        }
        .validate()?;
        println!("{pattern} (width {}, steps {})", spec.width, spec.steps);
        for step in 1..3 {
            let row: Vec<String> = (0..spec.width)
                .map(|p| spec.dependencies(TaskCoord::new(step, p)).map(|d| d.to_string()))
                .collect::<taskbench::Result<_>>()?;
            println!("  step {step}: {}", row.join(" "));
        }
        let fan_out: Vec<usize> = (0..spec.width)
            .map(|p| spec.reverse_dependencies(TaskCoord::new(0, p)).map(|s| s.len()))
            .collect::<taskbench::Result<_>>()?;
        println!("  consumers of step 0: {fan_out:?}");
        let (checksum, _) = sequential_execute(&spec)?;
        println!("  checksum {checksum}");
    }
    Ok(())
}
