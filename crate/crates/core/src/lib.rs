//! Synthetic task-graph benchmarking.
//!
//! A [`TaskGraphSpec`] describes a grid of `width` tasks per time step over
//! `steps` time steps, with dependencies only between consecutive steps
//! (stencil, spread or all-to-all). Every task runs a calibrated compute
//! kernel and produces a fixed-size output whose digest folds in the digests
//! of its parents, so the XOR of the final step's digests is a checksum that
//! every correct executor must reproduce.
//!
//! Three in-process runtime models execute the same graph:
//!
//! - [`backends::run_bsp`]: static strip partitioning, pairwise message
//!   exchange and a barrier per step.
//! - [`backends::run_worksteal`]: random work stealing over per-worker deques,
//!   with task outputs in a double-buffered global store read through a
//!   per-worker block cache.
//! - [`backends::run_futures`]: task outputs published through single-assignment
//!   futures, with or without a barrier between steps.
//!
//! [`metrics`] turns execution reports into application efficiency, searches
//! for the minimum effective task granularity (METG) and drives the standard
//! experiment plans. [`report`] and [`cli`] serialize results as JSON, CSV
//! and whitespace-separated `.dat` tables.

pub mod backends;
pub mod cli;
mod error;
pub mod graph;
pub mod kernel;
pub mod metrics;
pub mod payload;
pub mod report;
#[cfg(test)]
mod test_support;

pub use backends::{BackendConfig, BackendKind, BarrierMode, ExecutionReport};
pub use error::{Error, Result};
pub use graph::{IntervalSet, Pattern, TaskCoord, TaskGraphSpec};
pub use kernel::{Calibration, KernelConfig, KernelKind};
pub use payload::{GraphChecksum, TaskOutput};
