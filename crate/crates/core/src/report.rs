//! Run records and their JSON, CSV and `.dat` forms.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::BackendConfig;
use crate::graph::{Pattern, TaskGraphSpec};
use crate::kernel::KernelKind;
use crate::metrics::{Cell, CellOutcome, Measurement, ResultTable};
use crate::{Error, Result};

/// Tag written into every record.
pub const SCHEMA: &str = "taskbench.run/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One (configuration x backend) measurement, flattened for tabular output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema: String,
    /// Curve this record belongs to in a multi-curve plot; may be empty.
    pub series: String,
    /// Plot x value (task size, worker count or imbalance factor).
    pub x: f64,
    pub width: usize,
    pub steps: usize,
    pub pattern: Pattern,
    pub spread_radix: usize,
    pub kernel: KernelKind,
    pub base_iterations: u64,
    pub imbalance_factor: f64,
    pub output_bytes: usize,
    pub seed: u64,
    pub backend: String,
    pub workers: usize,
    pub reps: usize,
    pub status: RunStatus,
    pub error: Option<String>,
    pub mean_wall_seconds: Option<f64>,
    pub stddev: Option<f64>,
    pub efficiency: Option<f64>,
    pub tasks_executed: u64,
    pub checksum: String,
    pub steal_attempts: u64,
    pub steal_failures: u64,
    pub messages_sent: u64,
    pub fetch_ops: u64,
    pub bytes_transferred: u64,
    pub futures_touched: u64,
    pub suspensions: u64,
    /// max/min per-worker busy time; absent when a worker stayed idle.
    pub busy_imbalance: Option<f64>,
    pub timestamp: String,
    pub tool_version: String,
    pub host: String,
}

impl RunRecord {
    fn base(series: &str, x: f64, spec: &TaskGraphSpec, cfg: &BackendConfig) -> Self {
        RunRecord {
            schema: SCHEMA.to_string(),
            series: series.to_string(),
            x,
            width: spec.width,
            steps: spec.steps,
            pattern: spec.pattern,
            spread_radix: spec.spread_radix,
            kernel: spec.kernel.kind,
            base_iterations: spec.kernel.base_iterations,
            imbalance_factor: spec.kernel.imbalance_factor,
            output_bytes: spec.output_bytes,
            seed: spec.seed,
            backend: cfg.label(),
            workers: cfg.workers,
            reps: 0,
            status: RunStatus::Failed,
            error: None,
            mean_wall_seconds: None,
            stddev: None,
            efficiency: None,
            tasks_executed: 0,
            checksum: String::new(),
            steal_attempts: 0,
            steal_failures: 0,
            messages_sent: 0,
            fetch_ops: 0,
            bytes_transferred: 0,
            futures_touched: 0,
            suspensions: 0,
            busy_imbalance: None,
            timestamp: chrono::Local::now().to_rfc3339(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            host: host_description(),
        }
    }

    pub fn measured(
        series: &str,
        x: f64,
        spec: &TaskGraphSpec,
        cfg: &BackendConfig,
        m: &Measurement,
        efficiency: Option<f64>,
    ) -> Self {
        let r = &m.last;
        let imbalance = r.busy_imbalance();
        RunRecord {
            reps: m.reps,
            status: RunStatus::Ok,
            mean_wall_seconds: Some(m.mean_wall_seconds),
            stddev: Some(m.stddev),
            efficiency,
            tasks_executed: r.tasks_executed,
            checksum: r.checksum.to_string(),
            steal_attempts: r.steal_attempts,
            steal_failures: r.steal_failures,
            messages_sent: r.messages_sent,
            fetch_ops: r.fetch_ops,
            bytes_transferred: r.bytes_transferred,
            futures_touched: r.futures_touched,
            suspensions: r.suspensions,
            busy_imbalance: imbalance.is_finite().then_some(imbalance),
            ..RunRecord::base(series, x, spec, cfg)
        }
    }

    pub fn failed(series: &str, x: f64, spec: &TaskGraphSpec, cfg: &BackendConfig, error: &str) -> Self {
        RunRecord {
            error: Some(error.to_string()),
            ..RunRecord::base(series, x, spec, cfg)
        }
    }

    pub fn from_cell(cell: &Cell) -> Self {
        let c = &cell.config;
        match &cell.outcome {
            CellOutcome::Done {
                measurement,
                efficiency,
            } => RunRecord::measured(&c.series, c.x, &c.spec, &c.backend, measurement, Some(*efficiency)),
            CellOutcome::Failed(e) => RunRecord::failed(&c.series, c.x, &c.spec, &c.backend, e),
        }
    }
}

pub fn records(table: &ResultTable) -> Vec<RunRecord> {
    table.cells.iter().map(RunRecord::from_cell).collect()
}

/// OS, architecture and logical CPU count of this machine.
pub fn host_description() -> String {
    let cpus = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{}-{}, {cpus} logical cpus", std::env::consts::OS, std::env::consts::ARCH)
}

/// Where to write each format; `None` skips it.
#[derive(Debug, Clone, Default)]
pub struct ReportPaths {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub dat: Option<PathBuf>,
    /// Header of the `.dat` x column.
    pub x_label: String,
}

pub fn emit_reports(records: &[RunRecord], paths: &ReportPaths) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to emit"));
    }
    if let Some(p) = &paths.json {
        write_json(p, records)?;
    }
    if let Some(p) = &paths.csv {
        write_csv(p, records)?;
    }
    if let Some(p) = &paths.dat {
        write_dat(p, records, &paths.x_label)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn to_json(records: &[RunRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize")
}

pub fn write_json(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(to_json(records).as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<RunRecord> = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if let Some(r) = records.iter().find(|r| r.schema != SCHEMA) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("unexpected schema `{}`", r.schema),
        });
    }
    Ok(records)
}

pub fn write_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let fail = |e: csv::Error| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    for r in records {
        w.serialize(r).map_err(fail)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Gnuplot-style table: one block per series, one row per x value, one
/// efficiency column per backend. Missing cells are `NaN`.
pub fn dat_string(records: &[RunRecord], x_label: &str) -> String {
    let mut series: Vec<&str> = Vec::new();
    let mut backends: Vec<&str> = Vec::new();
    for r in records {
        if !series.contains(&r.series.as_str()) {
            series.push(&r.series);
        }
        if !backends.contains(&r.backend.as_str()) {
            backends.push(&r.backend);
        }
    }
    let x_label = if x_label.is_empty() { "x" } else { x_label };
    let mut out = String::new();
    let _ = writeln!(out, "# efficiency by backend");
    let _ = writeln!(out, "# {x_label} {}", backends.join(" "));
    for (i, s) in series.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        if !s.is_empty() {
            let _ = writeln!(out, "# {s}");
        }
        let rows: Vec<&RunRecord> = records.iter().filter(|r| r.series == *s).collect();
        let mut xs: Vec<f64> = Vec::new();
        for r in &rows {
            if !xs.contains(&r.x) {
                xs.push(r.x);
            }
        }
        for x in xs {
            let _ = write!(out, "{x}");
            for b in &backends {
                let e = rows
                    .iter()
                    .find(|r| r.x == x && r.backend == *b)
                    .and_then(|r| r.efficiency)
                    .unwrap_or(f64::NAN);
                let _ = write!(out, " {e}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_dat(path: &Path, records: &[RunRecord], x_label: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(dat_string(records, x_label).as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendKind, ExecutionReport};
    use crate::kernel::KernelConfig;

    fn record(x: f64, backend: BackendKind, efficiency: f64) -> RunRecord {
        let spec = TaskGraphSpec {
            kernel: KernelConfig::compute_bound(x as u64),
            ..TaskGraphSpec::new(16, 4, Pattern::Stencil)
        };
        let m = Measurement {
            mean_wall_seconds: 0.1 + 1.0 / 3.0,
            stddev: 1e-3 / 7.0,
            reps: 5,
            last: ExecutionReport {
                wall_seconds: 0.3,
                tasks_executed: 64,
                per_worker_busy_seconds: vec![0.1, 0.2],
                ..Default::default()
            },
        };
        RunRecord::measured("", x, &spec, &BackendConfig::new(backend, 2), &m, Some(efficiency))
    }

    #[test]
    fn one_record_csv_has_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut r = record(64.0, BackendKind::Bsp, 0.5);
        r.host = "a \"quoted\", host".to_string();
        write_csv(&path, &[r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(reader.records().count(), 1);
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"a \"\"quoted\"\", host\""));
    }

    #[test]
    fn json_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let mut a = record(64.0, BackendKind::Bsp, 0.1 + 0.2);
        a.imbalance_factor = 1.0 / 3.0;
        let b = RunRecord::failed("s", 2.0, &TaskGraphSpec::default(), &BackendConfig::new(BackendKind::Futures, 1), "boom");
        write_json(&path, &[a.clone(), b.clone()]).unwrap();
        let back = read_json(&path).unwrap();
        assert_eq!(back, vec![a.clone(), b]);
        assert_eq!(back[0].efficiency.unwrap().to_bits(), a.efficiency.unwrap().to_bits());
        assert_eq!(back[0].busy_imbalance, Some(2.0));
    }

    #[test]
    fn dat_has_one_column_per_backend() {
        let mut rs = Vec::new();
        for x in [1024.0, 256.0, 64.0] {
            rs.push(record(x, BackendKind::Bsp, 0.9));
            rs.push(record(x, BackendKind::WorkSteal, 0.8));
        }
        let text = dat_string(&rs, "iterations");
        let rows: Vec<Vec<&str>> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .map(|l| l.split_whitespace().collect())
            .collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.len() == 3));
        assert_eq!(rows[2], vec!["64", "0.9", "0.8"]);
        assert!(text.contains("# iterations bsp ws"));
    }

    #[test]
    fn io_errors_name_the_path() {
        let path = Path::new("/nonexistent-dir/x.json");
        let err = write_json(path, &[record(1.0, BackendKind::Bsp, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.json"));
        assert!(emit_reports(&[], &ReportPaths::default()).is_err());
    }
}
