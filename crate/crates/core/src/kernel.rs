//! The per-task workload and its calibration.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::graph::TaskCoord;
use crate::payload::mix64;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    ComputeBound,
    LoadImbalance,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::ComputeBound => "compute_bound",
            KernelKind::LoadImbalance => "load_imbalance",
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "compute_bound" => Ok(KernelKind::ComputeBound),
            "load_imbalance" => Ok(KernelKind::LoadImbalance),
            other => Err(format!(
                "unknown kernel `{other}` (expected compute_bound or load_imbalance)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    /// Loop iterations per task (the task size).
    pub base_iterations: u64,
    /// Width of the uniform spread around `base_iterations`, in `[0, 2]`.
    /// Ignored by [`KernelKind::ComputeBound`].
    pub imbalance_factor: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::compute_bound(1 << 20)
    }
}

impl KernelConfig {
    pub fn compute_bound(base_iterations: u64) -> Self {
        KernelConfig {
            kind: KernelKind::ComputeBound,
            base_iterations,
            imbalance_factor: 0.0,
        }
    }

    pub fn load_imbalance(base_iterations: u64, imbalance_factor: f64) -> Self {
        KernelConfig {
            kind: KernelKind::LoadImbalance,
            base_iterations,
            imbalance_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_iterations == 0 {
            return Err(Error::InvalidSpec("base_iterations"));
        }
        if !(0.0..=2.0).contains(&self.imbalance_factor) {
            return Err(Error::InvalidSpec("imbalance_factor"));
        }
        Ok(())
    }

    /// Iteration count for one task.
    ///
    /// Load-imbalanced tasks draw `u` in `[0, 1)` from a counter-based generator
    /// keyed on `(seed, step, point)` and run
    /// `round(base * (1 + factor * (u - 0.5)))` iterations, at least one.
    /// The draw does not depend on execution order, so every backend sees the
    /// same per-task work.
    pub fn task_iterations(&self, task: TaskCoord, seed: u64) -> u64 {
        match self.kind {
            KernelKind::ComputeBound => self.base_iterations,
            KernelKind::LoadImbalance => {
                let u = unit_draw(seed, task);
                let scaled = self.base_iterations as f64 * (1.0 + self.imbalance_factor * (u - 0.5));
                (scaled.round() as u64).max(1)
            }
        }
    }
}

/// Uniform draw in `[0, 1)` from 53 bits of a hash of `(seed, step, point)`.
fn unit_draw(seed: u64, task: TaskCoord) -> f64 {
    let h = mix64(mix64(mix64(seed ^ 0x6a09_e667_f3bc_c909) ^ task.step as u64) ^ task.point as u64);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub const SCRATCH_LEN: usize = 64;
const LANES: usize = 16;

/// Floating-point state the kernel loop updates. Owned by one worker at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scratch {
    values: [f64; SCRATCH_LEN],
}

impl Scratch {
    /// Deterministic initial state for `task`, so the kernel digest does not
    /// depend on which worker runs it.
    pub fn for_task(task: TaskCoord, seed: u64) -> Self {
        let mut s = Scratch {
            values: [0.0; SCRATCH_LEN],
        };
        s.reset(task, seed);
        s
    }

    pub fn reset(&mut self, task: TaskCoord, seed: u64) {
        let mut h = mix64(seed ^ ((task.step as u64) << 32) ^ task.point as u64);
        for v in self.values.iter_mut() {
            h = mix64(h);
            // [0.5, 1.5)
            *v = 0.5 + (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        }
    }

    pub fn values(&self) -> &[f64; SCRATCH_LEN] {
        &self.values
    }
}

/// Runs `iterations` rounds of the compute loop over `scratch` and returns a
/// digest of the final state.
///
/// Each round advances 16 independent lanes; every lane is a chain of four
/// dependent multiply-adds across the buffer.
pub fn execute_kernel(iterations: u64, scratch: &mut Scratch) -> u64 {
    let s = &mut scratch.values;
    for _ in 0..iterations {
        let mut carry = [0.0f64; LANES];
        carry.copy_from_slice(&s[SCRATCH_LEN - LANES..]);
        for chunk in s.chunks_exact_mut(LANES) {
            for (x, c) in chunk.iter_mut().zip(carry.iter_mut()) {
                *x = *x * 0.625 + *c * 0.375 + 0.031_25;
                *c = *x;
            }
        }
    }
    s.iter().fold(0x243f_6a88_85a3_08d3, |h, v| mix64(h ^ v.to_bits()))
}

/// Measured cost of one kernel iteration on one core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub seconds_per_iteration: f64,
    pub measured_at: String,
}

impl Calibration {
    /// A calibration with a known cost, for analytic models and tests.
    pub fn fixed(seconds_per_iteration: f64) -> Self {
        Calibration {
            seconds_per_iteration,
            measured_at: "fixed".to_string(),
        }
    }
}

/// Time source for calibration.
pub trait Clock {
    fn now(&self) -> Duration;
    /// Smallest distinguishable interval.
    fn tick(&self) -> Duration;
}

#[derive(Debug, Clone)]
pub struct MonotonicClock {
    origin: Instant,
    tick: Duration,
}

impl MonotonicClock {
    pub fn new() -> Self {
        let origin = Instant::now();
        // smallest non-zero step observed between consecutive reads
        let mut tick = Duration::MAX;
        for _ in 0..64 {
            let a = Instant::now();
            let mut b = Instant::now();
            while b == a {
                b = Instant::now();
            }
            tick = tick.min(b - a);
        }
        MonotonicClock {
            origin,
            tick: tick.max(Duration::from_nanos(1)),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn tick(&self) -> Duration {
        self.tick
    }
}

const MIN_TICKS: u64 = 100;
const MAX_CALIBRATION_ITERATIONS: u64 = 1 << 40;
const MIN_SAMPLES: usize = 5;

/// Measures `seconds_per_iteration` for the kernel on the calling thread.
pub fn calibrate(cfg: &KernelConfig, budget_seconds: f64) -> Result<Calibration> {
    let clock = MonotonicClock::new();
    let mut scratch = Scratch::for_task(TaskCoord::new(0, 0), 0);
    let mut cal = calibrate_with(&clock, budget_seconds, |iterations| {
        std::hint::black_box(execute_kernel(iterations, &mut scratch));
    })?;
    cal.measured_at = format!(
        "{} kernel, 1 worker, warm cache, clock tick {:?}",
        cfg.kind.as_str(),
        clock.tick()
    );
    Ok(cal)
}

/// Calibration against an arbitrary clock and workload.
///
/// Iteration counts double until a run spans at least 100 clock ticks; that
/// run is the discarded warm-up. Later runs keep doubling until each one
/// takes about a twentieth of the budget, then repeat until the budget is
/// spent. The result is the median per-iteration time of the timed runs.
pub fn calibrate_with<C: Clock>(
    clock: &C,
    budget_seconds: f64,
    mut run: impl FnMut(u64),
) -> Result<Calibration> {
    if budget_seconds.is_nan() || budget_seconds < 0.1 {
        return Err(Error::InvalidConfig("calibration budget must be at least 0.1 s"));
    }
    let tick = clock.tick().as_secs_f64();
    let needed = tick * MIN_TICKS as f64;
    let target_run = budget_seconds / 20.0;

    let timed = |iterations: u64, run: &mut dyn FnMut(u64)| {
        let start = clock.now();
        run(iterations);
        (clock.now() - start).as_secs_f64()
    };

    let start = clock.now();
    let mut iterations = 1u64;
    loop {
        let elapsed = timed(iterations, &mut run);
        if elapsed >= needed {
            break;
        }
        if iterations >= MAX_CALIBRATION_ITERATIONS {
            return Err(Error::ClockResolution {
                ticks: (elapsed / tick) as u64,
                needed: MIN_TICKS,
            });
        }
        iterations *= 2;
    }

    let mut samples = Vec::new();
    while samples.len() < MIN_SAMPLES || (clock.now() - start).as_secs_f64() < budget_seconds {
        let elapsed = timed(iterations, &mut run);
        samples.push(elapsed / iterations as f64);
        if elapsed < target_run && iterations < MAX_CALIBRATION_ITERATIONS {
            iterations *= 2;
        }
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    let median = if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    };
    Ok(Calibration {
        seconds_per_iteration: median,
        measured_at: String::new(),
    })
}
