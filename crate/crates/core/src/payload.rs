//! What a task produces, and the single-threaded reference execution every
//! backend is checked against.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{TaskCoord, TaskGraphSpec};
use crate::kernel::{execute_kernel, Scratch};
use crate::Result;

/// 64-bit avalanche mix (splitmix64 finalizer).
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Digest of one task from its coordinates, its kernel result and the XOR of
/// its parents' digests. Each stage is a bijection in the folded word, so
/// changing any single input changes the digest.
pub fn fold_digest(task: TaskCoord, kernel_digest: u64, inputs_xor: u64) -> u64 {
    let mut h = mix64(0x5851_f42d_4c95_7f2d ^ task.step as u64);
    h = mix64(h ^ task.point as u64);
    h = mix64(h ^ kernel_digest);
    mix64(h ^ inputs_xor)
}

/// Output payload of one task; the first eight bytes hold the digest
/// (little endian) and the rest repeats those eight bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct TaskOutput {
    bytes: Box<[u8]>,
}

impl TaskOutput {
    pub fn new(digest: u64, output_bytes: usize) -> Self {
        let mut bytes = vec![0u8; output_bytes.max(8)].into_boxed_slice();
        write_payload(&mut bytes, digest);
        TaskOutput { bytes }
    }

    pub fn digest(&self) -> u64 {
        read_digest(&self.bytes)
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

impl fmt::Debug for TaskOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskOutput")
            .field("digest", &format_args!("{:#018x}", self.digest()))
            .field("len", &self.bytes.len())
            .finish()
    }
}

/// Fills `slot` (at least eight bytes) with the payload for `digest`.
pub fn write_payload(slot: &mut [u8], digest: u64) {
    let word = digest.to_le_bytes();
    for chunk in slot.chunks_mut(8) {
        chunk.copy_from_slice(&word[..chunk.len()]);
    }
}

pub fn read_digest(slot: &[u8]) -> u64 {
    let mut word = [0u8; 8];
    word.copy_from_slice(&slot[..8]);
    u64::from_le_bytes(word)
}

/// Builds the output of `task` from its parents' digests (ordered by
/// ascending parent point) and its kernel result.
pub fn task_output(
    spec: &TaskGraphSpec,
    task: TaskCoord,
    input_digests: &[u64],
    kernel_digest: u64,
) -> TaskOutput {
    let inputs_xor = input_digests.iter().fold(0, |acc, d| acc ^ d);
    TaskOutput::new(fold_digest(task, kernel_digest, inputs_xor), spec.output_bytes)
}

/// Runs the kernel for `task` in `scratch` and returns the task's digest.
/// Shared by every executor so they all compute the same values.
pub fn run_task(spec: &TaskGraphSpec, task: TaskCoord, inputs_xor: u64, scratch: &mut Scratch) -> u64 {
    let iterations = spec.kernel.task_iterations(task, spec.seed);
    scratch.reset(task, spec.seed);
    let kernel_digest = execute_kernel(iterations, scratch);
    fold_digest(task, kernel_digest, inputs_xor)
}

/// XOR of the digests of every final-step task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GraphChecksum(pub u64);

impl GraphChecksum {
    pub fn fold(self, digest: u64) -> Self {
        GraphChecksum(self.0 ^ digest)
    }
}

impl fmt::Display for GraphChecksum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#018x}", self.0)
    }
}

/// Every task's digest, indexed by `(step, point)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestTable {
    width: usize,
    digests: Vec<u64>,
}

impl DigestTable {
    pub fn get(&self, task: TaskCoord) -> u64 {
        self.digests[task.step * self.width + task.point]
    }

    pub fn step(&self, step: usize) -> &[u64] {
        &self.digests[step * self.width..(step + 1) * self.width]
    }
}

/// Executes the graph on the calling thread in `(step, point)` order.
pub fn sequential_execute(spec: &TaskGraphSpec) -> Result<(GraphChecksum, DigestTable)> {
    let spec = spec.clone().validate()?;
    let mut digests = vec![0u64; spec.task_count()];
    let mut scratch = Scratch::for_task(TaskCoord::new(0, 0), spec.seed);
    let mut inputs = Vec::new();
    for step in 0..spec.steps {
        for point in 0..spec.width {
            let task = TaskCoord::new(step, point);
            inputs.clear();
            if step > 0 {
                let prev = &digests[(step - 1) * spec.width..step * spec.width];
                inputs.extend(spec.dependencies(task)?.points().map(|p| prev[p]));
            }
            let iterations = spec.kernel.task_iterations(task, spec.seed);
            scratch.reset(task, spec.seed);
            let kernel_digest = execute_kernel(iterations, &mut scratch);
            let out = task_output(&spec, task, &inputs, kernel_digest);
            digests[step * spec.width + point] = out.digest();
        }
    }
    let table = DigestTable {
        width: spec.width,
        digests,
    };
    let checksum = table
        .step(spec.steps - 1)
        .iter()
        .fold(GraphChecksum::default(), |c, &d| c.fold(d));
    Ok((checksum, table))
}
