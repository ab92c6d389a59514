use crossbeam_deque::{Steal, Stealer, Worker};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};

use crate::payload::mix64;

/// One worker's end of a work-stealing pool: a LIFO deque for local work and
/// random FIFO steals from the others.
pub(crate) struct LocalQueue<'p, T> {
    id: usize,
    deque: Worker<T>,
    stealers: &'p [Stealer<T>],
    retry_limit: usize,
    rng: SmallRng,
    pub steal_attempts: u64,
    pub steal_failures: u64,
}

/// Creates one LIFO deque per worker and the matching stealers.
pub(crate) fn deques<T>(workers: usize) -> (Vec<Worker<T>>, Vec<Stealer<T>>) {
    let locals: Vec<Worker<T>> = (0..workers).map(|_| Worker::new_lifo()).collect();
    let stealers = locals.iter().map(Worker::stealer).collect();
    (locals, stealers)
}

impl<'p, T> LocalQueue<'p, T> {
    pub fn new(id: usize, deque: Worker<T>, stealers: &'p [Stealer<T>], retry_limit: usize, seed: u64) -> Self {
        LocalQueue {
            id,
            deque,
            stealers,
            retry_limit,
            rng: SmallRng::seed_from_u64(mix64(seed ^ (id as u64).wrapping_mul(0x9e37_79b9))),
            steal_attempts: 0,
            steal_failures: 0,
        }
    }

    pub fn push(&self, task: T) {
        self.deque.push(task);
    }

    /// Newest local task, otherwise a task stolen from up to `retry_limit`
    /// distinct victims, the first chosen uniformly at random.
    pub fn next(&mut self) -> Option<T> {
        if let Some(t) = self.deque.pop() {
            return Some(t);
        }
        let others = self.stealers.len() - 1;
        if others == 0 {
            return None;
        }
        let first = self.rng.random_range(0..others);
        for k in 0..self.retry_limit.min(others) {
            let mut victim = (first + k) % others;
            if victim >= self.id {
                victim += 1;
            }
            self.steal_attempts += 1;
            loop {
                match self.stealers[victim].steal() {
                    Steal::Success(t) => return Some(t),
                    Steal::Empty => break,
                    Steal::Retry => continue,
                }
            }
            self.steal_failures += 1;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_pop_is_lifo_and_steal_is_fifo() {
        let (mut locals, stealers) = deques::<u32>(2);
        let w1 = locals.pop().unwrap();
        let w0 = locals.pop().unwrap();
        let mut q0 = LocalQueue::new(0, w0, &stealers, 4, 1);
        let mut q1 = LocalQueue::new(1, w1, &stealers, 4, 1);
        for i in 0..4 {
            q0.push(i);
        }
        assert_eq!(q0.next(), Some(3));
        assert_eq!(q1.next(), Some(0));
        assert_eq!(q1.steal_attempts, 1);
        assert_eq!(q1.steal_failures, 0);
        assert_eq!(q0.next(), Some(2));
        assert_eq!(q0.next(), Some(1));
        assert_eq!(q0.next(), None);
        assert_eq!(q0.steal_attempts, 1);
        assert_eq!(q0.steal_failures, 1);
    }

    #[test]
    fn single_worker_never_steals() {
        let (mut locals, stealers) = deques::<u32>(1);
        let mut q = LocalQueue::new(0, locals.pop().unwrap(), &stealers, 4, 0);
        assert_eq!(q.next(), None);
        assert_eq!(q.steal_attempts, 0);
    }

    #[test]
    fn tries_distinct_victims_up_to_limit() {
        let (mut locals, stealers) = deques::<u32>(8);
        let mut q = LocalQueue::new(3, locals.remove(3), &stealers, 4, 9);
        assert_eq!(q.next(), None);
        assert_eq!((q.steal_attempts, q.steal_failures), (4, 4));
        locals[6].push(5); // worker 7
        let mut found = false;
        for _ in 0..64 {
            if q.next() == Some(5) {
                found = true;
                break;
            }
        }
        assert!(found);
    }
}
