//! Task-graph structure: which tasks exist and which outputs of the previous
//! step each task consumes.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::kernel::KernelConfig;
use crate::{Error, Result};

/// Dependency pattern between consecutive time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    /// Three-point nearest neighbours, clipped at the edges.
    Stencil,
    /// `spread_radix` parents spaced evenly across the width, rotating with the step.
    Spread,
    /// Every task depends on every task of the previous step.
    AllToAll,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::Stencil, Pattern::Spread, Pattern::AllToAll];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::Stencil => "stencil",
            Pattern::Spread => "spread",
            Pattern::AllToAll => "all_to_all",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "stencil" => Ok(Pattern::Stencil),
            "spread" => Ok(Pattern::Spread),
            "all_to_all" => Ok(Pattern::AllToAll),
            other => Err(format!(
                "unknown graph type `{other}` (expected stencil, spread or all_to_all)"
            )),
        }
    }
}

/// One benchmark instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskGraphSpec {
    pub width: usize,
    pub steps: usize,
    pub pattern: Pattern,
    /// Dependencies per task; only meaningful for [`Pattern::Spread`].
    pub spread_radix: usize,
    pub kernel: KernelConfig,
    /// Size of each task's output payload. The first eight bytes hold the digest.
    pub output_bytes: usize,
    pub seed: u64,
}

impl Default for TaskGraphSpec {
    fn default() -> Self {
        TaskGraphSpec {
            width: 16,
            steps: 16,
            pattern: Pattern::Stencil,
            spread_radix: 4,
            kernel: KernelConfig::default(),
            output_bytes: 16,
            seed: 0,
        }
    }
}

impl TaskGraphSpec {
    pub fn new(width: usize, steps: usize, pattern: Pattern) -> Self {
        TaskGraphSpec {
            width,
            steps,
            pattern,
            ..Default::default()
        }
    }

    /// Checks every invariant and returns the spec unchanged when they hold.
    pub fn validate(self) -> Result<Self> {
        if self.width == 0 {
            return Err(Error::InvalidSpec("width"));
        }
        if self.steps == 0 {
            return Err(Error::InvalidSpec("steps"));
        }
        if self.output_bytes < 8 {
            return Err(Error::InvalidSpec("output_bytes"));
        }
        if self.pattern == Pattern::Spread
            && (self.spread_radix == 0 || self.spread_radix > self.width)
        {
            return Err(Error::InvalidSpec("spread_radix"));
        }
        self.kernel.validate()?;
        Ok(self)
    }

    pub fn task_count(&self) -> usize {
        self.width * self.steps
    }

    pub fn check_bounds(&self, task: TaskCoord) -> Result<()> {
        if task.step >= self.steps || task.point >= self.width {
            return Err(Error::OutOfBounds {
                step: task.step,
                point: task.point,
            });
        }
        Ok(())
    }

    /// Points of step `task.step - 1` whose outputs `task` consumes.
    pub fn dependencies(&self, task: TaskCoord) -> Result<IntervalSet> {
        self.check_bounds(task)?;
        if task.step == 0 {
            return Ok(IntervalSet::new());
        }
        Ok(self.parents_unchecked(task.step, task.point))
    }

    /// Points of step `task.step + 1` that consume the output of `task`.
    pub fn reverse_dependencies(&self, task: TaskCoord) -> Result<IntervalSet> {
        self.check_bounds(task)?;
        if task.step + 1 == self.steps {
            return Ok(IntervalSet::new());
        }
        Ok(self.children_unchecked(task.step, task.point))
    }

    pub(crate) fn parents_unchecked(&self, step: usize, point: usize) -> IntervalSet {
        let w = self.width;
        match self.pattern {
            Pattern::Stencil => IntervalSet::from_range(point.saturating_sub(1)..(point + 2).min(w)),
            Pattern::AllToAll => IntervalSet::from_range(0..w),
            Pattern::Spread => {
                let stride = self.spread_stride();
                IntervalSet::from_points(
                    (0..self.spread_radix).map(|i| (point + i * stride + step) % w),
                )
            }
        }
    }

    fn children_unchecked(&self, step: usize, point: usize) -> IntervalSet {
        let w = self.width;
        match self.pattern {
            // The clipped three-point stencil is symmetric.
            Pattern::Stencil | Pattern::AllToAll => self.parents_unchecked(step + 1, point),
            Pattern::Spread => {
                // point = (child + i*stride + step + 1) mod w  =>  child = point - i*stride - (step + 1)
                let stride = self.spread_stride();
                IntervalSet::from_points((0..self.spread_radix).map(|i| {
                    let offset = (i * stride + step + 1) % w;
                    (point + w - offset) % w
                }))
            }
        }
    }

    fn spread_stride(&self) -> usize {
        self.width.div_ceil(self.spread_radix.max(1))
    }
}

/// Identity of one task. Orders lexicographically by `(step, point)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskCoord {
    pub step: usize,
    pub point: usize,
}

impl TaskCoord {
    pub fn new(step: usize, point: usize) -> Self {
        TaskCoord { step, point }
    }
}

impl fmt::Display for TaskCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.step, self.point)
    }
}

/// Sorted, disjoint, non-adjacent half-open ranges of point indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    intervals: Vec<Range<usize>>,
}

impl IntervalSet {
    pub fn new() -> Self {
        IntervalSet::default()
    }

    pub fn from_range(range: Range<usize>) -> Self {
        let mut set = IntervalSet::new();
        if range.start < range.end {
            set.intervals.push(range);
        }
        set
    }

    /// Builds the set from arbitrary (possibly repeated, unordered) points.
    pub fn from_points(points: impl IntoIterator<Item = usize>) -> Self {
        let mut points: Vec<usize> = points.into_iter().collect();
        points.sort_unstable();
        points.dedup();
        let mut intervals: Vec<Range<usize>> = Vec::new();
        for p in points {
            match intervals.last_mut() {
                Some(last) if last.end == p => last.end = p + 1,
                _ => intervals.push(p..p + 1),
            }
        }
        IntervalSet { intervals }
    }

    pub fn intervals(&self) -> &[Range<usize>] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Number of points in the set.
    pub fn len(&self) -> usize {
        self.intervals.iter().map(|r| r.len()).sum()
    }

    pub fn contains(&self, point: usize) -> bool {
        // intervals are sorted, so the candidate is the last one starting at or before `point`
        let idx = self.intervals.partition_point(|r| r.start <= point);
        idx > 0 && self.intervals[idx - 1].end > point
    }

    pub fn points(&self) -> impl Iterator<Item = usize> + '_ {
        self.intervals.iter().flat_map(|r| r.clone())
    }

    /// Points of `self` that fall inside `range`, as a new set.
    pub fn intersect_range(&self, range: Range<usize>) -> IntervalSet {
        let intervals = self
            .intervals
            .iter()
            .filter_map(|r| {
                let lo = r.start.max(range.start);
                let hi = r.end.min(range.end);
                (lo < hi).then_some(lo..hi)
            })
            .collect();
        IntervalSet { intervals }
    }

    /// Set union.
    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all: Vec<Range<usize>> = self
            .intervals
            .iter()
            .chain(other.intervals.iter())
            .cloned()
            .collect();
        all.sort_unstable_by_key(|r| r.start);
        let mut intervals: Vec<Range<usize>> = Vec::with_capacity(all.len());
        for r in all {
            match intervals.last_mut() {
                Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
                _ => intervals.push(r),
            }
        }
        IntervalSet { intervals }
    }

    /// True if intervals are sorted, non-empty, disjoint and non-adjacent.
    pub fn is_well_formed(&self) -> bool {
        self.intervals.iter().all(|r| r.start < r.end)
            && self.intervals.windows(2).all(|w| w[0].end < w[1].start)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, r) in self.intervals.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "[{}, {})", r.start, r.end)?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(width: usize, steps: usize, pattern: Pattern, radix: usize) -> TaskGraphSpec {
        TaskGraphSpec {
            spread_radix: radix,
            ..TaskGraphSpec::new(width, steps, pattern)
        }
    }

    #[test]
    fn validate_accepts_and_rejects() {
        let ok = spec(16, 4, Pattern::Stencil, 4);
        assert_eq!(ok.clone().validate().unwrap(), ok);

        let err = spec(0, 4, Pattern::Stencil, 1).validate().unwrap_err();
        assert!(matches!(err, Error::InvalidSpec("width")));

        let err = spec(8, 4, Pattern::Spread, 9).validate().unwrap_err();
        assert!(matches!(err, Error::InvalidSpec("spread_radix")));

        let err = spec(8, 0, Pattern::Stencil, 1).validate().unwrap_err();
        assert!(matches!(err, Error::InvalidSpec("steps")));

        let mut small = spec(8, 1, Pattern::Stencil, 1);
        small.output_bytes = 7;
        assert!(matches!(small.validate(), Err(Error::InvalidSpec("output_bytes"))));
    }

    #[test]
    fn dependency_examples() {
        let s = spec(8, 4, Pattern::Stencil, 1);
        assert!(s.dependencies(TaskCoord::new(0, 3)).unwrap().is_empty());
        assert_eq!(
            s.dependencies(TaskCoord::new(1, 0)).unwrap(),
            IntervalSet::from_points([0, 1])
        );

        let a = spec(4, 3, Pattern::AllToAll, 1);
        assert_eq!(a.dependencies(TaskCoord::new(2, 1)).unwrap().intervals(), &[0..4]);

        let sp = spec(8, 2, Pattern::Spread, 2);
        assert_eq!(
            sp.dependencies(TaskCoord::new(1, 0)).unwrap(),
            IntervalSet::from_points([1, 5])
        );
    }

    #[test]
    fn reverse_dependency_examples() {
        let s = spec(8, 4, Pattern::Stencil, 1);
        assert_eq!(
            s.reverse_dependencies(TaskCoord::new(0, 0)).unwrap(),
            IntervalSet::from_points([0, 1])
        );
        assert!(s.reverse_dependencies(TaskCoord::new(3, 5)).unwrap().is_empty());

        let a = spec(4, 3, Pattern::AllToAll, 1);
        assert_eq!(a.reverse_dependencies(TaskCoord::new(0, 2)).unwrap().intervals(), &[0..4]);
    }

    #[test]
    fn out_of_bounds() {
        let s = spec(8, 4, Pattern::Stencil, 1);
        assert!(matches!(
            s.dependencies(TaskCoord::new(4, 0)),
            Err(Error::OutOfBounds { step: 4, point: 0 })
        ));
        assert!(s.reverse_dependencies(TaskCoord::new(0, 8)).is_err());
    }

    #[test]
    fn interval_set_basics() {
        let set = IntervalSet::from_points([5, 1, 2, 3, 9, 2]);
        assert_eq!(set.intervals(), &[1..4, 5..6, 9..10]);
        assert_eq!(set.len(), 5);
        assert!(set.contains(3) && !set.contains(4) && set.contains(9));
        assert_eq!(set.intersect_range(2..6).intervals(), &[2..4, 5..6]);
        let u = set.union(&IntervalSet::from_range(4..5));
        assert_eq!(u.intervals(), &[1..6, 9..10]);
        assert!(u.is_well_formed());
        assert_eq!(set.to_string(), "{[1, 4), [5, 6), [9, 10)}");
    }

    #[test]
    fn spread_cardinality() {
        for width in 1..=40 {
            for k in 1..=width {
                let s = spec(width, 3, Pattern::Spread, k);
                for p in 0..width {
                    let n = s.dependencies(TaskCoord::new(1, p)).unwrap().len();
                    assert!(n >= 1 && n <= k, "width={width} k={k} n={n}");
                    if width % k == 0 {
                        assert_eq!(n, k);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn interval_set_matches_point_set(points in proptest::collection::vec(0usize..64, 0..40)) {
            let set = IntervalSet::from_points(points.iter().copied());
            prop_assert!(set.is_well_formed());
            let mut expected = points.clone();
            expected.sort_unstable();
            expected.dedup();
            prop_assert_eq!(set.points().collect::<Vec<_>>(), expected.clone());
            for p in 0..64 {
                prop_assert_eq!(set.contains(p), expected.binary_search(&p).is_ok());
            }
        }

        #[test]
        fn union_is_point_union(a in proptest::collection::vec(0usize..50, 0..20),
                                b in proptest::collection::vec(0usize..50, 0..20)) {
            let u = IntervalSet::from_points(a.iter().copied())
                .union(&IntervalSet::from_points(b.iter().copied()));
            prop_assert!(u.is_well_formed());
            prop_assert_eq!(u, IntervalSet::from_points(a.into_iter().chain(b)));
        }
    }
}
