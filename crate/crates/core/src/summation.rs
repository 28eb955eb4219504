//! Compensated accumulators and a deterministic range-partitioned reduction.
//!
//! Every long sum in the crate goes through [`Neumaier`] (Kahan–Babuška) so that
//! 10^9-term series of `O(1/n)` terms keep their low digits. Parallel sums split
//! an index range into a fixed number of contiguous partitions, reduce each
//! partition sequentially, and merge the partials in partition order. The result
//! therefore depends on the partition count but not on the number of threads.

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;

/// Default number of partitions for range reductions.
pub const DEFAULT_PARTITIONS: usize = 64;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub const fn new() -> Self {
        Self { sum: 0.0, comp: 0.0 }
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator in; both the running sum and its
    /// compensation are added with compensation.
    #[inline]
    pub fn merge(&mut self, other: &Neumaier) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ComplexNeumaier {
    re: Neumaier,
    im: Neumaier,
}

impl ComplexNeumaier {
    pub const fn new() -> Self {
        Self {
            re: Neumaier::new(),
            im: Neumaier::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn merge(&mut self, other: &ComplexNeumaier) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Splits `range` into at most `parts` contiguous, non-empty, nearly equal
/// pieces. The split only depends on the range and `parts`.
pub fn partition(range: Range<u64>, parts: usize) -> Vec<Range<u64>> {
    let len = range.end.saturating_sub(range.start);
    if len == 0 {
        return Vec::new();
    }
    let parts = (parts.max(1) as u64).min(len);
    let base = len / parts;
    let extra = len % parts;
    let mut out = Vec::with_capacity(parts as usize);
    let mut lo = range.start;
    for i in 0..parts {
        let size = base + u64::from(i < extra);
        out.push(lo..lo + size);
        lo += size;
    }
    out
}

/// Reduces `range` by running `fold` on each partition (in parallel) and
/// combining the partials left to right with `merge`.
pub fn reduce_partitioned<A, F, M>(range: Range<u64>, parts: usize, fold: F, merge: M) -> Option<A>
where
    A: Send,
    F: Fn(Range<u64>) -> A + Sync + Send,
    M: Fn(A, A) -> A,
{
    let pieces = partition(range, parts);
    let partials: Vec<A> = pieces.into_par_iter().map(fold).collect();
    partials.into_iter().reduce(merge)
}

/// Like [`reduce_partitioned`] but with a fallible fold.
pub fn try_reduce_partitioned<A, E, F, M>(
    range: Range<u64>,
    parts: usize,
    fold: F,
    merge: M,
) -> Result<Option<A>, E>
where
    A: Send,
    E: Send,
    F: Fn(Range<u64>) -> Result<A, E> + Sync + Send,
    M: Fn(A, A) -> A,
{
    let pieces = partition(range, parts);
    let partials: Result<Vec<A>, E> = pieces.into_par_iter().map(fold).collect();
    Ok(partials?.into_iter().reduce(merge))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_cancelled_digits() {
        let vals = [1.0, 1e100, 1.0, -1e100];
        let acc: Neumaier = vals.iter().copied().collect();
        assert_eq!(acc.value(), 2.0);
        let naive: f64 = vals.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn partition_covers_range_in_order() {
        let parts = partition(10..27, 4);
        assert_eq!(parts.len(), 4);
        assert_eq!(parts[0].start, 10);
        assert_eq!(parts[3].end, 27);
        for w in parts.windows(2) {
            assert_eq!(w[0].end, w[1].start);
        }
        assert_eq!(partition(5..7, 10).len(), 2);
        assert!(partition(5..5, 3).is_empty());
    }

    #[test]
    fn partitioned_reduction_independent_of_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    reduce_partitioned(
                        1..1_000_001,
                        16,
                        |r| {
                            let mut acc = Neumaier::new();
                            for n in r {
                                acc.add(1.0 / n as f64);
                            }
                            acc
                        },
                        |mut a, b| {
                            a.merge(&b);
                            a
                        },
                    )
                    .unwrap()
                    .value()
                })
        };
        assert_eq!(run(1).to_bits(), run(4).to_bits());
    }
}
