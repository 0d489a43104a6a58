//! Deterministic chunked summation.
//!
//! Long trigonometric sums are split into fixed chunks of 2^16 indices;
//! each chunk is accumulated with Neumaier compensation and the chunk
//! totals are folded in index order. The chunk layout depends only on the
//! index range, never on the thread count, so a sum is bit-identical
//! whether it runs on one thread or many.

use rayon::prelude::*;

pub(crate) const CHUNK: u64 = 1 << 16;

/// Kahan-Babushka-Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sum of `term(i)` for i in [lo, hi), chunked and order-stable.
pub(crate) fn par_sum<F>(lo: u64, hi: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync,
{
    par_sum2(lo, hi, |i| (term(i), 0.0)).0
}

/// Paired sum (real, imaginary) of `term(i)` for i in [lo, hi), chunked
/// and order-stable. Both components are compensated independently.
pub(crate) fn par_sum2<F>(lo: u64, hi: u64, term: F) -> (f64, f64)
where
    F: Fn(u64) -> (f64, f64) + Sync,
{
    if lo >= hi {
        return (0.0, 0.0);
    }
    let chunks = (hi - lo).div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = lo + c * CHUNK;
            let end = (start + CHUNK).min(hi);
            let mut re = Neumaier::default();
            let mut im = Neumaier::default();
            for i in start..end {
                let (x, y) = term(i);
                re.add(x);
                im.add(y);
            }
            (re.total(), im.total())
        })
        .collect();
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for (x, y) in partials {
        re.add(x);
        im.add(y);
    }
    (re.total(), im.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_beats_naive() {
        // 1 + 1e-16 repeated: naive summation loses every small term
        let mut acc = Neumaier::default();
        acc.add(1.0);
        for _ in 0..1_000_000 {
            acc.add(1e-16);
        }
        assert!((acc.total() - (1.0 + 1e-10)).abs() < 1e-13);
    }

    #[test]
    fn par_sum_is_pool_size_invariant() {
        let f = |i: u64| ((i as f64) * 0.001).sin();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| par_sum(0, 300_000, f));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| par_sum(0, 300_000, f));
        assert_eq!(one.to_bits(), four.to_bits());
    }

    #[test]
    fn empty_and_short_ranges() {
        assert_eq!(par_sum(5, 5, |_| 1.0), 0.0);
        assert_eq!(par_sum(0, 3, |_| 2.0), 6.0);
    }
}
