//! Compensated summation with a fixed reduction order.

use rayon::prelude::*;

/// Rows per parallel work unit. The partition is fixed so that results do
/// not depend on the number of worker threads.
pub(crate) const CHUNK: usize = 64;

#[derive(Debug, Default, Clone, Copy)]
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

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for Neumaier {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Neumaier::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `sum_{i < len} f(i)`, evaluated in parallel over fixed chunks of indices
/// and reduced in index order.
pub(crate) fn deterministic_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            (c * CHUNK..((c + 1) * CHUNK).min(len))
                .map(&f)
                .collect::<Neumaier>()
                .value()
        })
        .collect();
    partials.into_iter().collect::<Neumaier>().value()
}
