use std::collections::HashMap;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::liegroup::RotationMatrix;

use super::sum::deterministic_sum;
use super::{rate_from_sum, ChannelSpec, Diversity, ProductDistance, Radius};

/// The multiset of pairwise differences `x - y`, `x != y`, of a constellation.
///
/// Every pairwise functional in this crate depends on a pair only through its
/// difference, and it is unchanged when the difference is negated. Differences
/// are therefore stored once per class `{d, -d}` (sign chosen so that the first
/// nonzero component is positive) together with the number of ordered pairs
/// producing it. For lattice-like inputs such as QAM products this reduces the
/// `m^2` pairs to a few thousand classes.
///
/// A rotation acts on the spectrum directly, since `Qx - Qy = Q(x - y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSpectrum {
    dim: usize,
    bits: u32,
    diffs: Vec<f64>,
    weights: Vec<f64>,
}

impl PairSpectrum {
    pub fn new(x: &Constellation) -> Self {
        let n = x.dim();
        let m = x.len();
        let mut classes: HashMap<Box<[u64]>, u64> = HashMap::new();
        let mut d = vec![0.0; n];
        let mut key = vec![0u64; n];
        for i in 0..m {
            let a = x.point(i);
            // Ordered pairs (i, j) and (j, i) land in the same class.
            for j in i + 1..m {
                let b = x.point(j);
                for k in 0..n {
                    d[k] = a[k] - b[k];
                }
                canonicalize(&mut d);
                for k in 0..n {
                    key[k] = d[k].to_bits();
                }
                match classes.get_mut(key.as_slice()) {
                    Some(count) => *count += 2,
                    None => {
                        classes.insert(key.clone().into_boxed_slice(), 2);
                    }
                }
            }
        }
        let mut entries: Vec<(Box<[u64]>, u64)> = classes.into_iter().collect();
        entries.sort_unstable_by(|a, b| {
            a.0.iter()
                .zip(b.0.iter())
                .map(|(u, v)| f64::from_bits(*u).total_cmp(&f64::from_bits(*v)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut diffs = Vec::with_capacity(entries.len() * n);
        let mut weights = Vec::with_capacity(entries.len());
        for (key, count) in entries {
            diffs.extend(key.iter().map(|&b| f64::from_bits(b)));
            weights.push(count as f64);
        }
        PairSpectrum {
            dim: n,
            bits: x.bits(),
            diffs,
            weights,
        }
    }

    /// The spectrum of `Q X`.
    pub fn rotated(&self, q: &RotationMatrix) -> Result<Self> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.dim(),
            });
        }
        let mut diffs = vec![0.0; self.diffs.len()];
        for (src, dst) in self
            .diffs
            .chunks_exact(self.dim)
            .zip(diffs.chunks_exact_mut(self.dim))
        {
            q.apply(src, dst);
        }
        Ok(PairSpectrum {
            diffs,
            ..self.clone()
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bits per point of the underlying constellation.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Number of difference classes.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn diff(&self, k: usize) -> &[f64] {
        &self.diffs[k * self.dim..(k + 1) * self.dim]
    }

    /// Number of ordered pairs in class `k`.
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_k w_k f(d_k)` with a thread-count independent reduction order.
    pub fn weighted_sum<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        deterministic_sum(self.len(), |k| self.weights[k] * f(self.diff(k)))
    }

    pub fn cutoff_rate(&self, ch: &ChannelSpec) -> f64 {
        self.local_cutoff_rate(Radius::Infinite, ch)
    }

    pub fn local_cutoff_rate(&self, r: Radius, ch: &ChannelSpec) -> f64 {
        let c = 1.0 / (8.0 * ch.n0());
        let s = self.weighted_sum(|d| {
            if r.contains(d) {
                d.iter().map(|v| 1.0 / (1.0 + v * v * c)).product()
            } else {
                0.0
            }
        });
        rate_from_sum(self.bits, s)
    }

    pub fn high_snr_sum(&self, ch: &ChannelSpec, coordinate_tol: f64) -> f64 {
        let c = 8.0 * ch.n0();
        self.weighted_sum(|d| {
            d.iter()
                .filter(|v| v.abs() > coordinate_tol)
                .map(|v| c / (v * v))
                .product()
        })
    }

    pub fn diversity_order(&self, r: Radius, coordinate_tol: f64) -> Diversity {
        let order = (0..self.len())
            .map(|k| self.diff(k))
            .filter(|d| r.contains(d))
            .map(|d| d.iter().filter(|v| v.abs() > coordinate_tol).count())
            .min();
        Diversity::from_min(order, self.dim)
    }

    pub fn min_product_distance(&self, r: Radius, coordinate_tol: f64) -> ProductDistance {
        let value = (0..self.len())
            .map(|k| self.diff(k))
            .filter(|d| r.contains(d))
            .map(|d| super::product_distance(d, coordinate_tol))
            .min_by(f64::total_cmp);
        ProductDistance::from_min(value, self.dim)
    }
}

/// Negates `d` if needed so that its first nonzero entry is positive, and
/// turns `-0.0` into `0.0`.
fn canonicalize(d: &mut [f64]) {
    if let Some(first) = d.iter().copied().find(|v| *v != 0.0) {
        if first < 0.0 {
            d.iter_mut().for_each(|v| *v = -*v);
        }
    }
    d.iter_mut().for_each(|v| *v += 0.0);
}
