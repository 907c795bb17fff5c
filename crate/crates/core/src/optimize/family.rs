use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::liegroup::{skew_family, RotationFamily};
use crate::metrics::sum::deterministic_sum;
use crate::metrics::{rate_from_sum, ChannelSpec, PairSpectrum};

/// `t -> R(Q_n(t) X)` evaluated on the pair spectrum of `X`.
///
/// With `Q_n(t) = cos t I + sin t A`, a difference `d` maps to
/// `cos t d + sin t (A d)`, so `A d` is computed once per difference class.
#[derive(Debug, Clone)]
pub struct FamilyObjective {
    dim: usize,
    bits: u32,
    scale: f64,
    diffs: Vec<f64>,
    turned: Vec<f64>,
    weights: Vec<f64>,
    family: RotationFamily,
}

impl FamilyObjective {
    pub fn new(x: &Constellation, ch: &ChannelSpec) -> Result<Self> {
        let family = family_for(x.dim())?;
        let spectrum = PairSpectrum::new(x);
        let n = x.dim();
        let a = family.generator().as_matrix();
        let mut diffs = Vec::with_capacity(spectrum.len() * n);
        let mut turned = Vec::with_capacity(spectrum.len() * n);
        let mut weights = Vec::with_capacity(spectrum.len());
        for k in 0..spectrum.len() {
            let d = spectrum.diff(k);
            diffs.extend_from_slice(d);
            for i in 0..n {
                turned.push((0..n).map(|j| a[(i, j)] * d[j]).sum());
            }
            weights.push(spectrum.weight(k));
        }
        Ok(FamilyObjective {
            dim: n,
            bits: x.bits(),
            scale: 1.0 / (8.0 * ch.n0()),
            diffs,
            turned,
            weights,
            family,
        })
    }

    pub fn family(&self) -> &RotationFamily {
        &self.family
    }

    /// Cutoff rate of `Q_n(t) X` in bits.
    pub fn eval(&self, t: f64) -> f64 {
        let (s, c) = t.sin_cos();
        let n = self.dim;
        let sum = deterministic_sum(self.weights.len(), |k| {
            let d = &self.diffs[k * n..(k + 1) * n];
            let e = &self.turned[k * n..(k + 1) * n];
            let p: f64 = d
                .iter()
                .zip(e)
                .map(|(u, v)| {
                    let z = c * u + s * v;
                    1.0 / (1.0 + z * z * self.scale)
                })
                .product();
            self.weights[k] * p
        });
        rate_from_sum(self.bits, sum)
    }
}

/// Result of the exhaustive search over `t` in `[0, pi/2]`.
#[derive(Debug, Clone, Serialize)]
pub struct TSearchResult {
    /// Maximizing angle, radians.
    pub t_opt: f64,
    /// `R(Q_n(t_opt) X)`, bits.
    pub objective: f64,
    pub grid_step: f64,
    /// `(t, R)` at every grid point, when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<(f64, f64)>>,
}

impl TSearchResult {
    pub fn t_opt_deg(&self) -> f64 {
        self.t_opt.to_degrees()
    }
}

/// Maximizes `R(Q_n(t) X)` over the grid `t = j * grid_step` in `[0, pi/2]`.
/// Ties go to the smaller `t`.
pub fn grid_search_t(x: &Constellation, ch: &ChannelSpec, grid_step: f64) -> Result<TSearchResult> {
    search(&FamilyObjective::new(x, ch)?, grid_step, false)
}

/// As [`grid_search_t`], keeping the full `(t, R)` profile.
pub fn grid_search_t_profile(
    x: &Constellation,
    ch: &ChannelSpec,
    grid_step: f64,
) -> Result<TSearchResult> {
    search(&FamilyObjective::new(x, ch)?, grid_step, true)
}

/// Grid search on a prepared objective.
pub fn search(obj: &FamilyObjective, grid_step: f64, keep_profile: bool) -> Result<TSearchResult> {
    if !(grid_step > 0.0) || grid_step > FRAC_PI_4 {
        return Err(Error::InvalidParameter(format!(
            "grid step must lie in (0, pi/4], got {grid_step}"
        )));
    }
    let count = (FRAC_PI_2 / grid_step + 1e-9).floor() as usize;
    let values: Vec<f64> = (0..=count)
        .into_par_iter()
        .map(|j| obj.eval(j as f64 * grid_step))
        .collect();
    let (mut best, mut lo, mut hi) = (0, values[0], values[0]);
    for (j, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite("cutoff rate on the search grid"));
        }
        if v > values[best] {
            best = j;
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo <= 1e-14 * hi.abs().max(1.0) {
        return Err(Error::Degenerate(
            "cutoff rate does not depend on t; the constellation is invariant under the family",
        ));
    }
    Ok(TSearchResult {
        t_opt: best as f64 * grid_step,
        objective: values[best],
        grid_step,
        profile: keep_profile.then(|| {
            values
                .iter()
                .enumerate()
                .map(|(j, &v)| (j as f64 * grid_step, v))
                .collect()
        }),
    })
}

/// `arccos(1 / sqrt(n))`, the maximizer of the cutoff rate over the family in
/// the low-SNR regime.
pub fn low_snr_optimal_t(n: usize) -> Result<f64> {
    check_dim(n)?;
    Ok((1.0 / (n as f64).sqrt()).acos())
}

/// `g(t) = (1 + cos^2 t / (2 N0)) (1 + sin^2 t / ((n - 1) 2 N0))^(n - 1)`.
pub fn g_of_t(n: usize, ch: &ChannelSpec, t: f64) -> Result<f64> {
    check_dim(n)?;
    let (s, c) = t.sin_cos();
    let two_n0 = 2.0 * ch.n0();
    let m = (n - 1) as f64;
    Ok((1.0 + c * c / two_n0) * (1.0 + s * s / (m * two_n0)).powf(m))
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    Ok(())
}

fn family_for(n: usize) -> Result<RotationFamily> {
    check_dim(n)?;
    skew_family(n.trailing_zeros())
}
