use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::liegroup::{expm_skew, geodesic_descent, DescentOptions, DescentTrace, RotationMatrix, SkewMatrix};
use crate::metrics::sum::CHUNK;
use crate::metrics::{rate_from_sum, ChannelSpec, PairSpectrum};

/// `Q -> R(Q X)` and its Euclidean gradient with respect to the entries of `Q`.
#[derive(Debug, Clone)]
pub struct RotationObjective {
    spectrum: PairSpectrum,
    scale: f64,
}

impl RotationObjective {
    pub fn new(x: &Constellation, ch: &ChannelSpec) -> Self {
        RotationObjective {
            spectrum: PairSpectrum::new(x),
            scale: 1.0 / (8.0 * ch.n0()),
        }
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    /// `R(Q X)` in bits.
    pub fn value(&self, q: &RotationMatrix) -> Result<f64> {
        self.check(q)?;
        Ok(self.evaluate(q, false).0)
    }

    /// `dR(Q X) / dq_ij`.
    ///
    /// With `z = Q d` for a pair difference `d` and
    /// `T(z) = prod_i 1 / (1 + c z_i^2)`, `c = 1 / (8 N0)`,
    ///
    /// ```text
    /// dR/dq_ij = -1 / (ln 2 (2^q + S)) sum_d w_d dT/dz_i d_j,
    /// dT/dz_i  = -2 c z_i T / (1 + c z_i^2),
    /// ```
    ///
    /// where `S = sum_d w_d T(Q d)`.
    pub fn gradient(&self, q: &RotationMatrix) -> Result<DMatrix<f64>> {
        self.check(q)?;
        Ok(self.evaluate(q, true).1)
    }

    fn check(&self, q: &RotationMatrix) -> Result<()> {
        if q.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.dim(),
            });
        }
        Ok(())
    }

    fn evaluate(&self, q: &RotationMatrix, with_gradient: bool) -> (f64, DMatrix<f64>) {
        let n = self.dim();
        let c = self.scale;
        let len = self.spectrum.len();
        let partials: Vec<(f64, DMatrix<f64>)> = (0..len.div_ceil(CHUNK))
            .into_par_iter()
            .map(|chunk| {
                let mut s = 0.0;
                let mut g = DMatrix::zeros(if with_gradient { n } else { 0 }, n);
                let mut z = vec![0.0; n];
                for k in chunk * CHUNK..((chunk + 1) * CHUNK).min(len) {
                    let d = self.spectrum.diff(k);
                    let w = self.spectrum.weight(k);
                    q.apply(d, &mut z);
                    let t: f64 = z.iter().map(|v| 1.0 / (1.0 + c * v * v)).product();
                    s += w * t;
                    if with_gradient {
                        for i in 0..n {
                            let u = -2.0 * c * z[i] * t / (1.0 + c * z[i] * z[i]);
                            for j in 0..n {
                                g[(i, j)] += w * u * d[j];
                            }
                        }
                    }
                }
                (s, g)
            })
            .collect();
        let mut s = 0.0;
        let mut g = DMatrix::zeros(if with_gradient { n } else { 0 }, n);
        for (ps, pg) in partials {
            s += ps;
            if with_gradient {
                g += pg;
            }
        }
        let bits = self.spectrum.bits();
        let rate = rate_from_sum(bits, s);
        if with_gradient {
            let denom = std::f64::consts::LN_2 * (2f64.powi(bits as i32) + s);
            g /= -denom;
        }
        (rate, g)
    }
}

/// Euclidean gradient of `Q -> R(Q X)`.
pub fn cutoff_rate_gradient(
    x: &Constellation,
    ch: &ChannelSpec,
    q: &RotationMatrix,
) -> Result<DMatrix<f64>> {
    RotationObjective::new(x, ch).gradient(q)
}

/// `exp(H)` with `h_ij = 1e-4` below the diagonal and `-1e-4` above it.
pub fn default_initial_rotation(n: usize) -> Result<RotationMatrix> {
    let h = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => 1e-4,
        std::cmp::Ordering::Less => -1e-4,
        std::cmp::Ordering::Equal => 0.0,
    });
    expm_skew(&SkewMatrix::new(h)?)
}

/// Geodesic descent on `f(Q) = -R(Q X)` over SO(n), started at `q0`.
///
/// The objective values recorded in the trace are `-R`.
pub fn optimize_rotation_full(
    x: &Constellation,
    ch: &ChannelSpec,
    q0: &RotationMatrix,
    opts: &DescentOptions,
) -> Result<DescentTrace> {
    let obj = RotationObjective::new(x, ch);
    obj.check(q0)?;
    geodesic_descent(
        |q| -obj.evaluate(q, false).0,
        |q| -obj.evaluate(q, true).1,
        q0,
        opts,
    )
}
