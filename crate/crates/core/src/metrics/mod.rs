//! Rate, diversity and distance functionals of a constellation.
//!
//! All pair sums run over ordered pairs `(x, y)` with `x != y`. The noise
//! variance `N0` is per real dimension.
//!
//! The cutoff rate of `X` at noise level `N0` is
//!
//! ```text
//! R(X) = q - log2(1 + 2^-q sum_{x != y} prod_i 1 / (1 + (x_i - y_i)^2 / (8 N0)))
//! ```
//!
//! and the local variants restrict the inner sum to pairs with
//! `|x - y| <= r`.

mod spectrum;
pub(crate) mod sum;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::channel::sample_fade;
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::liegroup::RotationMatrix;

pub use spectrum::PairSpectrum;
use sum::{deterministic_sum, Neumaier};

/// Coordinates differing by at most this much count as equal.
pub const COORDINATE_TOL: f64 = 1e-9;

/// Relative slack on ball membership so that pairs exactly at distance `r`
/// survive rounding in rotated coordinates.
const BALL_SLACK: f64 = 1e-12;

/// Noise level of the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelSpec {
    n0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ebn0_db: Option<f64>,
}

impl ChannelSpec {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive and finite, got {n0}"
            )));
        }
        Ok(ChannelSpec { n0, ebn0_db: None })
    }

    /// Noise level for a constellation with unit energy per bit, i.e. average
    /// energy `P = q`: `N0 = 10^(-dB/10)`.
    pub fn from_ebn0_db(db: f64) -> Result<Self> {
        Self::from_ebn0_db_with_bit_energy(db, 1.0)
    }

    /// Noise level giving `Eb/N0 = db` for energy per bit `eb`.
    pub fn from_ebn0_db_with_bit_energy(db: f64, eb: f64) -> Result<Self> {
        if !db.is_finite() {
            return Err(Error::InvalidParameter(format!("Eb/N0 must be finite, got {db}")));
        }
        if !(eb > 0.0) || !eb.is_finite() {
            return Err(Error::InvalidParameter(format!("bit energy must be positive, got {eb}")));
        }
        let mut ch = ChannelSpec::new(eb * 10f64.powf(-db / 10.0))?;
        ch.ebn0_db = Some(db);
        Ok(ch)
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn ebn0_db(&self) -> Option<f64> {
        self.ebn0_db
    }
}

/// Radius of the ball `B(x, r) = {y : |x - y| <= r}`; `Infinite` covers all of
/// `R^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Finite(f64),
    Infinite,
}

impl Radius {
    pub fn finite(r: f64) -> Result<Self> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
        }
        Ok(Radius::Finite(r))
    }

    /// Whether a pair with difference `d` lies within the closed ball.
    pub fn contains(&self, d: &[f64]) -> bool {
        match *self {
            Radius::Infinite => true,
            Radius::Finite(r) => {
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                norm <= r * (1.0 + BALL_SLACK)
            }
        }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Finite(r) => write!(f, "{r}"),
            Radius::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Radius {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Radius::Infinite),
            other => {
                let r: f64 = other
                    .parse()
                    .map_err(|_| Error::Parse(format!("invalid radius {s:?}")))?;
                Radius::finite(r)
            }
        }
    }
}

impl Serialize for Radius {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Radius::Finite(r) => s.serialize_f64(*r),
            Radius::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Minimum number of differing coordinates over pairs in a ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Diversity {
    pub order: usize,
    /// No pair lies within the radius; `order` is then `n` by convention.
    pub empty_ball: bool,
}

impl Diversity {
    fn from_min(min: Option<usize>, n: usize) -> Self {
        match min {
            Some(order) => Diversity {
                order,
                empty_ball: false,
            },
            None => Diversity {
                order: n,
                empty_ball: true,
            },
        }
    }
}

/// Minimum product of nonzero coordinate differences over pairs in a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProductDistance {
    /// `+inf` when the ball is empty.
    pub value: f64,
    /// `value^(1/n)`.
    pub normalized: f64,
    pub empty_ball: bool,
}

impl ProductDistance {
    fn from_min(min: Option<f64>, n: usize) -> Self {
        match min {
            Some(value) => ProductDistance {
                value,
                normalized: value.powf(1.0 / n as f64),
                empty_ball: false,
            },
            None => ProductDistance {
                value: f64::INFINITY,
                normalized: f64::INFINITY,
                empty_ball: true,
            },
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RadiusReport {
    pub radius: Radius,
    pub local_cutoff_rate: f64,
    pub diversity_order: Diversity,
    pub min_product_distance: ProductDistance,
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub n: usize,
    pub m: usize,
    pub bits: u32,
    pub energy: f64,
    pub channel: ChannelSpec,
    pub cutoff_rate: f64,
    pub high_snr_sum: f64,
    pub coordinate_tol: f64,
    pub radii: Vec<RadiusReport>,
}

/// `q - log2(1 + 2^-q s)`, clamped to `[0, q]` against rounding.
pub(crate) fn rate_from_sum(bits: u32, s: f64) -> f64 {
    let q = f64::from(bits);
    let r = q - (s * 2f64.powi(-(bits as i32))).ln_1p() / std::f64::consts::LN_2;
    r.clamp(0.0, q)
}

pub(crate) fn product_distance(d: &[f64], coordinate_tol: f64) -> f64 {
    d.iter()
        .filter(|v| v.abs() > coordinate_tol)
        .map(|v| v.abs())
        .product()
}

/// `sum_{i != j} f(x_i - x_j)` over ordered pairs.
fn ordered_pair_sum<F>(x: &Constellation, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x.dim();
    deterministic_sum(x.len(), |i| {
        let a = x.point(i);
        let mut d = vec![0.0; n];
        let mut row = Neumaier::default();
        for (j, b) in x.points().enumerate() {
            if j == i {
                continue;
            }
            for k in 0..n {
                d[k] = a[k] - b[k];
            }
            row.add(f(&d));
        }
        row.value()
    })
}

/// Minimum of `f(x_i - x_j)` over unordered pairs where it is defined.
fn pair_min<T, F>(x: &Constellation, f: F) -> Option<T>
where
    T: Send + Copy,
    F: Fn(&[f64]) -> Option<T> + Sync,
    T: PartialOrd,
{
    let n = x.dim();
    let better = |a: Option<T>, b: Option<T>| match (a, b) {
        (Some(u), Some(v)) => Some(if v < u { v } else { u }),
        (u, None) => u,
        (None, v) => v,
    };
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let a = x.point(i);
            let mut d = vec![0.0; n];
            let mut best = None;
            for j in i + 1..x.len() {
                let b = x.point(j);
                for k in 0..n {
                    d[k] = a[k] - b[k];
                }
                best = better(best, f(&d));
            }
            best
        })
        .reduce(|| None, better)
}

/// Cutoff rate `R(X)` in bits per channel use; direct `O(m^2 n)` evaluation.
pub fn cutoff_rate(x: &Constellation, ch: &ChannelSpec) -> f64 {
    local_cutoff_rate(x, Radius::Infinite, ch)
}

/// Local cutoff rate `R(X, r)`: the inner sum runs over `y` with
/// `0 < |x - y| <= r`. With `r = inf` this is [`cutoff_rate`] exactly.
pub fn local_cutoff_rate(x: &Constellation, r: Radius, ch: &ChannelSpec) -> f64 {
    let c = 1.0 / (8.0 * ch.n0());
    let s = ordered_pair_sum(x, |d| {
        if r.contains(d) {
            d.iter().map(|v| 1.0 / (1.0 + v * v * c)).product()
        } else {
            0.0
        }
    });
    rate_from_sum(x.bits(), s)
}

/// Conditional bound `R0(X; h)` for a fixed fade realization.
pub fn r0_conditional(x: &Constellation, h: &[f64], ch: &ChannelSpec) -> Result<f64> {
    check_fade(x.dim(), h)?;
    let c = 1.0 / (8.0 * ch.n0());
    let s = ordered_pair_sum(x, |d| {
        let e: f64 = d.iter().zip(h).map(|(v, g)| g * g * v * v).sum();
        (-e * c).exp()
    });
    Ok(rate_from_sum(x.bits(), s))
}

/// Monte Carlo average of [`r0_conditional`] over i.i.d. Rayleigh fades with
/// `E h^2 = 1`, drawn in order from a ChaCha8 stream seeded with `seed`.
pub fn r0_expected_mc(
    x: &Constellation,
    ch: &ChannelSpec,
    num_channels: usize,
    seed: u64,
) -> Result<McEstimate> {
    if num_channels == 0 {
        return Err(Error::InvalidParameter("num_channels must be at least 1".into()));
    }
    let spectrum = PairSpectrum::new(x);
    let c = 1.0 / (8.0 * ch.n0());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean = Neumaier::default();
    let mut square = Neumaier::default();
    for _ in 0..num_channels {
        let h = sample_fade(x.dim(), &mut rng);
        let h = h.as_slice();
        let s = spectrum.weighted_sum(|d| {
            let e: f64 = d.iter().zip(h).map(|(v, g)| g * g * v * v).sum();
            (-e * c).exp()
        });
        let r = rate_from_sum(x.bits(), s);
        mean.add(r);
        square.add(r * r);
    }
    let k = num_channels as f64;
    let mu = mean.value() / k;
    let stderr = if num_channels > 1 {
        let var = ((square.value() - k * mu * mu) / (k - 1.0)).max(0.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        mean: mu,
        stderr,
        samples: num_channels,
    })
}

/// Local diversity order `L(X, r)`.
pub fn diversity_order(x: &Constellation, r: Radius, coordinate_tol: f64) -> Diversity {
    let min = pair_min(x, |d| {
        r.contains(d)
            .then(|| d.iter().filter(|v| v.abs() > coordinate_tol).count())
    });
    Diversity::from_min(min, x.dim())
}

/// Local minimum product distance `d_p(X, r)`.
pub fn min_product_distance(x: &Constellation, r: Radius, coordinate_tol: f64) -> ProductDistance {
    let min = pair_min(x, |d| {
        r.contains(d).then(|| product_distance(d, coordinate_tol))
    });
    ProductDistance::from_min(min, x.dim())
}

/// High-SNR sum `S0 = sum_{x != y} prod_{i : x_i != y_i} 8 N0 / (x_i - y_i)^2`.
pub fn high_snr_sum(x: &Constellation, ch: &ChannelSpec, coordinate_tol: f64) -> f64 {
    let c = 8.0 * ch.n0();
    ordered_pair_sum(x, |d| {
        d.iter()
            .filter(|v| v.abs() > coordinate_tol)
            .map(|v| c / (v * v))
            .product()
    })
}

/// True iff every entry of `Q` exceeds `tol` in magnitude. For a QAM product
/// `X` this is equivalent to `L(QX, 2) = n`.
pub fn is_locally_fully_diverse(q: &RotationMatrix, tol: f64) -> bool {
    q.as_matrix().iter().all(|v| v.abs() > tol)
}

pub fn metrics_report(
    x: &Constellation,
    ch: &ChannelSpec,
    radii: &[Radius],
    coordinate_tol: f64,
) -> MetricsReport {
    let spectrum = PairSpectrum::new(x);
    MetricsReport {
        n: x.dim(),
        m: x.len(),
        bits: x.bits(),
        energy: x.energy(),
        channel: *ch,
        cutoff_rate: cutoff_rate(x, ch),
        high_snr_sum: spectrum.high_snr_sum(ch, coordinate_tol),
        coordinate_tol,
        radii: radii
            .iter()
            .map(|&r| RadiusReport {
                radius: r,
                local_cutoff_rate: local_cutoff_rate(x, r, ch),
                diversity_order: spectrum.diversity_order(r, coordinate_tol),
                min_product_distance: spectrum.min_product_distance(r, coordinate_tol),
            })
            .collect(),
    }
}

fn check_fade(n: usize, h: &[f64]) -> Result<()> {
    if h.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h.len(),
        });
    }
    if h.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::InvalidParameter("fade entries must be finite and non-negative".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_qam_product, normalize_unit_bit_energy, rotate};
    use crate::liegroup::{rotation_at, skew_family};
    use proptest::prelude::*;

    fn line(points: &[f64]) -> Constellation {
        Constellation::new(points.iter().map(|&p| vec![p]).collect(), None).unwrap()
    }

    fn diamond() -> Constellation {
        let r = 2f64.sqrt();
        Constellation::new(
            vec![vec![r, 0.0], vec![-r, 0.0], vec![0.0, r], vec![0.0, -r]],
            None,
        )
        .unwrap()
    }

    // Independent double loops over ordered pairs, no shared kernels.
    fn oracle_rate(x: &Constellation, r: f64, n0: f64) -> f64 {
        let mut s = 0.0;
        for (i, a) in x.points().enumerate() {
            for (j, b) in x.points().enumerate() {
                if i == j {
                    continue;
                }
                let dist: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                if dist > r * (1.0 + 1e-12) {
                    continue;
                }
                let mut t = 1.0;
                for k in 0..a.len() {
                    t /= 1.0 + (a[k] - b[k]).powi(2) / (8.0 * n0);
                }
                s += t;
            }
        }
        let q = (x.len() as f64).log2();
        q - (1.0 + s / x.len() as f64).log2()
    }

    fn oracle_diversity(x: &Constellation, r: f64, tol: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, a) in x.points().enumerate() {
            for (j, b) in x.points().enumerate() {
                if i == j {
                    continue;
                }
                let dist: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
                if dist > r * (1.0 + 1e-12) {
                    continue;
                }
                let mut count = 0;
                let mut prod = 1.0;
                for k in 0..a.len() {
                    if (a[k] - b[k]).abs() > tol {
                        count += 1;
                        prod *= (a[k] - b[k]).abs();
                    }
                }
                best = Some(match best {
                    None => (count, prod),
                    Some((c, p)) => (c.min(count), p.min(prod)),
                });
            }
        }
        best
    }

    #[test]
    fn two_point_cutoff_rate() {
        let x = line(&[1.0, -1.0]);
        let ch = ChannelSpec::new(0.5).unwrap();
        let r = cutoff_rate(&x, &ch);
        assert!((r - (1.0 - 1.5f64.log2())).abs() < 1e-15);
        assert!((r - 0.41504).abs() < 1e-5);
    }

    #[test]
    fn limits_in_noise() {
        let x = make_qam_product(16, 1).unwrap();
        assert!(cutoff_rate(&x, &ChannelSpec::new(1e12).unwrap()) < 1e-9);
        assert!((cutoff_rate(&x, &ChannelSpec::new(1e-12).unwrap()) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn ebn0_convention() {
        let ch = ChannelSpec::from_ebn0_db(10.0).unwrap();
        assert!((ch.n0() - 0.1).abs() < 1e-17);
        assert_eq!(ch.ebn0_db(), Some(10.0));
        assert!(ChannelSpec::new(0.0).is_err());
        assert!(ChannelSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn permutation_leaves_rate_unchanged() {
        let x = make_qam_product(16, 2).unwrap();
        let swapped = Constellation::new(
            x.points().map(|p| vec![p[2], p[0], p[3], p[1]]).collect(),
            None,
        )
        .unwrap();
        let ch = ChannelSpec::new(0.3).unwrap();
        assert_eq!(cutoff_rate(&x, &ch), cutoff_rate(&swapped, &ch));
    }

    #[test]
    fn conditional_bound_special_fades() {
        let x = make_qam_product(4, 2).unwrap();
        let ch = ChannelSpec::new(0.4).unwrap();
        let zero = r0_conditional(&x, &[0.0; 4], &ch).unwrap();
        assert!(zero.abs() < 1e-12);
        let ones = r0_conditional(&x, &[1.0; 4], &ch).unwrap();
        let mut s = 0.0;
        for a in x.points() {
            for b in x.points() {
                let e: f64 = a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum();
                if e > 0.0 {
                    s += (-e / (8.0 * 0.4)).exp();
                }
            }
        }
        assert!((ones - (4.0 - (1.0 + s / 16.0).log2())).abs() < 1e-12);
        assert!(r0_conditional(&x, &[1.0; 3], &ch).is_err());
        assert!(r0_conditional(&x, &[1.0, -1.0, 1.0, 1.0], &ch).is_err());
    }

    #[test]
    fn single_channel_estimate_is_that_draw() {
        let x = make_qam_product(4, 1).unwrap();
        let ch = ChannelSpec::new(0.2).unwrap();
        let est = r0_expected_mc(&x, &ch, 1, 17).unwrap();
        let h = sample_fade(2, &mut ChaCha8Rng::seed_from_u64(17));
        let direct = r0_conditional(&x, h.as_slice(), &ch).unwrap();
        assert!((est.mean - direct).abs() < 1e-12);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(r0_expected_mc(&x, &ch, 1, 17).unwrap(), est);
    }

    #[test]
    fn jensen_direction() {
        let x = normalize_unit_bit_energy(&make_qam_product(16, 1).unwrap()).unwrap();
        for db in [0.0, 6.0, 12.0] {
            let ch = ChannelSpec::from_ebn0_db(db).unwrap();
            let est = r0_expected_mc(&x, &ch, 10_000, 3).unwrap();
            assert!(est.mean >= cutoff_rate(&x, &ch) - 3.0 * est.stderr);
        }
    }

    #[test]
    fn local_rate_edge_cases() {
        let x = make_qam_product(4, 2).unwrap();
        let ch = ChannelSpec::new(0.25).unwrap();
        assert_eq!(
            local_cutoff_rate(&x, Radius::Infinite, &ch).to_bits(),
            cutoff_rate(&x, &ch).to_bits()
        );
        assert_eq!(local_cutoff_rate(&x, Radius::Finite(1.0), &ch), 4.0);
        // Radius 2 keeps exactly the m n = 64 ordered pairs at distance 2.
        let term: f64 = 1.0 / (1.0 + 4.0 / (8.0 * 0.25));
        let expected = 4.0 - (1.0 + 64.0 * term / 16.0).log2();
        assert!((local_cutoff_rate(&x, Radius::Finite(2.0), &ch) - expected).abs() < 1e-14);
    }

    #[test]
    fn diamond_diversity() {
        let x = diamond();
        let two = diversity_order(&x, Radius::Finite(2.0), COORDINATE_TOL);
        assert_eq!(two.order, 2);
        assert!(!two.empty_ball);
        assert_eq!(diversity_order(&x, Radius::Infinite, COORDINATE_TOL).order, 1);
        let empty = diversity_order(&x, Radius::Finite(1.0), COORDINATE_TOL);
        assert!(empty.empty_ball);
        assert_eq!(empty.order, 2);
        assert!(min_product_distance(&x, Radius::Finite(1.0), COORDINATE_TOL).empty_ball);
    }

    #[test]
    fn product_distance_examples() {
        let x = Constellation::new(vec![vec![0.0, 0.0], vec![1.0, 2.0]], None).unwrap();
        let d = min_product_distance(&x, Radius::Infinite, COORDINATE_TOL);
        assert_eq!(d.value, 2.0);
        assert!((d.normalized - 2f64.sqrt()).abs() < 1e-15);
        let cube = make_qam_product(4, 2).unwrap();
        assert_eq!(min_product_distance(&cube, Radius::Infinite, COORDINATE_TOL).value, 2.0);
        assert_eq!(diversity_order(&cube, Radius::Infinite, COORDINATE_TOL).order, 1);
    }

    #[test]
    fn high_snr_sum_examples() {
        let x = Constellation::new(vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]], None).unwrap();
        for n0 in [1e-3, 0.1, 2.0] {
            let ch = ChannelSpec::new(n0).unwrap();
            assert!((high_snr_sum(&x, &ch, COORDINATE_TOL) - 4.0 * n0).abs() < 1e-15);
        }
        let cube = make_qam_product(4, 2).unwrap();
        let ch = ChannelSpec::new(1e-4).unwrap();
        let s0 = high_snr_sum(&cube, &ch, COORDINATE_TOL);
        let approx = 4.0 - (1.0 + s0 / 16.0).log2();
        assert!((approx - cutoff_rate(&cube, &ch)).abs() < 1e-3);
    }

    #[test]
    fn full_diversity_test_on_family() {
        assert!(!is_locally_fully_diverse(&RotationMatrix::identity(4), COORDINATE_TOL));
        let f = skew_family(2).unwrap();
        for t in [0.1, 0.7, 1.2, 1.5] {
            let q = rotation_at(&f, t);
            assert!(is_locally_fully_diverse(&q, COORDINATE_TOL));
            let y = rotate(&make_qam_product(4, 2).unwrap(), &q).unwrap();
            assert_eq!(diversity_order(&y, Radius::Finite(2.0), COORDINATE_TOL).order, 4);
        }
    }

    #[test]
    fn report_shape() {
        let x = make_qam_product(4, 2).unwrap();
        let ch = ChannelSpec::new(0.25).unwrap();
        let rep = metrics_report(&x, &ch, &[Radius::Finite(2.0), Radius::Infinite], COORDINATE_TOL);
        assert_eq!(rep.radii.len(), 2);
        assert_eq!(rep.radii[1].local_cutoff_rate, rep.cutoff_rate);
        assert_eq!(rep.radii[1].diversity_order.order, 1);
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["radii"][1]["radius"], "inf");
    }

    #[test]
    fn radius_parsing() {
        assert_eq!("inf".parse::<Radius>().unwrap(), Radius::Infinite);
        assert_eq!("2".parse::<Radius>().unwrap(), Radius::Finite(2.0));
        assert!("-1".parse::<Radius>().is_err());
        assert!("x".parse::<Radius>().is_err());
    }

    fn small_constellation() -> impl Strategy<Value = Constellation> {
        (1usize..=3, 1u32..=5)
            .prop_filter("grid holds enough points", |(n, bits)| 7usize.pow(*n as u32) >= 1 << bits)
            .prop_flat_map(|(n, bits)| {
                let cells: Vec<usize> = (0..7usize.pow(n as u32)).collect();
                (
                    Just(n),
                    proptest::sample::subsequence(cells, 1usize << bits),
                    0.2f64..2.0,
                )
            })
            .prop_map(|(n, cells, scale)| {
                let coords = cells
                    .iter()
                    .flat_map(|&c| (0..n).map(move |k| ((c / 7usize.pow(k as u32)) % 7) as f64 - 3.0))
                    .map(|v| v * scale)
                    .collect();
                Constellation::from_flat(n, coords, None).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn rate_bounds_and_radius_monotonicity(x in small_constellation(), n0 in 0.01f64..10.0) {
            let ch = ChannelSpec::new(n0).unwrap();
            let q = f64::from(x.bits());
            let r = cutoff_rate(&x, &ch);
            prop_assert!((0.0..=q).contains(&r));
            let mut last = f64::INFINITY;
            for radius in [0.5, 1.0, 2.0, 3.0, 5.0, 20.0] {
                let v = local_cutoff_rate(&x, Radius::Finite(radius), &ch);
                prop_assert!(v <= last + 1e-15);
                last = v;
            }
            prop_assert!((last - r).abs() < 1e-12);
        }

        #[test]
        fn pair_metrics_match_oracle(x in small_constellation(), n0 in 0.01f64..10.0, radius in 0.5f64..8.0) {
            let ch = ChannelSpec::new(n0).unwrap();
            let q = f64::from(x.bits());
            prop_assume!(x.len() > 1);
            for r in [Radius::Finite(radius), Radius::Infinite] {
                let rr = match r { Radius::Finite(v) => v, Radius::Infinite => f64::INFINITY };
                let expected = oracle_rate(&x, rr, n0).clamp(0.0, q);
                prop_assert!((local_cutoff_rate(&x, r, &ch) - expected).abs() < 1e-12);
                let sp = PairSpectrum::new(&x);
                prop_assert!((sp.local_cutoff_rate(r, &ch) - expected).abs() < 1e-12);
                let div = diversity_order(&x, r, COORDINATE_TOL);
                let dp = min_product_distance(&x, r, COORDINATE_TOL);
                match oracle_diversity(&x, rr, COORDINATE_TOL) {
                    None => {
                        prop_assert!(div.empty_ball && dp.empty_ball);
                        prop_assert!(sp.diversity_order(r, COORDINATE_TOL).empty_ball);
                    }
                    Some((l, p)) => {
                        prop_assert_eq!(div.order, l);
                        prop_assert_eq!(dp.value, p);
                        prop_assert_eq!(sp.diversity_order(r, COORDINATE_TOL).order, l);
                        prop_assert_eq!(sp.min_product_distance(r, COORDINATE_TOL).value, p);
                    }
                }
            }
        }

        #[test]
        fn sign_flips_leave_rate_unchanged(x in small_constellation(), n0 in 0.05f64..5.0, mask in 0u8..8) {
            let n = x.dim();
            let flipped = Constellation::new(
                x.points().map(|p| (0..n).map(|k| if mask >> k & 1 == 1 { -p[k] } else { p[k] }).collect()).collect(),
                None,
            ).unwrap();
            let ch = ChannelSpec::new(n0).unwrap();
            prop_assert!((cutoff_rate(&x, &ch) - cutoff_rate(&flipped, &ch)).abs() < 1e-13);
        }

        #[test]
        fn diversity_non_increasing_in_radius(x in small_constellation()) {
            prop_assume!(x.len() > 1);
            let mut last_l = usize::MAX;
            let mut last_d = f64::INFINITY;
            for radius in [1.0, 2.0, 3.0, 5.0, 50.0] {
                let l = diversity_order(&x, Radius::Finite(radius), COORDINATE_TOL);
                let d = min_product_distance(&x, Radius::Finite(radius), COORDINATE_TOL);
                prop_assert!(l.order <= last_l);
                prop_assert!(d.value <= last_d);
                last_l = l.order;
                last_d = d.value;
            }
        }

        #[test]
        fn planted_zero_breaks_local_full_diversity(
            entries in proptest::collection::vec(-1.0f64..1.0, 16),
            plant in proptest::bool::ANY,
            row in 0usize..4,
        ) {
            use crate::liegroup::{expm_skew, SkewMatrix};
            let m = nalgebra::DMatrix::from_vec(4, 4, entries);
            let q = expm_skew(&SkewMatrix::antisymmetrize(&m)).unwrap();
            let q = if plant {
                // Givens rotation zeroing entry (row, 0) against (row, 1).
                let (a, b) = (q.get(row, 0), q.get(row, 1));
                let rho = a.hypot(b);
                let (c, s) = (b / rho, -a / rho);
                let mut g = nalgebra::DMatrix::<f64>::identity(4, 4);
                g[(0, 0)] = c; g[(0, 1)] = -s; g[(1, 0)] = s; g[(1, 1)] = c;
                let mut z = q.as_matrix() * g;
                z[(row, 0)] = 0.0;
                RotationMatrix::new(z).unwrap()
            } else {
                q
            };
            let fully = is_locally_fully_diverse(&q, COORDINATE_TOL);
            let y = rotate(&make_qam_product(4, 2).unwrap(), &q).unwrap();
            let l = diversity_order(&y, Radius::Finite(2.0), COORDINATE_TOL).order;
            prop_assert_eq!(fully, l == 4);
        }
    }
}
