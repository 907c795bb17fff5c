//! Rayleigh fast-fading channel `y = h o x + z`.
//!
//! Each real coordinate sees an independent fade `h_i`, the modulus of a
//! circularly symmetric complex Gaussian with `E h_i^2 = 1`, and independent
//! Gaussian noise of variance `N0`. A fresh fade vector is drawn for every
//! transmitted point.
//!
//! Bit error rate simulation draws from ChaCha8 streams. The symbols of each
//! `Eb/N0` point are split into fixed blocks, and block `b` of point `p` uses
//! stream `(p << 32) | b` of the generator seeded with `seed`, so the report
//! does not depend on how blocks are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::metrics::ChannelSpec;

/// Symbols per independent random stream.
const BLOCK_SYMBOLS: u64 = 4096;

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub const RNG_ALGORITHM: &str = "ChaCha8";

/// Diagonal of the fade matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FadeVector(Vec<f64>);

impl FadeVector {
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidParameter(
                "fade entries must be finite and non-negative".into(),
            ));
        }
        Ok(FadeVector(h))
    }

    /// The unfaded channel.
    pub fn ones(n: usize) -> Self {
        FadeVector(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// `h_i = sqrt(g1^2 + g2^2)` with `g1, g2 ~ N(0, 1/2)` independent.
pub fn sample_fade<R: Rng + ?Sized>(n: usize, rng: &mut R) -> FadeVector {
    FadeVector(
        (0..n)
            .map(|_| {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                (0.5 * (g1 * g1 + g2 * g2)).sqrt()
            })
            .collect(),
    )
}

/// `y_i = h_i x_i + z_i`, `z_i ~ N(0, N0)`.
pub fn transmit<R: Rng + ?Sized>(
    x: &[f64],
    h: &FadeVector,
    ch: &ChannelSpec,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if h.dim() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: h.dim(),
        });
    }
    Ok(transmit_unchecked(x, h.as_slice(), ch.n0().sqrt(), rng))
}

fn transmit_unchecked<R: Rng + ?Sized>(x: &[f64], h: &[f64], sigma: f64, rng: &mut R) -> Vec<f64> {
    x.iter()
        .zip(h)
        .map(|(xi, hi)| {
            let z: f64 = rng.sample(StandardNormal);
            hi * xi + sigma * z
        })
        .collect()
}

/// Index minimizing `|y - h o x'|^2` over the constellation; ties go to the
/// lowest index.
pub fn ml_decode(x: &Constellation, y: &[f64], h: &FadeVector) -> Result<usize> {
    if y.len() != x.dim() || h.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: if y.len() != x.dim() { y.len() } else { h.dim() },
        });
    }
    Ok(ml_decode_unchecked(x, y, h.as_slice()))
}

fn ml_decode_unchecked(x: &Constellation, y: &[f64], h: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in x.points().enumerate() {
        let mut d = 0.0;
        for k in 0..p.len() {
            let e = y[k] - h[k] * p[k];
            d += e * e;
            if d >= best_d {
                break;
            }
        }
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Serialize)]
pub struct BerOptions {
    /// Lower bound on simulated bits per `Eb/N0` point.
    pub min_bits: u64,
    pub seed: u64,
}

impl Default for BerOptions {
    fn default() -> Self {
        BerOptions {
            min_bits: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRow {
    pub ebn0_db: Option<f64>,
    pub n0: f64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    /// 95% Wilson score interval for the bit error probability.
    pub ber_lo: f64,
    pub ber_hi: f64,
    pub symbols: u64,
    pub symbol_errors: u64,
    pub ser: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerReport {
    pub rng: String,
    pub rows: Vec<BerRow>,
}

impl BerReport {
    pub const CSV_HEADER: &'static str =
        "ebn0_db,bits,bit_errors,ber,ber_lo,ber_hi,symbol_errors,ser,seed";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.ebn0_db.map(g17).unwrap_or_default(),
                r.bits,
                r.bit_errors,
                g17(r.ber),
                g17(r.ber_lo),
                g17(r.ber_hi),
                r.symbol_errors,
                g17(r.ser),
                r.seed
            ));
        }
        out
    }
}

/// Wilson score interval for `k` successes in `n` trials at quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Simulates uniform symbols through the channel with ML decoding at each
/// noise level and counts bit errors through the label Hamming distance.
pub fn ber_monte_carlo(
    x: &Constellation,
    channels: &[ChannelSpec],
    opts: &BerOptions,
) -> Result<BerReport> {
    let labels = x.labels().ok_or(Error::MissingLabels)?;
    if opts.min_bits < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "min_bits must be at least 10000, got {}",
            opts.min_bits
        )));
    }
    let q = u64::from(x.bits());
    if q == 0 {
        return Err(Error::InvalidConstellation("a single point carries no bits".into()));
    }
    let symbols = opts.min_bits.div_ceil(q);
    let blocks = symbols.div_ceil(BLOCK_SYMBOLS);
    let m = x.len();
    let n = x.dim();

    let rows = channels
        .iter()
        .enumerate()
        .map(|(p, ch)| {
            let sigma = ch.n0().sqrt();
            let (bit_errors, symbol_errors) = (0..blocks)
                .into_par_iter()
                .map(|b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                    rng.set_stream(((p as u64) << 32) | b);
                    let count = BLOCK_SYMBOLS.min(symbols - b * BLOCK_SYMBOLS);
                    let mut bit_errors = 0u64;
                    let mut symbol_errors = 0u64;
                    for _ in 0..count {
                        let sent = rng.random_range(0..m);
                        let h = sample_fade(n, &mut rng);
                        let y = transmit_unchecked(x.point(sent), h.as_slice(), sigma, &mut rng);
                        let got = ml_decode_unchecked(x, &y, h.as_slice());
                        if got != sent {
                            symbol_errors += 1;
                            bit_errors += u64::from((labels[got] ^ labels[sent]).count_ones());
                        }
                    }
                    (bit_errors, symbol_errors)
                })
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            let bits = symbols * q;
            let (ber_lo, ber_hi) = wilson_interval(bit_errors, bits, Z95);
            BerRow {
                ebn0_db: ch.ebn0_db(),
                n0: ch.n0(),
                bits,
                bit_errors,
                ber: bit_errors as f64 / bits as f64,
                ber_lo,
                ber_hi,
                symbols,
                symbol_errors,
                ser: symbol_errors as f64 / symbols as f64,
                seed: opts.seed,
            }
        })
        .collect();

    Ok(BerReport {
        rng: RNG_ALGORITHM.to_string(),
        rows,
    })
}
