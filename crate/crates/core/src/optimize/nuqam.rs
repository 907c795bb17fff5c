use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::constellation::{make_nuqam, NuqamParams};
use crate::error::{Error, Result};
use crate::metrics::{cutoff_rate, ChannelSpec};

/// Number of perturbed starting points used when multi-start is requested.
pub const DEFAULT_PERTURBED_STARTS: usize = 4;

#[derive(Debug, Clone, Serialize)]
pub struct NuqamOptions {
    pub max_iters: usize,
    /// Stop once the gradient norm falls below this value.
    pub grad_tol: f64,
    /// Central difference step, relative to each `alpha_i`.
    pub fd_step: f64,
    /// Extra starts drawn by perturbing `init`; 0 runs from `init` only.
    pub perturbed_starts: usize,
    pub seed: u64,
}

impl Default for NuqamOptions {
    fn default() -> Self {
        NuqamOptions {
            max_iters: 10_000,
            grad_tol: 1e-7,
            fd_step: 1e-6,
            perturbed_starts: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaDescentResult {
    /// Optimal levels, scaled to average energy `P = q`.
    pub alpha: NuqamParams,
    /// Cutoff rate at `alpha`, bits.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
}

/// Average energy `2 (M - 1) / 3` of square `M`-QAM with odd-integer levels,
/// `M = 2^q`.
pub fn standard_qam_energy(q_bits: u32) -> f64 {
    2.0 * (2f64.powi(q_bits as i32) - 1.0) / 3.0
}

/// `R(X(alpha))` with the constellation scaled to unit energy per bit.
pub fn nuqam_objective(alpha: &NuqamParams, ch: &ChannelSpec) -> Result<f64> {
    let p = f64::from(alpha.bits());
    let x = make_nuqam(&alpha.with_energy(p)?)?;
    let r = cutoff_rate(&x, ch);
    if !r.is_finite() {
        return Err(Error::NonFinite("NUQAM objective"));
    }
    Ok(r)
}

/// Steepest ascent of `alpha -> R(X(alpha))` with central finite differences.
///
/// Every iterate is projected back to positive, strictly increasing levels
/// and rescaled to energy `P = q`, so the objective is effectively a function
/// of the level shape only. Steps start at twice the last accepted step and
/// are halved until the objective increases.
pub fn optimize_nuqam(
    q_bits: u32,
    ch: &ChannelSpec,
    init: &NuqamParams,
    opts: &NuqamOptions,
) -> Result<AlphaDescentResult> {
    if ![4, 6, 8, 10].contains(&q_bits) {
        return Err(Error::InvalidParameter(format!(
            "NUQAM bits must be 4, 6, 8 or 10, got {q_bits}"
        )));
    }
    if init.bits() != q_bits {
        return Err(Error::InvalidParameter(format!(
            "{} levels per half axis give {} bits, expected {q_bits}",
            init.alpha().len(),
            init.bits()
        )));
    }
    if !(opts.fd_step > 0.0) || !(opts.grad_tol > 0.0) {
        return Err(Error::InvalidParameter("fd_step and grad_tol must be positive".into()));
    }

    let mut best = ascend(init, ch, opts)?;
    if opts.perturbed_starts > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let noise = Normal::<f64>::new(0.0, 0.1).expect("valid normal");
        for _ in 0..opts.perturbed_starts {
            let raw: Vec<f64> = init
                .alpha()
                .iter()
                .map(|a| a * noise.sample(&mut rng).exp())
                .collect();
            let start = project(raw)?;
            let run = ascend(&start, ch, opts)?;
            if run.objective > best.objective {
                best = run;
            }
        }
    }
    Ok(best)
}

fn ascend(init: &NuqamParams, ch: &ChannelSpec, opts: &NuqamOptions) -> Result<AlphaDescentResult> {
    let p = f64::from(init.bits());
    let mut alpha = init.with_energy(p)?;
    let mut value = nuqam_objective(&alpha, ch)?;
    let mut step = 1.0;
    let mut iterations = 0;
    loop {
        let grad = fd_gradient(&alpha, ch, opts.fd_step)?;
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < opts.grad_tol {
            return Ok(done(alpha, value, iterations, true, gnorm));
        }
        if iterations >= opts.max_iters {
            return Ok(done(alpha, value, iterations, false, gnorm));
        }
        step *= 2.0;
        let accepted = loop {
            let raw: Vec<f64> = alpha.alpha().iter().zip(&grad).map(|(a, g)| a + step * g).collect();
            let candidate = project(raw)?.with_energy(p)?;
            let v = nuqam_objective(&candidate, ch)?;
            if v > value {
                break Some((candidate, v));
            }
            step *= 0.5;
            if step < 1e-16 {
                break None;
            }
        };
        match accepted {
            Some((a, v)) => {
                alpha = a;
                value = v;
                iterations += 1;
            }
            // No increase along the gradient at any step size: a stationary
            // point up to the resolution of the difference quotient.
            None => return Ok(done(alpha, value, iterations, false, gnorm)),
        }
    }
}

fn done(alpha: NuqamParams, objective: f64, iterations: usize, converged: bool, gradient_norm: f64) -> AlphaDescentResult {
    AlphaDescentResult {
        alpha,
        objective,
        iterations,
        converged,
        gradient_norm,
    }
}

fn fd_gradient(alpha: &NuqamParams, ch: &ChannelSpec, rel: f64) -> Result<Vec<f64>> {
    let a = alpha.alpha();
    (0..a.len())
        .map(|i| {
            let h = rel * a[i];
            let mut plus = a.to_vec();
            let mut minus = a.to_vec();
            plus[i] += h;
            minus[i] -= h;
            let fp = nuqam_objective(&project(plus)?, ch)?;
            let fm = nuqam_objective(&project(minus)?, ch)?;
            Ok((fp - fm) / (2.0 * h))
        })
        .collect()
}

/// Nearest admissible level set: sorted, positive and strictly increasing.
fn project(mut raw: Vec<f64>) -> Result<NuqamParams> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("NUQAM parameters"));
    }
    raw.sort_by(f64::total_cmp);
    let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::Degenerate("NUQAM parameters collapsed to zero"));
    }
    let floor = 1e-9 * scale;
    let mut last = 0.0;
    for v in raw.iter_mut() {
        *v = v.max(last + floor);
        last = *v;
    }
    NuqamParams::new(raw)
}
