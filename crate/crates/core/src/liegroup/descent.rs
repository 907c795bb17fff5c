use nalgebra::DMatrix;
use serde::Serialize;

use super::exp::expm;
use super::{gradient_field, orthogonality_error, RotationMatrix, ROTATION_TOLERANCE};
use crate::error::{Error, Result};

/// Steps below this size end the descent.
const MIN_STEP: f64 = 1e-12;

/// Tuning knobs for [`geodesic_descent`].
#[derive(Debug, Clone, Serialize)]
pub struct DescentOptions {
    /// Initial step `h` tried at every iteration.
    pub step: f64,
    pub max_iters: usize,
    /// Stop once `|X_f(Q)|_F` falls to this value.
    pub grad_tol: f64,
    /// Polar re-orthonormalization period, in iterations.
    pub reorthonormalize_every: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            step: 0.1,
            max_iters: 5000,
            grad_tol: 1e-8,
            reorthonormalize_every: 50,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    StepUnderflow,
}

#[derive(Debug, Clone)]
pub struct DescentIterate {
    pub iteration: usize,
    pub rotation: RotationMatrix,
    pub objective: f64,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone)]
pub struct DescentTrace {
    pub iterates: Vec<DescentIterate>,
    pub converged: bool,
    pub reason: StopReason,
}

impl DescentTrace {
    pub fn last(&self) -> &DescentIterate {
        self.iterates.last().expect("trace holds the initial point")
    }

    pub fn final_rotation(&self) -> &RotationMatrix {
        &self.last().rotation
    }

    pub fn final_objective(&self) -> f64 {
        self.last().objective
    }
}

/// Minimizes `f` over SO(n) along geodesics.
///
/// Each iteration computes the skew gradient field `X = X_f(Q_k)` from the
/// Euclidean gradient and moves to `Q_{k+1} = exp(-h X) Q_k`. The step starts
/// at `opts.step` and is halved until the Armijo condition
/// `f(Q_{k+1}) <= f(Q_k) - c h |X|_F^2 / 2` holds, so accepted objective
/// values never increase.
///
/// Iterates are projected back onto SO(n) by polar decomposition every
/// `opts.reorthonormalize_every` iterations, and whenever `|QQ^t - I|_max`
/// exceeds 1e-10.
pub fn geodesic_descent<F, G>(
    mut f: F,
    mut grad_f: G,
    q0: &RotationMatrix,
    opts: &DescentOptions,
) -> Result<DescentTrace>
where
    F: FnMut(&RotationMatrix) -> f64,
    G: FnMut(&RotationMatrix) -> DMatrix<f64>,
{
    if !(opts.step > 0.0) || !opts.step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {}", opts.step)));
    }
    if !(opts.grad_tol > 0.0) {
        return Err(Error::InvalidParameter("grad_tol must be positive".into()));
    }
    let q0 = RotationMatrix::new(q0.as_matrix().clone())?;
    let mut q = q0;
    let mut fq = f(&q);
    if !fq.is_finite() {
        return Err(Error::NonFinite("objective at the initial point"));
    }

    let mut iterates = Vec::new();
    let mut iteration = 0;
    let (converged, reason) = loop {
        let grad = grad_f(&q);
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective gradient"));
        }
        let x = gradient_field(&grad, &q)?;
        let gnorm = x.frobenius_norm();
        iterates.push(DescentIterate {
            iteration,
            rotation: q.clone(),
            objective: fq,
            gradient_norm: gnorm,
        });
        if gnorm <= opts.grad_tol {
            break (true, StopReason::GradientTolerance);
        }
        if iteration >= opts.max_iters {
            break (false, StopReason::MaxIterations);
        }

        let reorth = opts.reorthonormalize_every > 0
            && (iteration + 1) % opts.reorthonormalize_every == 0;
        let mut h = opts.step;
        let accepted = loop {
            let step = expm(&(x.as_matrix() * -h))?;
            let mut candidate = step * q.as_matrix();
            if reorth || orthogonality_error(&candidate) > ROTATION_TOLERANCE {
                candidate = RotationMatrix::project(&candidate)?.into_matrix();
            }
            let candidate = RotationMatrix::new_unchecked(candidate);
            let fc = f(&candidate);
            if !fc.is_finite() {
                return Err(Error::NonFinite("objective during descent"));
            }
            if fc <= fq - opts.armijo * h * 0.5 * gnorm * gnorm {
                break Some((candidate, fc));
            }
            h *= 0.5;
            if h < MIN_STEP {
                break None;
            }
        };
        match accepted {
            Some((candidate, fc)) => {
                q = candidate;
                fq = fc;
                iteration += 1;
            }
            None => break (false, StopReason::StepUnderflow),
        }
    };

    Ok(DescentTrace {
        iterates,
        converged,
        reason,
    })
}
