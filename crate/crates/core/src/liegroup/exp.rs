use nalgebra::DMatrix;

use super::{RotationMatrix, SkewMatrix};
use crate::error::{Error, Result};

/// Truncation order of the Taylor polynomial used after scaling.
const TAYLOR_ORDER: u32 = 12;
/// Scaled arguments are brought below this Frobenius norm.
const SCALING_THRESHOLD: f64 = 0.25;
/// Eigenvalues closer than this to -1 have no principal logarithm.
const BRANCH_TOLERANCE: f64 = 1e-8;

/// Matrix exponential of a skew-symmetric matrix.
///
/// Scaling and squaring: `A` is divided by `2^s` until its Frobenius norm is
/// at most 1/4, the order-12 Taylor polynomial is evaluated in Horner form and
/// squared `s` times. The truncation error at that norm is below 1e-18.
pub fn expm_skew(a: &SkewMatrix) -> Result<RotationMatrix> {
    let e = expm(a.as_matrix())?;
    RotationMatrix::new(e)
}

pub(crate) fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("exponential argument"));
    }
    let norm = a.norm();
    let squarings = if norm > SCALING_THRESHOLD {
        (norm / SCALING_THRESHOLD).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::NonFinite("exponential argument norm overflows"));
    }
    let x = a * 2f64.powi(-squarings);
    let identity = DMatrix::<f64>::identity(n, n);
    let mut t = identity.clone();
    for k in (1..=TAYLOR_ORDER).rev() {
        t = &identity + (&x * &t) / f64::from(k);
    }
    for _ in 0..squarings {
        t = &t * &t;
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("exponential overflowed"));
    }
    Ok(t)
}

/// Principal logarithm of a rotation matrix.
///
/// Inverse scaling and squaring: square roots are taken until the matrix is
/// within 1/4 of the identity, then `log X = 2 atanh((X - I)(X + I)^{-1})` is
/// summed as a series. The square root of a rotation without eigenvalue -1 is
/// the orthogonal polar factor of `I + Q`.
///
/// Fails with [`Error::LogBranch`] when an eigenvalue lies within 1e-8 of -1.
pub fn logm_rotation(q: &RotationMatrix) -> Result<SkewMatrix> {
    let n = q.dim();
    let identity = DMatrix::<f64>::identity(n, n);
    // Q is normal, so the singular values of I + Q are |1 + lambda_i|.
    let shifted = &identity + q.as_matrix();
    let distance = shifted
        .clone()
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if distance < BRANCH_TOLERANCE {
        return Err(Error::LogBranch { distance });
    }

    let mut x = q.as_matrix().clone();
    let mut roots = 0;
    while (&x - &identity).norm() > SCALING_THRESHOLD {
        x = polar_factor(&(&identity + &x))?;
        roots += 1;
        if roots > 64 {
            return Err(Error::NonFinite("logarithm square-root iteration"));
        }
    }

    let denom = (&x + &identity)
        .try_inverse()
        .ok_or(Error::LogBranch { distance })?;
    let w = (&x - &identity) * denom;
    let w2 = &w * &w;
    let mut power = w.clone();
    let mut sum = w.clone();
    let mut j = 1u32;
    loop {
        power = &power * &w2;
        let term = &power / f64::from(2 * j + 1);
        sum += &term;
        j += 1;
        if term.norm() <= 1e-18 * sum.norm().max(1e-300) || j > 200 {
            break;
        }
    }
    let log = sum * (2.0 * 2f64.powi(roots));
    Ok(SkewMatrix::antisymmetrize(&log))
}

/// The orthogonal factor `U V^t` of the SVD `m = U S V^t`.
pub fn polar_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("polar decomposition input"));
    }
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::NonFinite("singular value decomposition")),
    };
    Ok(u * v_t)
}
