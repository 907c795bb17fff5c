//! Matrices on the Lie algebra so(n) and the rotation group SO(n).
//!
//! The central object is the one-parameter family
//!
//! ```text
//! Q_n(t) = exp(t A_n) = cos(t) I + sin(t) A_n,      n = 2^k,
//! ```
//!
//! where `A_n` is a skew-symmetric matrix built from Hadamard blocks and
//! scaled so that `A_n^2 = -I`. The closed form follows from that identity
//! alone, so no matrix exponential is needed to walk the family.
//!
//! General exponentials and logarithms ([`expm_skew`], [`logm_rotation`]),
//! the gradient field `X_f(Q) = grad f(Q) Q^t - Q grad f(Q)^t` and the
//! geodesic descent built on it live in the submodules.

mod csv;
mod descent;
mod exp;

pub use self::csv::{matrix_from_csv, matrix_to_csv, read_matrix_csv, write_matrix_csv};
pub use self::descent::{geodesic_descent, DescentIterate, DescentOptions, DescentTrace, StopReason};
pub use self::exp::{expm_skew, logm_rotation, polar_factor};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest `k` accepted by the `2^k`-dimensional constructions.
pub const MAX_LOG2_DIM: u32 = 12;

/// Tolerance on `|QQ^t - I|_max` and `|det Q - 1|` for a valid rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-10;

/// A real skew-symmetric matrix, an element of so(n).
///
/// Antisymmetry holds exactly in the stored entries: `m[(i, j)] == -m[(j, i)]`
/// bit for bit, which also forces a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix(DMatrix<f64>);

impl SkewMatrix {
    /// Wraps `m` after checking exact antisymmetry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        let n = m.nrows();
        for i in 0..n {
            for j in i..n {
                if m[(i, j)] != -m[(j, i)] || !m[(i, j)].is_finite() {
                    return Err(Error::NotSkew { i, j });
                }
            }
        }
        Ok(SkewMatrix(m))
    }

    /// The skew part `(m - m^t) / 2`, antisymmetric to the last bit.
    pub fn antisymmetrize(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "antisymmetrize needs a square matrix");
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] - m[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = -v;
            }
        }
        SkewMatrix(out)
    }

    pub fn zeros(n: usize) -> Self {
        SkewMatrix(DMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// `s * self`; scalar multiples stay exactly antisymmetric.
    pub fn scaled(&self, s: f64) -> Self {
        SkewMatrix(&self.0 * s)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }
}

/// An element of SO(n), validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationMatrix(DMatrix<f64>);

impl RotationMatrix {
    /// Wraps `m` if `|mm^t - I|_max` and `|det m - 1|` are both within
    /// [`ROTATION_TOLERANCE`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_square(&m)?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rotation matrix entry"));
        }
        let orthogonality = orthogonality_error(&m);
        let det = (m.determinant() - 1.0).abs();
        if orthogonality > ROTATION_TOLERANCE || det > ROTATION_TOLERANCE {
            return Err(Error::NotRotation { orthogonality, det });
        }
        Ok(RotationMatrix(m))
    }

    /// Skips validation; callers must guarantee membership in SO(n).
    pub(crate) fn new_unchecked(m: DMatrix<f64>) -> Self {
        RotationMatrix(m)
    }

    pub fn identity(n: usize) -> Self {
        RotationMatrix(DMatrix::identity(n, n))
    }

    /// Nearest rotation to `m` in Frobenius norm (the orthogonal polar factor).
    ///
    /// Fails when the polar factor has determinant -1.
    pub fn project(m: &DMatrix<f64>) -> Result<Self> {
        RotationMatrix::new(polar_factor(m)?)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    /// Entry `q_ij`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// Writes `Q x` into `out`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate() {
                acc += self.0[(i, j)] * xj;
            }
            *o = acc;
        }
    }

    /// `|QQ^t - I|_max` of the stored entries.
    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.0)
    }
}

/// A generator `A` with `A^2 = -I`, so that `exp(tA) = cos(t) I + sin(t) A`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationFamily {
    generator: SkewMatrix,
}

impl RotationFamily {
    /// Tolerance on `|A^2 + I|_max`.
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(generator: SkewMatrix) -> Result<Self> {
        let n = generator.dim();
        if !n.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(n));
        }
        let dev = square_plus_identity(generator.as_matrix());
        if dev > Self::TOLERANCE {
            return Err(Error::NotComplexStructure(dev));
        }
        Ok(RotationFamily { generator })
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn generator(&self) -> &SkewMatrix {
        &self.generator
    }

    /// `Q(t) = cos(t) I + sin(t) A`.
    pub fn at(&self, t: f64) -> RotationMatrix {
        rotation_at(self, t)
    }
}

/// Sylvester's Hadamard matrix `H_{2^k}`: `H_1 = [1]`,
/// `H_{2m} = [[H_m, H_m], [H_m, -H_m]]`.
pub fn hadamard(k: u32) -> Result<DMatrix<f64>> {
    guard(k)?;
    let mut h = DMatrix::from_element(1, 1, 1.0);
    for _ in 0..k {
        h = double_block(&h, &h, &h, &(-&h));
    }
    Ok(h)
}

/// The unnormalized skew matrix `B_{2^k}`: `B_1 = [0]`,
/// `B_{2m} = [[B_m, H_m], [-H_m, B_m]]`.
///
/// `B^2 = -(2^k - 1) I` holds exactly in floating point since every entry
/// is a small integer.
pub fn hadamard_skew(k: u32) -> Result<DMatrix<f64>> {
    guard(k)?;
    let mut b = DMatrix::zeros(1, 1);
    let mut h = DMatrix::from_element(1, 1, 1.0);
    for _ in 0..k {
        b = double_block(&b, &h, &(-&h), &b);
        h = double_block(&h, &h, &h, &(-&h));
    }
    Ok(b)
}

/// The family `Q_{2^k}(t)` with generator `A_{2^k} = (2^k - 1)^{-1/2} B_{2^k}`.
pub fn skew_family(k: u32) -> Result<RotationFamily> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "skew family needs k >= 1 (so(1) is trivial)".into(),
        ));
    }
    let b = hadamard_skew(k)?;
    let scale = (((1u64 << k) - 1) as f64).sqrt().recip();
    let a = SkewMatrix::new(b * scale)?;
    // A^2 = -I is exact up to the rounding of `scale`; no need to re-multiply
    // a 4096 x 4096 matrix to check it.
    Ok(RotationFamily { generator: a })
}

/// `cos(t) I + sin(t) A` for the family generator `A`.
pub fn rotation_at(family: &RotationFamily, t: f64) -> RotationMatrix {
    let a = family.generator.as_matrix();
    let (s, c) = t.sin_cos();
    let mut m = a * s;
    for i in 0..m.nrows() {
        m[(i, i)] += c;
    }
    RotationMatrix::new_unchecked(m)
}

/// `X_f(Q) = grad f(Q) Q^t - Q grad f(Q)^t`.
///
/// Computed as `M - M^t` with `M = grad f(Q) Q^t`, so the result is
/// antisymmetric to the last bit.
pub fn gradient_field(grad: &DMatrix<f64>, q: &RotationMatrix) -> Result<SkewMatrix> {
    let n = q.dim();
    if grad.nrows() != n || grad.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: grad.nrows().max(grad.ncols()),
        });
    }
    let m = grad * q.as_matrix().transpose();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = m[(i, j)] - m[(j, i)];
            out[(i, j)] = v;
            out[(j, i)] = -v;
        }
    }
    Ok(SkewMatrix(out))
}

fn guard(k: u32) -> Result<()> {
    if k > MAX_LOG2_DIM {
        return Err(Error::DimensionGuard {
            k,
            max: MAX_LOG2_DIM,
        });
    }
    Ok(())
}

fn double_block(
    tl: &DMatrix<f64>,
    tr: &DMatrix<f64>,
    bl: &DMatrix<f64>,
    br: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = tl.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(tl);
    out.view_mut((0, n), (n, n)).copy_from(tr);
    out.view_mut((n, 0), (n, n)).copy_from(bl);
    out.view_mut((n, n), (n, n)).copy_from(br);
    out
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn orthogonality_error(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let g = m * m.transpose();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

fn square_plus_identity(a: &DMatrix<f64>) -> f64 {
    let sq = a * a;
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { -1.0 } else { 0.0 };
            worst = worst.max((sq[(i, j)] - target).abs());
        }
    }
    worst
}
