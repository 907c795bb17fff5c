//! Finite signal sets in R^n.
//!
//! A [`Constellation`] holds `m = 2^q` distinct points of a common dimension
//! and, optionally, a `q`-bit label per point. Labels are stored as integers
//! whose most significant of the `q` bits is printed first.
//!
//! QAM and NUQAM sets are direct products of a one-dimensional level set with
//! itself. Levels are labeled by the reflected binary Gray code of their
//! ascending index, and the label of a point concatenates the per-axis labels
//! in coordinate order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::liegroup::RotationMatrix;

/// Largest supported `q = log2(m)`.
pub const MAX_BITS: u32 = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<u64>>,
    energy: f64,
}

impl Constellation {
    /// Builds a constellation from explicit points, validating every invariant.
    pub fn new(points: Vec<Vec<f64>>, labels: Option<Vec<u64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidConstellation("no points".into()))?;
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
            return Err(Error::InvalidConstellation(format!(
                "point {i} has dimension {}, expected {dim}",
                p.len()
            )));
        }
        Self::from_flat(dim, points.into_iter().flatten().collect(), labels)
    }

    /// Builds a constellation from row-major coordinates (`dim` per point).
    pub fn from_flat(dim: usize, coords: Vec<f64>, labels: Option<Vec<u64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConstellation("dimension must be positive".into()));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::InvalidConstellation(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConstellation("non-finite coordinate".into()));
        }
        let m = coords.len() / dim;
        if !m.is_power_of_two() {
            return Err(Error::InvalidConstellation(format!(
                "size {m} is not a power of two"
            )));
        }
        let q = m.trailing_zeros();
        if q > MAX_BITS {
            return Err(Error::InvalidConstellation(format!(
                "2^{q} points exceeds the supported 2^{MAX_BITS}"
            )));
        }
        // -0.0 and 0.0 are the same point.
        let coords: Vec<f64> = coords.into_iter().map(|v| v + 0.0).collect();
        check_distinct(dim, &coords)?;
        if let Some(labels) = &labels {
            check_labels(labels, m, q)?;
        }
        let energy = mean_energy(dim, &coords);
        Ok(Constellation {
            dim,
            coords,
            labels,
            energy,
        })
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points `m`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Bits per point, `q = log2(m)`.
    pub fn bits(&self) -> u32 {
        self.len().trailing_zeros()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinates of all points.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[u64]> {
        self.labels.as_deref()
    }

    /// Label of point `i` as a `q`-character bit string.
    pub fn label_string(&self, i: usize) -> Option<String> {
        self.labels
            .as_ref()
            .map(|l| format_label(l[i], self.bits()))
    }

    /// Average energy `(1/m) sum |x|^2`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Same points, labels dropped.
    pub fn without_labels(&self) -> Self {
        Constellation {
            labels: None,
            ..self.clone()
        }
    }

    /// Replaces each coordinate by `f(coordinate)`; re-validates.
    fn map_points(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut coords = vec![0.0; self.coords.len()];
        for (src, dst) in self
            .coords
            .chunks_exact(self.dim)
            .zip(coords.chunks_exact_mut(self.dim))
        {
            f(src, dst);
        }
        Constellation::from_flat(self.dim, coords, self.labels.clone())
    }

    /// Writes the JSON document `{"n": .., "points": [[..]], "labels": [..]}`.
    pub fn to_json(&self) -> String {
        let file = ConstellationFile {
            n: self.dim,
            points: self.points().map(<[f64]>::to_vec).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| l.iter().map(|&v| format_label(v, self.bits())).collect()),
        };
        serde_json::to_string_pretty(&file).expect("constellation serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ConstellationFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let m = file.points.len();
        if let Some((i, _)) = file.points.iter().enumerate().find(|(_, p)| p.len() != file.n) {
            return Err(Error::InvalidConstellation(format!(
                "point {i} does not have dimension n = {}",
                file.n
            )));
        }
        let labels = match file.labels {
            None => None,
            Some(strings) => {
                if !m.is_power_of_two() {
                    return Err(Error::InvalidConstellation(format!(
                        "size {m} is not a power of two"
                    )));
                }
                let q = m.trailing_zeros();
                Some(
                    strings
                        .iter()
                        .map(|s| parse_label(s, q))
                        .collect::<Result<Vec<u64>>>()?,
                )
            }
        };
        Constellation::from_flat(file.n, file.points.into_iter().flatten().collect(), labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Constellation::from_json(&text)
    }

    /// One point per row, header `x1,..,xn[,label]`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.dim).map(|i| format!("x{i}")).collect();
        out.push_str(&header.join(","));
        if self.labels.is_some() {
            out.push_str(",label");
        }
        out.push('\n');
        for (i, p) in self.points().enumerate() {
            let row: Vec<String> = p.iter().map(|&v| g17(v)).collect();
            out.push_str(&row.join(","));
            if let Some(label) = self.label_string(i) {
                out.push(',');
                out.push_str(&label);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ConstellationFile {
    n: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

/// Non-uniformity parameters `alpha_1 < .. < alpha_k` of an `M`-NUQAM set,
/// `k = sqrt(M) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuqamParams {
    alpha: Vec<f64>,
}

impl NuqamParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || !alpha.len().is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "NUQAM needs a power-of-two number of levels per half axis, got {}",
                alpha.len()
            )));
        }
        if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(
                "NUQAM parameters must be finite and strictly positive".into(),
            ));
        }
        if alpha.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter(
                "NUQAM parameters must be strictly increasing".into(),
            ));
        }
        Ok(NuqamParams { alpha })
    }

    /// The uniform levels `1, 3, .., 2k - 1`, i.e. standard QAM.
    pub fn uniform(k: usize) -> Result<Self> {
        NuqamParams::new((0..k).map(|i| (2 * i + 1) as f64).collect())
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Bits per 2D point, `q = 2 log2(2k)`.
    pub fn bits(&self) -> u32 {
        2 * (2 * self.alpha.len()).trailing_zeros()
    }

    /// Average energy of the 2D constellation built from these levels.
    pub fn energy(&self) -> f64 {
        2.0 * self.alpha.iter().map(|a| a * a).sum::<f64>() / self.alpha.len() as f64
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        NuqamParams::new(self.alpha.iter().map(|a| a * s).collect())
    }

    /// Rescales so that the 2D constellation has average energy `p`.
    pub fn with_energy(&self, p: f64) -> Result<Self> {
        self.scaled((p / self.energy()).sqrt())
    }
}

/// The `half_dims`-fold product of square `M`-QAM, coordinates in
/// `{±1, ±3, ..}`, Gray labeled per axis.
pub fn make_qam_product(order: usize, half_dims: usize) -> Result<Constellation> {
    if ![4, 16, 64, 256, 1024].contains(&order) {
        return Err(Error::UnsupportedOrder(order));
    }
    if half_dims == 0 {
        return Err(Error::InvalidParameter("half_dims must be at least 1".into()));
    }
    let side = (order as f64).sqrt().round() as usize;
    let levels: Vec<f64> = (0..side).map(|i| (2 * i) as f64 - (side - 1) as f64).collect();
    product_grid(&levels, 2 * half_dims)
}

/// The 2D product of `{-alpha_k, .., -alpha_1, alpha_1, .., alpha_k}` with
/// itself, Gray labeled per axis in ascending level order.
pub fn make_nuqam(params: &NuqamParams) -> Result<Constellation> {
    let alpha = params.alpha();
    let levels: Vec<f64> = alpha
        .iter()
        .rev()
        .map(|a| -a)
        .chain(alpha.iter().copied())
        .collect();
    product_grid(&levels, 2)
}

/// Uniformly rescaled copy with average energy `p`.
pub fn normalize_energy(x: &Constellation, p: f64) -> Result<Constellation> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("target energy must be positive, got {p}")));
    }
    if x.energy() == 0.0 {
        return Err(Error::Degenerate("all-zero constellation cannot be normalized"));
    }
    let s = (p / x.energy()).sqrt();
    x.map_points(|src, dst| {
        for (d, v) in dst.iter_mut().zip(src) {
            *d = v * s;
        }
    })
}

/// Normalizes to `P = q`, so that the energy per bit is 1.
pub fn normalize_unit_bit_energy(x: &Constellation) -> Result<Constellation> {
    normalize_energy(x, f64::from(x.bits()))
}

/// `Q X`: every point mapped by the rotation, labels kept.
pub fn rotate(x: &Constellation, q: &RotationMatrix) -> Result<Constellation> {
    if q.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: q.dim(),
        });
    }
    x.map_points(|src, dst| q.apply(src, dst))
}

/// Reflected binary Gray code of `i`.
pub fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

fn product_grid(levels: &[f64], dims: usize) -> Result<Constellation> {
    let side = levels.len();
    debug_assert!(side.is_power_of_two());
    let bits_per_axis = side.trailing_zeros();
    let total_bits = bits_per_axis as usize * dims;
    if total_bits > MAX_BITS as usize {
        return Err(Error::InvalidParameter(format!(
            "{total_bits} bits per point exceeds the supported {MAX_BITS}"
        )));
    }
    let m = 1usize << total_bits;
    let mut coords = Vec::with_capacity(m * dims);
    let mut labels = Vec::with_capacity(m);
    for index in 0..m {
        let mut label = 0u64;
        for axis in 0..dims {
            // Axis 0 varies slowest and owns the most significant bits.
            let shift = (dims - 1 - axis) * bits_per_axis as usize;
            let level = (index >> shift) & (side - 1);
            coords.push(levels[level]);
            label |= gray(level as u64) << shift;
        }
        labels.push(label);
    }
    Constellation::from_flat(dims, coords, Some(labels))
}

fn check_distinct(dim: usize, coords: &[f64]) -> Result<()> {
    let m = coords.len() / dim;
    let mut order: Vec<usize> = (0..m).collect();
    let row = |i: usize| &coords[i * dim..(i + 1) * dim];
    order.sort_unstable_by(|&a, &b| {
        row(a)
            .iter()
            .zip(row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if let Some(w) = order.windows(2).find(|w| row(w[0]) == row(w[1])) {
        return Err(Error::InvalidConstellation(format!(
            "points {} and {} coincide",
            w[0].min(w[1]),
            w[0].max(w[1])
        )));
    }
    Ok(())
}

fn check_labels(labels: &[u64], m: usize, q: u32) -> Result<()> {
    if labels.len() != m {
        return Err(Error::InvalidConstellation(format!(
            "{} labels for {m} points",
            labels.len()
        )));
    }
    let mut seen = vec![false; m];
    for &l in labels {
        if l >= m as u64 {
            return Err(Error::InvalidConstellation(format!(
                "label {l} does not fit in {q} bits"
            )));
        }
        if std::mem::replace(&mut seen[l as usize], true) {
            return Err(Error::InvalidConstellation(format!(
                "duplicate label {}",
                format_label(l, q)
            )));
        }
    }
    Ok(())
}

fn mean_energy(dim: usize, coords: &[f64]) -> f64 {
    let m = coords.len() / dim;
    coords.iter().map(|v| v * v).sum::<f64>() / m as f64
}

fn format_label(l: u64, q: u32) -> String {
    (0..q).rev().map(|b| if (l >> b) & 1 == 1 { '1' } else { '0' }).collect()
}

fn parse_label(s: &str, q: u32) -> Result<u64> {
    if s.len() != q as usize || !s.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(Error::InvalidConstellation(format!(
            "label {s:?} is not a {q}-bit string"
        )));
    }
    Ok(s.bytes().fold(0, |acc, b| (acc << 1) | u64::from(b - b'0')))
}
