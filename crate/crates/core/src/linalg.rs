//! Dense linear algebra on small matrices.
//!
//! Vectors are plain `[f64]` slices; [`Mat`] is a row-major dense matrix.
//! Norms are restricted to the three cost norms used throughout the crate,
//! see [`NormKind`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// Largest dimension for which sign-vertex enumeration is attempted.
pub const VERTEX_ENUMERATION_CAP: usize = 24;

/// One of the `l1`, `l2`, `linf` vector norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormKind {
    L1,
    L2,
    LInf,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::L1, NormKind::L2, NormKind::LInf];

    /// The Hölder conjugate: `1/r + 1/s = 1`.
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::LInf,
            NormKind::L2 => NormKind::L2,
            NormKind::LInf => NormKind::L1,
        }
    }

    /// `1/r`, with `1/inf = 0`.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormKind::L1 => 1.0,
            NormKind::L2 => 0.5,
            NormKind::LInf => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::L1 => "1",
            NormKind::L2 => "2",
            NormKind::LInf => "inf",
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "l1" | "L1" => Ok(NormKind::L1),
            "2" | "l2" | "L2" => Ok(NormKind::L2),
            "inf" | "linf" | "Linf" | "LInf" | "INF" => Ok(NormKind::LInf),
            _ => Err(Error::InvalidConfig("norm must be one of 1, 2, inf")),
        }
    }
}

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Mat { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Mat::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// `A x`. Panics if `x.len() != cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `A^T y`. Panics if `y.len() != rows`.
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_matvec dimension");
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += yi * a;
            }
        }
        out
    }

    /// `A B`. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `diag(scale) A`.
    pub fn scale_rows(&self, scale: &[f64]) -> Mat {
        assert_eq!(scale.len(), self.rows, "scale_rows dimension");
        let mut out = self.clone();
        for (i, &s) in scale.iter().enumerate() {
            for v in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *v *= s;
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

pub fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add_scaled(a: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    a.iter().zip(d).map(|(x, y)| x + t * y).collect()
}

/// `e_plus - e_minus` in dimension `k`.
pub fn basis_difference(k: usize, plus: usize, minus: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[plus] += 1.0;
    v[minus] -= 1.0;
    v
}

/// `||v||_r`.
pub fn vec_norm(v: &[f64], r: NormKind) -> f64 {
    match r {
        NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
        NormKind::L2 => libm::sqrt(v.iter().map(|x| x * x).sum()),
        NormKind::LInf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A unit-`r` vector `h` maximizing `<g, h>`, so that `<g, h> = ||g||_s`.
///
/// For `L1` the coordinate of largest magnitude wins, lowest index on ties.
/// For `L1`/`LInf` a zero `g` yields the zero vector; for `L2` it is an
/// error, which attack loops treat as a stalled step.
pub fn dual_norm_maximizer(g: &[f64], r: NormKind) -> Result<Vec<f64>> {
    match r {
        NormKind::LInf => Ok(g.iter().map(|&x| sign(x)).collect()),
        NormKind::L2 => {
            let n = vec_norm(g, NormKind::L2);
            if n == 0.0 {
                return Err(Error::ZeroGradient);
            }
            Ok(g.iter().map(|x| x / n).collect())
        }
        NormKind::L1 => {
            let mut h = vec![0.0; g.len()];
            let mut best = 0usize;
            for (i, x) in g.iter().enumerate() {
                if x.abs() > g[best].abs() {
                    best = i;
                }
            }
            if let Some(&gb) = g.get(best) {
                h[best] = sign(gb);
            }
            Ok(h)
        }
    }
}

/// Euclidean projection of `xi` onto `{z : ||z - anchor||_r <= radius}`.
pub fn project_ball(xi: &[f64], anchor: &[f64], radius: f64, r: NormKind) -> Vec<f64> {
    debug_assert_eq!(xi.len(), anchor.len());
    let radius = radius.max(0.0);
    let d = sub(xi, anchor);
    let norm = vec_norm(&d, r);
    if norm <= radius {
        return xi.to_vec();
    }
    let mut p = match r {
        NormKind::LInf => d.iter().map(|x| x.clamp(-radius, radius)).collect(),
        NormKind::L2 => d.iter().map(|x| x * (radius / norm)).collect(),
        NormKind::L1 => project_l1(&d, radius),
    };
    // Round-off guard: pull the point back inside if it overshoots.
    let pn = vec_norm(&p, r);
    if pn > radius && pn > 0.0 {
        let s = radius / pn;
        for v in &mut p {
            *v *= s;
        }
    }
    anchor.iter().zip(&p).map(|(a, x)| a + x).collect()
}

/// Sort-based projection onto the L1 ball of the given radius, via the
/// simplex projection of `|d|`.
fn project_l1(d: &[f64], radius: f64) -> Vec<f64> {
    if radius == 0.0 {
        return vec![0.0; d.len()];
    }
    let mut mags: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (j as f64 + 1.0);
        if m - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    d.iter()
        .map(|&x| sign(x) * (x.abs() - theta).max(0.0))
        .collect()
}

/// Induced operator norm `||A||_{r->s} = sup_{||u||_r = 1} ||A u||_s`.
///
/// Closed forms cover `L1 -> s` (largest column `s`-norm), `r -> LInf`
/// (largest row norm in the dual of `r`) and `L2 -> L2` (largest singular
/// value). `LInf -> {L1, L2}` maximizes over the sign vertices of the unit
/// cube, and `L2 -> L1` uses `||A^T||_{inf->2}`; both enumerate at most
/// `2^24` vertices.
pub fn op_norm(a: &Mat, r: NormKind, s: NormKind) -> Result<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    match (r, s) {
        (NormKind::L1, _) => Ok((0..a.cols())
            .map(|j| vec_norm(&a.col(j), s))
            .fold(0.0, f64::max)),
        (_, NormKind::LInf) => Ok((0..a.rows())
            .map(|i| vec_norm(a.row(i), r.dual()))
            .fold(0.0, f64::max)),
        (NormKind::L2, NormKind::L2) => Ok(spectral_norm(a)),
        (NormKind::LInf, _) => max_over_sign_vertices(a, s),
        (NormKind::L2, NormKind::L1) => max_over_sign_vertices(&a.transpose(), NormKind::L2),
    }
}

/// `max_{sigma in {-1,1}^n} ||A sigma||_s`, evaluating each vertex directly.
/// `sigma` and `-sigma` give the same norm, so the first sign is pinned.
pub fn max_over_sign_vertices(a: &Mat, s: NormKind) -> Result<f64> {
    let n = a.cols();
    if n > VERTEX_ENUMERATION_CAP {
        return Err(Error::DimensionTooLarge {
            dim: n,
            cap: VERTEX_ENUMERATION_CAP,
        });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    let mut image = vec![0.0; a.rows()];
    for bits in 0u64..(1u64 << (n - 1)) {
        for (i, out) in image.iter_mut().enumerate() {
            let row = a.row(i);
            let mut acc = row[0];
            for (j, &v) in row.iter().enumerate().skip(1) {
                if bits >> (j - 1) & 1 == 1 {
                    acc -= v;
                } else {
                    acc += v;
                }
            }
            *out = acc;
        }
        best = best.max(vec_norm(&image, s));
    }
    Ok(best)
}

/// Largest singular value, from the top eigenvalue of the smaller Gram matrix.
pub fn spectral_norm(a: &Mat) -> f64 {
    let gram = if a.rows() < a.cols() {
        a.matmul(&a.transpose())
    } else {
        a.transpose().matmul(a)
    };
    let n = gram.rows();
    let eig = symmetric_eigenvalues(gram.data().to_vec(), n);
    libm::sqrt(eig.into_iter().fold(0.0, f64::max).max(0.0))
}

/// Eigenvalues of a symmetric `n x n` matrix (row-major) by cyclic Jacobi
/// rotations.
pub fn symmetric_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
    let scale: f64 = a.iter().map(|v| v * v).sum();
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
