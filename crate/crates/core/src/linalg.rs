//! Small dense complex linear algebra helpers shared by the geometry modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{pairs, Error, Result};

pub type C64 = Complex64;
pub type CVec = DVector<C64>;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cvec(values: &[C64]) -> CVec {
    CVec::from_column_slice(values)
}

/// Build a complex vector from `[re, im]` pairs.
pub fn cvec_from_pairs(values: &[[f64; 2]]) -> CVec {
    CVec::from_iterator(values.len(), values.iter().map(|p| c(p[0], p[1])))
}

pub fn to_pairs(v: &CVec) -> Vec<[f64; 2]> {
    pairs(v.as_slice())
}

pub fn unit(n: usize, k: usize) -> CVec {
    let mut v = CVec::zeros(n);
    v[k] = c(1.0, 0.0);
    v
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Euclidean norm of a complex vector.
pub fn norm(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian inner product `η^H M ξ` of the metric convention used throughout:
/// a Hermitian matrix `M` acts on tangent vectors by `|ξ|² = ξ^H M ξ`.
pub fn hermitian_form(m: &CMat, xi: &CVec, eta: &CVec) -> C64 {
    (eta.adjoint() * m * xi)[(0, 0)]
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Operator (spectral) norm.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// Lower Cholesky factor `L` with `M = L L^H`; fails if `M` is not positive definite.
pub fn cholesky(m: &CMat, at: &CVec) -> Result<CMat> {
    let herm = hermitian_part(m);
    if herm.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite { point: pairs(at.as_slice()) });
    }
    let n = herm.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = herm[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { point: pairs(at.as_slice()) });
        }
        let djj = d.sqrt();
        l[(j, j)] = c(djj, 0.0);
        for i in j + 1..n {
            let mut s = herm[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Unitary frame obtained by Gram–Schmidt over the coordinate frame: the
/// upper-triangular `E` with positive diagonal and `E^H M E = I`.
pub fn orthonormal_frame(m: &CMat, at: &CVec) -> Result<CMat> {
    let l = cholesky(m, at)?;
    let n = m.nrows();
    let linv = l
        .solve_lower_triangular(&identity(n))
        .ok_or_else(|| Error::NotPositiveDefinite { point: pairs(at.as_slice()) })?;
    Ok(linv.adjoint())
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

/// Real tangent vector with interleaved components `(x₁, y₁, …, xₙ, yₙ)`,
/// identified with the complex vector `ξ_k = x_k + i y_k`. The complex
/// structure acts as multiplication by `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTangent(pub DVector<f64>);

impl RealTangent {
    pub fn from_complex(xi: &CVec) -> Self {
        let mut v = DVector::zeros(2 * xi.len());
        for (k, z) in xi.iter().enumerate() {
            v[2 * k] = z.re;
            v[2 * k + 1] = z.im;
        }
        Self(v)
    }

    pub fn to_complex(&self) -> CVec {
        let n = self.0.len() / 2;
        CVec::from_iterator(n, (0..n).map(|k| c(self.0[2 * k], self.0[2 * k + 1])))
    }

    pub fn dim(&self) -> usize {
        self.0.len() / 2
    }

    /// Apply the complex structure `J`.
    pub fn j(&self) -> Self {
        Self::from_complex(&(self.to_complex() * I))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }
}

/// Riemannian inner product `g(X, Y) = Re(η^H M ξ)` induced by a Hermitian metric.
pub fn real_inner(m: &CMat, x: &RealTangent, y: &RealTangent) -> f64 {
    hermitian_form(m, &x.to_complex(), &y.to_complex()).re
}

/// The `2n × 2n` real symmetric matrix of the Riemannian metric.
pub fn real_metric_matrix(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    let basis: Vec<CVec> = (0..2 * n)
        .map(|a| {
            let mut v = CVec::zeros(n);
            v[a / 2] = if a % 2 == 0 { c(1.0, 0.0) } else { I };
            v
        })
        .collect();
    DMatrix::from_fn(2 * n, 2 * n, |a, b| hermitian_form(m, &basis[a], &basis[b]).re)
}
