//! Direct Riemannian curvature from a real metric by nested finite
//! differences. Slow; used as an independent check of the complex formula and
//! for real (non-Kähler) probes.

use nalgebra::{DMatrix, DVector};

use super::field::MetricField;
use crate::error::{Error, Result};
use crate::linalg::{real_metric_matrix, CVec, RealTangent};

/// Step for metric derivatives inside the Christoffel symbols.
pub const METRIC_STEP: f64 = 1e-4;
/// Step for the derivative of the Christoffel symbols.
pub const CHRISTOFFEL_STEP: f64 = 1e-3;

pub type RealMetricFn<'a> = dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>> + 'a;

/// Christoffel symbols `Γ^a_{bc}` stored as `gamma[a][(b, c)]`.
pub fn christoffel(metric: &RealMetricFn, x: &DVector<f64>, h: f64) -> Result<Vec<DMatrix<f64>>> {
    let m = x.len();
    let g = metric(x)?;
    let ginv = g
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Geometry("singular real metric".into()))?;
    let mut dg = Vec::with_capacity(m);
    for d in 0..m {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[d] += h;
        xm[d] -= h;
        dg.push((metric(&xp)? - metric(&xm)?) / (2.0 * h));
    }
    // Lowered symbols Γ_{d,bc} = ½(∂_b g_{dc} + ∂_c g_{db} − ∂_d g_{bc}).
    let mut gamma = vec![DMatrix::zeros(m, m); m];
    for b in 0..m {
        for cc in 0..m {
            let lower: Vec<f64> = (0..m)
                .map(|d| 0.5 * (dg[b][(d, cc)] + dg[cc][(d, b)] - dg[d][(b, cc)]))
                .collect();
            for (a, ga) in gamma.iter_mut().enumerate() {
                ga[(b, cc)] = (0..m).map(|d| ginv[(a, d)] * lower[d]).sum();
            }
        }
    }
    Ok(gamma)
}

fn apply(gamma: &[DMatrix<f64>], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(gamma.len(), gamma.iter().map(|ga| (u.transpose() * ga * v)[(0, 0)]))
}

/// `Rm(X,Y,Z,W) = g(R(X,Y)Z, W)` with `R(X,Y)Z = −∇_X∇_Y Z + ∇_Y∇_X Z` for the
/// constant-coefficient extensions of the vectors.
pub fn real_rm(
    metric: &RealMetricFn,
    x0: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<f64> {
    real_rm_with_steps(metric, x0, x, y, z, w, METRIC_STEP, CHRISTOFFEL_STEP)
}

/// [`real_rm`] with explicit steps `(h_metric, h_christoffel)`; shrink both
/// near a point where the metric is not smooth.
#[allow(clippy::too_many_arguments)]
pub fn real_rm_with_steps(
    metric: &RealMetricFn,
    x0: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
    h_metric: f64,
    h: f64,
) -> Result<f64> {
    let gamma = christoffel(metric, x0, h_metric)?;
    let directional = |dir: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>| -> Result<DVector<f64>> {
        let gp = christoffel(metric, &(x0 + dir * h), h_metric)?;
        let gm = christoffel(metric, &(x0 - dir * h), h_metric)?;
        Ok((apply(&gp, a, b) - apply(&gm, a, b)) / (2.0 * h))
    };
    // ∇_X ∇_Y Z = (∂_X Γ)(Y, Z) + Γ(X, Γ(Y, Z)).
    let xyz = directional(x, y, z)? + apply(&gamma, x, &apply(&gamma, y, z));
    let yxz = directional(y, x, z)? + apply(&gamma, y, &apply(&gamma, x, z));
    let r = yxz - xyz;
    let g = metric(x0)?;
    Ok((w.transpose() * g * r)[(0, 0)])
}

/// Sectional curvature of the plane spanned by `x`, `y`.
pub fn real_sectional(metric: &RealMetricFn, x0: &DVector<f64>, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let g = metric(x0)?;
    let gxx = (x.transpose() * &g * x)[(0, 0)];
    let gyy = (y.transpose() * &g * y)[(0, 0)];
    let gxy = (x.transpose() * &g * y)[(0, 0)];
    let area2 = gxx * gyy - gxy * gxy;
    if !(area2 > 0.0) {
        return Err(Error::InvalidParameter("degenerate plane".into()));
    }
    Ok(real_rm(metric, x0, x, y, x, y)? / area2)
}

/// `Rm` evaluated from the real Riemannian metric of a Kähler field. Agrees
/// with [`super::curvature::rm`] to finite-difference accuracy.
pub fn rm_oracle(
    field: &MetricField,
    z: &CVec,
    x: &RealTangent,
    y: &RealTangent,
    zz: &RealTangent,
    w: &RealTangent,
) -> Result<f64> {
    let metric = |p: &DVector<f64>| -> Result<DMatrix<f64>> {
        let zc = RealTangent(p.clone()).to_complex();
        Ok(real_metric_matrix(&field.metric_at(&zc)?))
    };
    let x0 = RealTangent::from_complex(z).0;
    real_rm(&metric, &x0, &x.0, &y.0, &zz.0, &w.0)
}
