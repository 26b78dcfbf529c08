//! Real-category contrast and cone-metric profiles.
//!
//! `f₋₁(x) = x/2 + ‖x‖/4 · e₁` is an immersion of the punctured real ball into
//! the ball whose Jacobian has no limit at the origin. Pulling back the real
//! hyperbolic metric therefore gives a constant-curvature metric with a
//! non-removable point singularity, which the complex theory rules out.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dsl::{catalog, CatalogParams};
use crate::engine::{curvature_at, hsc_from, random_unit, real_rm_with_steps, MetricField};
use crate::error::{Error, Result};
use crate::linalg::{c, CVec};
use crate::report::VerificationReport;

type VecFn = dyn Fn(&DVector<f64>) -> Result<DVector<f64>> + Send + Sync;
type MatFn = dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>> + Send + Sync;

/// A map of the punctured real unit ball with its Jacobian.
#[derive(Clone)]
pub struct RealMap {
    pub n: usize,
    pub label: String,
    eval: Arc<VecFn>,
    jacobian: Arc<MatFn>,
}

impl RealMap {
    pub fn new(n: usize, label: &str, eval: Arc<VecFn>, jacobian: Arc<MatFn>) -> Self {
        Self {
            n,
            label: label.to_string(),
            eval,
            jacobian,
        }
    }

    pub fn f_minus_one(n: usize) -> Self {
        Self::new(
            n,
            "f_minus_one",
            Arc::new(|x: &DVector<f64>| f_minus_one(x)),
            Arc::new(|x: &DVector<f64>| f_minus_one_jacobian(x)),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::new(
            n,
            "identity",
            Arc::new(move |x: &DVector<f64>| {
                check_punctured(x)?;
                Ok(x.clone())
            }),
            Arc::new(move |x: &DVector<f64>| {
                check_punctured(x)?;
                Ok(DMatrix::identity(x.len(), x.len()))
            }),
        )
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        (self.jacobian)(x)
    }
}

fn check_punctured(x: &DVector<f64>) -> Result<()> {
    let r = x.norm();
    if !r.is_finite() {
        return Err(Error::NonFinite {
            point: x.iter().map(|&v| [v, 0.0]).collect(),
        });
    }
    if r == 0.0 {
        return Err(Error::Puncture("the origin is excluded".into()));
    }
    if r >= 1.0 {
        return Err(Error::Domain {
            point: x.iter().map(|&v| [v, 0.0]).collect(),
            reason: "outside the unit ball".into(),
        });
    }
    Ok(())
}

/// `x/2 + ‖x‖/4 · e₁` on `0 < ‖x‖ < 1`.
pub fn f_minus_one(x: &DVector<f64>) -> Result<DVector<f64>> {
    check_punctured(x)?;
    let mut y = x * 0.5;
    y[0] += 0.25 * x.norm();
    Ok(y)
}

/// `I/2 + e₁ uᵀ/4` with `u = x/‖x‖`.
pub fn f_minus_one_jacobian(x: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_punctured(x)?;
    let n = x.len();
    let u = x / x.norm();
    let mut j = DMatrix::identity(n, n) * 0.5;
    for k in 0..n {
        j[(0, k)] += 0.25 * u[k];
    }
    Ok(j)
}

/// Grid of `k` points per axis on `[-extent, extent]ⁿ`, restricted to the
/// punctured open unit ball.
pub fn punctured_grid(n: usize, k: usize, extent: f64) -> Vec<DVector<f64>> {
    let axis: Vec<f64> = (0..k)
        .map(|i| if k == 1 { 0.0 } else { -extent + 2.0 * extent * i as f64 / (k - 1) as f64 })
        .collect();
    let mut out = Vec::new();
    for mut flat in 0..k.pow(n as u32) {
        let x = DVector::from_fn(n, |_, _| {
            let v = axis[flat % k];
            flat /= k;
            v
        });
        let r = x.norm();
        if r > 0.0 && r < 1.0 {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobianSweep {
    pub min_det: f64,
    pub location: Vec<f64>,
    pub points: usize,
    /// `(x, det J(x))` per grid point.
    #[serde(skip)]
    pub rows: Vec<(DVector<f64>, f64)>,
}

pub fn jacobian_minimum(map: &RealMap, grid: &[DVector<f64>]) -> Result<JacobianSweep> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut best = (f64::INFINITY, 0);
    for (i, x) in grid.iter().enumerate() {
        let d = map.jacobian(x)?.determinant();
        if d < best.0 {
            best = (d, i);
        }
        rows.push((x.clone(), d));
    }
    Ok(JacobianSweep {
        min_det: best.0,
        location: grid.get(best.1).map(|x| x.iter().copied().collect()).unwrap_or_default(),
        points: grid.len(),
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Jump {
    pub direction: Vec<f64>,
    /// Jacobian at the smallest radius along `+direction`, row-major.
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
    /// Largest entrywise difference between the two one-sided limits.
    pub jump: f64,
    /// Change of the one-sided estimates between the two smallest radii.
    pub convergence: f64,
}

/// One-sided Jacobian limits at the origin along `±d` for each direction,
/// estimated at the radii given (decreasing to 0).
pub fn derivative_jump(map: &RealMap, directions: &[DVector<f64>], radii: &[f64]) -> Result<Vec<Jump>> {
    if radii.len() < 2 || radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter("radii must be positive and strictly decreasing".into()));
    }
    let mut out = Vec::with_capacity(directions.len());
    for d in directions {
        let u = d / d.norm();
        let at = |r: f64, s: f64| map.jacobian(&(&u * (s * r)));
        let k = radii.len();
        let (p1, p0) = (at(radii[k - 1], 1.0)?, at(radii[k - 2], 1.0)?);
        let (m1, m0) = (at(radii[k - 1], -1.0)?, at(radii[k - 2], -1.0)?);
        let jump = (&p1 - &m1).amax();
        let convergence = (&p1 - p0).amax().max((&m1 - m0).amax());
        out.push(Jump {
            direction: u.iter().copied().collect(),
            plus: p1.transpose().iter().copied().collect(),
            minus: m1.transpose().iter().copied().collect(),
            jump,
            convergence,
        });
    }
    Ok(out)
}

/// Real model metric of curvature `c` at `y` (ball/stereographic form).
pub fn real_model_metric(c_model: f64, y: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = y.len();
    let r2 = y.norm_squared();
    let factor = if c_model == 0.0 {
        1.0
    } else {
        let denom = 1.0 + c_model * r2;
        if !(denom > 0.0) {
            return Err(Error::Domain {
                point: y.iter().map(|&v| [v, 0.0]).collect(),
                reason: "outside the model ball".into(),
            });
        }
        4.0 / (denom * denom)
    };
    Ok(DMatrix::identity(n, n) * factor)
}

/// `Jᵀ G_c(f(x)) J`.
pub fn real_pullback_metric(map: &RealMap, c_model: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let j = map.jacobian(x)?;
    let g = real_model_metric(c_model, &map.eval(x)?)?;
    Ok(j.transpose() * g * j)
}

/// Sectional curvature of the pullback metric on the plane `span(u, v)`.
///
/// Difference steps scale with `‖x‖`: the probe maps are smooth only away
/// from the origin.
pub fn real_sectional_curvature(map: &RealMap, c_model: f64, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let metric = |p: &DVector<f64>| real_pullback_metric(map, c_model, p);
    let g = metric(x)?;
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    let area2 = ip(u, u) * ip(v, v) - ip(u, v).powi(2);
    if !(area2 > 1e-12 * ip(u, u) * ip(v, v)) {
        return Err(Error::InvalidParameter("degenerate plane".into()));
    }
    let scale = x.norm().min(1.0);
    let rm = real_rm_with_steps(&metric, x, u, v, u, v, 1e-4 * scale, 1e-3 * scale)?;
    Ok(rm / area2)
}

/// `g`-orthonormal pair from two random vectors, redrawn while nearly
/// dependent.
fn random_plane(g: &DMatrix<f64>, n: usize, rng: &mut ChaCha8Rng) -> (DVector<f64>, DVector<f64>) {
    let ip = |a: &DVector<f64>, b: &DVector<f64>| (a.transpose() * g * b)[(0, 0)];
    loop {
        let u = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let v = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let u = &u / ip(&u, &u).sqrt();
        let w = &v - &u * ip(&u, &v);
        let len = ip(&w, &w).sqrt();
        if len > 0.25 * ip(&v, &v).sqrt() {
            return (u, w / len);
        }
    }
}

/// Sampled curvature constancy of the pullback: residual `max |K − c|`.
pub fn pullback_curvature_report(map: &RealMap, c_model: f64, samples: usize, seed: u64, tol: f64) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = map.n;
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for _ in 0..samples {
        let dir = DVector::from_fn(n, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let r = 0.1 + 0.8 * rng.gen::<f64>();
        let x = &dir / dir.norm() * r;
        let k = real_pullback_metric(map, c_model, &x).and_then(|g| {
            let (u, v) = random_plane(&g, n, &mut rng);
            real_sectional_curvature(map, c_model, &x, &u, &v)
        });
        match k {
            Ok(k) => worst = worst.max((k - c_model).abs()),
            Err(e) => {
                worst = f64::INFINITY;
                notes.push(e.to_string());
            }
        }
    }
    let mut r = VerificationReport::new("pullback_curvature", worst, tol)
        .with_metric("c", c_model)
        .with_metric("samples", samples as f64);
    for n in notes {
        r = r.with_note(n);
    }
    r
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileRow {
    pub point: Vec<[f64; 2]>,
    pub hsc: f64,
    /// Determinant of the metric matrix.
    pub det: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeProfile {
    pub entry: String,
    pub beta: Vec<f64>,
    pub rows: Vec<ProfileRow>,
    /// Least-squares slope of `log g₁₁` against `log |z₁|`.
    pub fitted_exponent: f64,
    pub expected_exponent: f64,
    /// Volume near the divisor is finite iff the exponent exceeds −2.
    pub integrable: bool,
    pub hsc_min: f64,
    pub hsc_max: f64,
}

/// HSC and metric growth along a ray `z₁ = t e^{iθ}` toward the divisor
/// `{z₁ = 0}`, with the remaining coordinates fixed at `rest`.
pub fn cone_profile(entry: &str, beta: &[f64], rest: &[C64Pair], distances: &[f64], seed: u64) -> Result<ConeProfile> {
    if entry != "cone-flat" && entry != "cone-log" {
        return Err(Error::InvalidParameter(format!("`{entry}` is not a cone entry")));
    }
    let n = beta.len();
    if rest.len() + 1 != n {
        return Err(Error::Dimension {
            expected: n - 1,
            got: rest.len(),
        });
    }
    let field: MetricField = catalog(entry, &CatalogParams::new(n).with_beta(beta))?.into_field()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(distances.len());
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    let (mut hmin, mut hmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let theta: f64 = 0.3;
    for &t in distances {
        let z = CVec::from_fn(n, |i, _| if i == 0 { c(t * theta.cos(), t * theta.sin()) } else { c(rest[i - 1][0], rest[i - 1][1]) });
        let comps = curvature_at(&field, &z)?;
        let mut h_lo = f64::INFINITY;
        let mut h_hi = f64::NEG_INFINITY;
        for _ in 0..4 {
            let x = random_unit(&comps.metric, &mut rng);
            let h = hsc_from(&comps, &x)?;
            h_lo = h_lo.min(h);
            h_hi = h_hi.max(h);
        }
        hmin = hmin.min(h_lo);
        hmax = hmax.max(h_hi);
        let g = &comps.metric;
        let (lx, ly) = (t.ln(), g[(0, 0)].re.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        rows.push(ProfileRow {
            point: crate::linalg::to_pairs(&z),
            hsc: 0.5 * (h_lo + h_hi),
            det: g.determinant().re,
            distance: t,
        });
    }
    let k = distances.len() as f64;
    let slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    let expected = 2.0 * (beta[0] - 1.0);
    Ok(ConeProfile {
        entry: entry.to_string(),
        beta: beta.to_vec(),
        rows,
        fitted_exponent: slope,
        expected_exponent: expected,
        integrable: slope > -2.0,
        hsc_min: hmin,
        hsc_max: hmax,
    })
}

/// A complex coordinate as `[re, im]`.
pub type C64Pair = [f64; 2];

/// Geometric distances `start · ratioᵏ` while they stay at least `floor`.
pub fn geometric_distances(start: f64, ratio: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = start;
    while t >= floor && out.len() < 64 {
        out.push(t);
        t *= ratio;
    }
    out
}
