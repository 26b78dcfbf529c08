//! The three simply connected model spaces of constant holomorphic sectional
//! curvature and their holomorphic isometry groups.
//!
//! Every isometry is an `(n+1)×(n+1)` complex matrix acting on homogeneous
//! coordinates `[z : 1]`. The flat group uses `[[U, b], [0, 1]]`, the ball group
//! preserves `diag(I, −1)` and the projective group is unitary. Metrics carry
//! the factor `4/|c|` so the ball is always the unit ball.

use std::sync::Arc;

use serde::Serialize;

use crate::dsl::ExprPotential;
use crate::engine::{Domain, MetricField};
use crate::error::{pairs, Error, Result};
use crate::linalg::{c, frobenius, identity, inverse, norm, op_norm, CMat, CVec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CurvatureSign {
    Negative,
    Zero,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpace {
    pub c: f64,
    pub dim: usize,
}

/// Largest affine coordinate magnitude kept in the standard chart.
pub const CHART_BOUND: f64 = 10.0;

/// A point of a model space in affine coordinates of chart `chart`. Chart `n`
/// is the standard chart `[a : 1]`; chart `k < n` places the `1` in slot `k`
/// and the coordinates in the remaining slots (only used when `c > 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint {
    pub coords: CVec,
    pub chart: usize,
}

impl ModelPoint {
    pub fn standard(coords: CVec) -> Self {
        let chart = coords.len();
        Self { coords, chart }
    }

    pub fn origin(n: usize) -> Self {
        Self::standard(CVec::zeros(n))
    }

    pub fn is_standard(&self) -> bool {
        self.chart == self.coords.len()
    }
}

/// Permutation swapping homogeneous slots `k` and `n` (identity for `k = n`).
fn chart_perm(n: usize, k: usize) -> CMat {
    let mut p = identity(n + 1);
    if k != n {
        p.swap_rows(k, n);
    }
    p
}

fn lift(p: &ModelPoint) -> CVec {
    let n = p.coords.len();
    let mut h = CVec::zeros(n + 1);
    h.rows_mut(0, n).copy_from(&p.coords);
    h[n] = c(1.0, 0.0);
    chart_perm(n, p.chart) * h
}

/// Affine coordinates of a homogeneous vector in chart `k`, with the
/// differential of that projection.
fn project_in(h: &CVec, k: usize) -> Option<(CVec, CMat)> {
    let n = h.len() - 1;
    let v = chart_perm(n, k) * h;
    let den = v[n];
    if den.norm() < 1e-300 {
        return None;
    }
    let a = CVec::from_fn(n, |i, _| v[i] / den);
    // d a = (dv[..n] − a dv[n]) / v[n], composed with the permutation.
    let mut dproj = CMat::zeros(n, n + 1);
    for i in 0..n {
        dproj[(i, i)] = c(1.0, 0.0) / den;
        dproj[(i, n)] = -a[i] / den;
    }
    Some((a, dproj * chart_perm(n, k)))
}

impl ModelSpace {
    pub fn new(c: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("model dimension must be at least 1".into()));
        }
        if !c.is_finite() {
            return Err(Error::InvalidParameter(format!("curvature must be finite, got {c}")));
        }
        Ok(Self { c, dim })
    }

    pub fn sign(&self) -> CurvatureSign {
        if self.c < 0.0 {
            CurvatureSign::Negative
        } else if self.c > 0.0 {
            CurvatureSign::Positive
        } else {
            CurvatureSign::Zero
        }
    }

    /// Constant factor multiplying the unit-normalized metric.
    pub fn scale(&self) -> f64 {
        if self.c == 0.0 {
            1.0
        } else {
            4.0 / self.c.abs()
        }
    }

    /// The same metric as a potential-backed field on the ball of `radius`.
    pub fn field(&self, radius: f64) -> MetricField {
        let n = self.dim;
        let sum: Vec<String> = (1..=n).map(|k| format!("abs2(z{k})")).collect();
        let text = match self.sign() {
            CurvatureSign::Zero => sum.join(" + "),
            CurvatureSign::Negative => format!("{:?}*(-log(1 - {}))", self.scale(), sum.join(" - ")),
            CurvatureSign::Positive => format!("{:?}*log(1 + {})", self.scale(), sum.join(" + ")),
        };
        let potential = ExprPotential::parse(&text, n).expect("model potential parses");
        MetricField::from_potential(n, Arc::new(potential), Domain::ball(radius))
    }

    pub fn check_point(&self, p: &ModelPoint) -> Result<()> {
        if p.coords.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: p.coords.len(),
            });
        }
        if p.coords.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { point: pairs(p.coords.as_slice()) });
        }
        if self.sign() == CurvatureSign::Negative && norm(&p.coords) >= 1.0 {
            return Err(Error::Domain {
                point: pairs(p.coords.as_slice()),
                reason: "outside the unit ball".into(),
            });
        }
        if self.sign() != CurvatureSign::Positive && !p.is_standard() {
            return Err(Error::ChartFailure("only the positive model uses alternate charts".into()));
        }
        Ok(())
    }

    /// Metric matrix at `p` in the coordinates of its chart.
    pub fn metric_at(&self, p: &ModelPoint) -> Result<CMat> {
        self.check_point(p)?;
        let z = &p.coords;
        let n = self.dim;
        let zz = z * z.adjoint();
        let r2 = z.norm_squared();
        let m = match self.sign() {
            CurvatureSign::Zero => identity(n),
            CurvatureSign::Negative => {
                let s = 1.0 - r2;
                (identity(n) * c(1.0 / s, 0.0) + zz * c(1.0 / (s * s), 0.0)) * c(self.scale(), 0.0)
            }
            CurvatureSign::Positive => {
                let s = 1.0 + r2;
                (identity(n) * c(1.0 / s, 0.0) - zz * c(1.0 / (s * s), 0.0)) * c(self.scale(), 0.0)
            }
        };
        Ok(m)
    }

    /// Choose a chart for a homogeneous vector: the standard chart while its
    /// coordinates stay within [`CHART_BOUND`], else the largest slot.
    fn project(&self, h: &CVec) -> Result<(ModelPoint, CMat)> {
        let n = self.dim;
        if let Some((a, d)) = project_in(h, n) {
            if self.sign() != CurvatureSign::Positive || a.iter().all(|x| x.norm() <= CHART_BOUND) {
                return Ok((ModelPoint::standard(a), d));
            }
        }
        if self.sign() != CurvatureSign::Positive {
            return Err(Error::Domain {
                point: pairs(h.as_slice()),
                reason: "point at infinity".into(),
            });
        }
        let k = (0..=n)
            .max_by(|&i, &j| h[i].norm().total_cmp(&h[j].norm()))
            .unwrap_or(n);
        let (a, d) = project_in(h, k).ok_or_else(|| Error::ChartFailure("zero homogeneous vector".into()))?;
        Ok((ModelPoint { coords: a, chart: k }, d))
    }

    /// Express `p` in chart `k`, returning the chart-transition differential.
    pub fn rechart(&self, p: &ModelPoint, k: usize) -> Result<(ModelPoint, CMat)> {
        let n = self.dim;
        let h = lift(p);
        let (a, d) = project_in(&h, k).ok_or_else(|| Error::ChartFailure(format!("point not in chart {k}")))?;
        let dlift = chart_perm(n, p.chart).columns(0, n).into_owned();
        Ok((ModelPoint { coords: a, chart: k }, d * dlift))
    }

    /// Standard-chart coordinates of `p`.
    pub fn standard_coords(&self, p: &ModelPoint) -> Result<CVec> {
        if p.is_standard() {
            return Ok(p.coords.clone());
        }
        self.rechart(p, self.dim).map(|(q, _)| q.coords)
    }

    /// Transvection taking the origin to `p` along a geodesic.
    pub fn transvection(&self, p: &ModelPoint) -> Result<ModelIsometry> {
        self.check_point(p)?;
        let n = self.dim;
        let a = &p.coords;
        let r2 = a.norm_squared();
        let mut m = identity(n + 1);
        match self.sign() {
            CurvatureSign::Zero => {
                m.view_mut((0, n), (n, 1)).copy_from(a);
            }
            CurvatureSign::Negative | CurvatureSign::Positive => {
                let neg = self.sign() == CurvatureSign::Negative;
                let gamma = if neg { 1.0 / (1.0 - r2).sqrt() } else { 1.0 / (1.0 + r2).sqrt() };
                if r2 > 0.0 {
                    let proj = a * a.adjoint() * c((gamma - 1.0) / r2, 0.0);
                    let block = identity(n) + proj;
                    m.view_mut((0, 0), (n, n)).copy_from(&block);
                }
                m.view_mut((0, n), (n, 1)).copy_from(&(a * c(gamma, 0.0)));
                let row = a.adjoint() * c(if neg { gamma } else { -gamma }, 0.0);
                m.view_mut((n, 0), (1, n)).copy_from(&row);
                m[(n, n)] = c(gamma, 0.0);
                m = chart_perm(n, p.chart) * m;
            }
        }
        Ok(ModelIsometry { model: *self, mat: m })
    }

    /// Homogeneous image of `exp_0(v)`; valid for all `v`.
    fn exp_origin_homogeneous(&self, v: &CVec) -> CVec {
        let n = self.dim;
        let t = norm(v);
        let mut h = CVec::zeros(n + 1);
        if t == 0.0 {
            h[n] = c(1.0, 0.0);
            return h;
        }
        let (s, co) = match self.sign() {
            CurvatureSign::Zero => (t, 1.0),
            CurvatureSign::Negative => (t.tanh(), 1.0),
            CurvatureSign::Positive => (t.sin(), t.cos()),
        };
        h.rows_mut(0, n).copy_from(&(v * c(s / t, 0.0)));
        h[n] = c(co, 0.0);
        h
    }

    fn exp_origin_isometry(&self, v: &CVec) -> Result<ModelIsometry> {
        let n = self.dim;
        let t = norm(v);
        if t == 0.0 {
            return Ok(ModelIsometry::identity(*self));
        }
        match self.sign() {
            CurvatureSign::Zero => self.transvection(&ModelPoint::standard(v.clone())),
            CurvatureSign::Negative => self.transvection(&ModelPoint::standard(v * c(t.tanh() / t, 0.0))),
            CurvatureSign::Positive => {
                // Rotation by angle t in the plane of [u : 0] and [0 : 1].
                let u = v * c(1.0 / t, 0.0);
                let mut m = identity(n + 1);
                let block = identity(n) + &u * u.adjoint() * c(t.cos() - 1.0, 0.0);
                m.view_mut((0, 0), (n, n)).copy_from(&block);
                m.view_mut((0, n), (n, 1)).copy_from(&(&u * c(t.sin(), 0.0)));
                m.view_mut((n, 0), (1, n)).copy_from(&(u.adjoint() * c(-t.sin(), 0.0)));
                m[(n, n)] = c(t.cos(), 0.0);
                Ok(ModelIsometry { model: *self, mat: m })
            }
        }
    }

    /// Geodesic exponential `exp_p(v)`.
    pub fn exp(&self, p: &ModelPoint, v: &CVec) -> Result<ModelPoint> {
        let tp = self.transvection(p)?;
        let (_, d0) = tp.differential(&ModelPoint::origin(self.dim))?;
        let w = d0
            .lu()
            .solve(v)
            .ok_or_else(|| Error::Geometry("singular transvection differential".into()))?;
        let h = tp.mat.clone() * self.exp_origin_homogeneous(&w);
        self.project(&h).map(|(q, _)| q)
    }

    /// Inverse of [`ModelSpace::exp`] within the injectivity radius.
    pub fn log(&self, p: &ModelPoint, q: &ModelPoint) -> Result<CVec> {
        let n = self.dim;
        let tp = self.transvection(p)?;
        self.check_point(q)?;
        let hq = tp.inverse()?.mat * lift(q);
        let top = hq.rows(0, n).into_owned();
        let bottom = hq[n];
        let w = match self.sign() {
            CurvatureSign::Zero => top / bottom,
            CurvatureSign::Negative => {
                let a = top / bottom;
                let r = norm(&a);
                if r >= 1.0 {
                    return Err(Error::Domain {
                        point: pairs(q.coords.as_slice()),
                        reason: "outside the unit ball".into(),
                    });
                }
                if r == 0.0 {
                    a
                } else {
                    &a * c(r.atanh() / r, 0.0)
                }
            }
            CurvatureSign::Positive => {
                let s = norm(&top);
                let co = bottom.norm();
                if co < 1e-12 * s.max(1.0) {
                    return Err(Error::NoConvergence {
                        what: "model logarithm (point on the cut locus)".into(),
                        residual: co,
                    });
                }
                if s == 0.0 {
                    CVec::zeros(n)
                } else {
                    let phase = bottom.conj() / co;
                    let theta = s.atan2(co);
                    top * (phase * (theta / s))
                }
            }
        };
        let (_, d0) = tp.differential(&ModelPoint::origin(n))?;
        Ok(d0 * w)
    }

    /// Geodesic distance.
    pub fn distance(&self, p: &ModelPoint, q: &ModelPoint) -> Result<f64> {
        let v = self.log(p, q)?;
        let m = self.metric_at(p)?;
        Ok(crate::linalg::hermitian_form(&m, &v, &v).re.max(0.0).sqrt())
    }

    /// The isometry translating along the geodesic `t ↦ exp_p(t v)` by unit
    /// time. Its differential at `p` is parallel transport to `exp_p(v)`.
    pub fn geodesic_translation(&self, p: &ModelPoint, v: &CVec) -> Result<ModelIsometry> {
        let tp = self.transvection(p)?;
        let (_, d0) = tp.differential(&ModelPoint::origin(self.dim))?;
        let w = d0
            .lu()
            .solve(v)
            .ok_or_else(|| Error::Geometry("singular transvection differential".into()))?;
        let tau = self.exp_origin_isometry(&w)?;
        Ok(tp.compose(&tau).compose(&tp.inverse()?))
    }

    /// Parallel transport of `v` from `p` along the geodesic to `q`, returned
    /// in the chart of the endpoint as computed (`q` is reprojected).
    pub fn parallel_transport(&self, p: &ModelPoint, q: &ModelPoint, v: &CVec) -> Result<(ModelPoint, CVec)> {
        let w = self.log(p, q)?;
        let sigma = self.geodesic_translation(p, &w)?;
        let (image, d) = sigma.differential(p)?;
        Ok((image, d * v))
    }

    /// The isometry `σ` with `σ(p) = q` and `dσ_p = a`.
    pub fn isometry_from_frame_data(&self, p: &ModelPoint, q: &ModelPoint, a: &CMat, tol: f64) -> Result<ModelIsometry> {
        let n = self.dim;
        let tp = self.transvection(p)?;
        let tq = self.transvection(q)?;
        let origin = ModelPoint::origin(n);
        let (_, dp) = tp.differential(&origin)?;
        let (_, dq) = tq.differential(&origin)?;
        let dq_inv = inverse(&dq).ok_or_else(|| Error::Geometry("singular transvection differential".into()))?;
        let l = dq_inv * a * dp;
        let deviation = frobenius(&(l.adjoint() * &l - identity(n)));
        if !(deviation <= tol) {
            return Err(Error::InvalidFrame { deviation });
        }
        let mut u = identity(n + 1);
        u.view_mut((0, 0), (n, n)).copy_from(&l);
        let rot = ModelIsometry { model: *self, mat: u };
        Ok(tq.compose(&rot).compose(&tp.inverse()?))
    }
}

/// A holomorphic isometry of a model space, as a matrix acting projectively.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelIsometry {
    pub model: ModelSpace,
    #[serde(serialize_with = "serialize_matrix")]
    pub mat: CMat,
}

fn serialize_matrix<S: serde::Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<[f64; 2]> = (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

impl ModelIsometry {
    pub fn identity(model: ModelSpace) -> Self {
        Self {
            model,
            mat: identity(model.dim + 1),
        }
    }

    /// Flat isometry `z ↦ U z + b`.
    pub fn affine(model: ModelSpace, u: &CMat, b: &CVec) -> Self {
        let n = model.dim;
        let mut m = identity(n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(u);
        m.view_mut((0, n), (n, 1)).copy_from(b);
        Self { model, mat: m }
    }

    /// The linear block `A` of `[[A, b], [cᵀ, d]]`, normalized so `d` is real
    /// positive when `d ≠ 0`.
    pub fn linear_part(&self) -> CMat {
        let n = self.model.dim;
        let d = self.mat[(n, n)];
        let scale = if d.norm() > 0.0 { d.conj() / (d.norm() * d.norm()) } else { c(1.0, 0.0) };
        self.mat.view((0, 0), (n, n)).into_owned() * scale
    }

    /// Translation part `b / d`.
    pub fn translation_part(&self) -> CVec {
        let n = self.model.dim;
        self.mat.view((0, n), (n, 1)).column(0).into_owned() / self.mat[(n, n)]
    }

    pub fn apply(&self, p: &ModelPoint) -> Result<ModelPoint> {
        self.differential(p).map(|(q, _)| q)
    }

    /// Image of `p` and the differential of the action there (chart to chart).
    pub fn differential(&self, p: &ModelPoint) -> Result<(ModelPoint, CMat)> {
        let n = self.model.dim;
        let h = &self.mat * lift(p);
        let (q, dproj) = self.model.project(&h)?;
        let dlift = chart_perm(n, p.chart).columns(0, n).into_owned();
        Ok((q, dproj * &self.mat * dlift))
    }

    pub fn compose(&self, other: &ModelIsometry) -> ModelIsometry {
        ModelIsometry {
            model: self.model,
            mat: &self.mat * &other.mat,
        }
    }

    pub fn inverse(&self) -> Result<ModelIsometry> {
        let mat = inverse(&self.mat).ok_or_else(|| Error::Geometry("singular isometry matrix".into()))?;
        Ok(ModelIsometry { model: self.model, mat })
    }

    /// Residual of the group-defining identity, after removing the projective
    /// scale.
    pub fn group_residual(&self) -> f64 {
        let n = self.model.dim;
        let det = self.mat.determinant();
        let unit = if det.norm() > 0.0 { det.powf(-1.0 / (n + 1) as f64) } else { c(1.0, 0.0) };
        let m = &self.mat * unit;
        match self.model.sign() {
            CurvatureSign::Zero => {
                let u = m.view((0, 0), (n, n)).into_owned();
                let bottom: f64 = (0..n).map(|j| m[(n, j)].norm()).sum::<f64>() + (m[(n, n)] - c(1.0, 0.0)).norm();
                frobenius(&(u.adjoint() * &u - identity(n))) + bottom
            }
            CurvatureSign::Negative => {
                let mut j = identity(n + 1);
                j[(n, n)] = c(-1.0, 0.0);
                frobenius(&(m.adjoint() * &j * &m - j))
            }
            CurvatureSign::Positive => frobenius(&(m.adjoint() * &m - identity(n + 1))),
        }
    }
}

/// Whether two isometries act identically on the samples; returns the
/// largest displacement between the images.
pub fn isometries_equal(a: &ModelIsometry, b: &ModelIsometry, samples: &[ModelPoint], tol: f64) -> Result<(bool, f64)> {
    let model = a.model;
    let mut worst: f64 = 0.0;
    for p in samples {
        let pa = a.apply(p)?;
        let pb = b.apply(p)?;
        let d = projective_gap(&model, &pa, &pb);
        worst = worst.max(d);
    }
    Ok((worst <= tol, worst))
}

/// Coordinate gap between two model points, comparing in a common chart.
pub fn projective_gap(model: &ModelSpace, a: &ModelPoint, b: &ModelPoint) -> f64 {
    if a.chart == b.chart {
        return norm(&(&a.coords - &b.coords));
    }
    match model.rechart(b, a.chart) {
        Ok((bb, _)) => norm(&(&a.coords - &bb.coords)),
        Err(_) => f64::INFINITY,
    }
}

/// Frame deviation `‖A₁ − A₂‖` in operator norm.
pub fn frame_deviation(a1: &CMat, a2: &CMat) -> f64 {
    op_norm(&(a1 - a2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cvec, hermitian_form, unit};

    fn ball() -> ModelSpace {
        ModelSpace::new(-4.0, 2).unwrap()
    }

    fn sphere() -> ModelSpace {
        ModelSpace::new(4.0, 2).unwrap()
    }

    fn flat() -> ModelSpace {
        ModelSpace::new(0.0, 2).unwrap()
    }

    fn pt(a: f64, b: f64, x: f64, y: f64) -> ModelPoint {
        ModelPoint::standard(cvec(&[c(a, b), c(x, y)]))
    }

    #[test]
    fn metric_values() {
        assert_eq!(flat().metric_at(&pt(0.3, 0.0, 0.0, 0.7)).unwrap(), identity(2));
        assert!(frobenius(&(ball().metric_at(&ModelPoint::origin(2)).unwrap() - identity(2))) < 1e-15);
        let m = ball().metric_at(&pt(0.5, 0.0, 0.0, 0.0)).unwrap();
        assert!((m[(0, 0)].re - 16.0 / 9.0).abs() < 1e-14);
        assert!((m[(1, 1)].re - 4.0 / 3.0).abs() < 1e-14);
        assert!(ball().metric_at(&pt(1.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn model_metric_matches_potential_field() {
        for model in [ball(), sphere(), ModelSpace::new(-1.0, 2).unwrap(), ModelSpace::new(2.0, 2).unwrap()] {
            let f = model.field(1.0);
            let p = pt(0.2, -0.3, 0.1, 0.4);
            let a = model.metric_at(&p).unwrap();
            let b = f.metric_at(&p.coords).unwrap();
            assert!(frobenius(&(a - b)) < 1e-12);
        }
    }

    #[test]
    fn exp_at_origin() {
        let q = flat().exp(&ModelPoint::origin(2), &unit(2, 0)).unwrap();
        assert!(norm(&(q.coords - unit(2, 0))) < 1e-15);
        for t in [0.1, 1.0, 2.5] {
            let q = ball().exp(&ModelPoint::origin(2), &(unit(2, 0) * c(t, 0.0))).unwrap();
            assert!((q.coords[0].re - t.tanh()).abs() < 1e-14);
        }
        let q = ball().exp(&ModelPoint::origin(2), &CVec::zeros(2)).unwrap();
        assert_eq!(q.coords, CVec::zeros(2));
        let v = ball().log(&ModelPoint::origin(2), &pt(1f64.tanh(), 0.0, 0.0, 0.0)).unwrap();
        assert!(norm(&(v - unit(2, 0))) < 1e-13);
    }

    #[test]
    fn exp_log_round_trip() {
        let cases = [(ball(), 1.0), (flat(), 1.0), (sphere(), 0.5)];
        for (model, bound) in cases {
            let p = pt(0.2, 0.1, -0.3, 0.25);
            let v = cvec(&[c(0.3, -0.2), c(0.1, 0.4)]);
            let v = &v * c(bound * 0.9 / norm(&v), 0.0);
            let q = model.exp(&p, &v).unwrap();
            let w = model.log(&p, &q).unwrap();
            assert!(norm(&(w - &v)) < 1e-10, "{model:?}");
        }
    }

    #[test]
    fn sphere_exp_crosses_into_another_chart() {
        let model = sphere();
        let v = unit(2, 0) * c(std::f64::consts::FRAC_PI_2 - 1e-4, 0.0);
        let q = model.exp(&ModelPoint::origin(2), &v).unwrap();
        assert!(!q.is_standard());
        let w = model.log(&ModelPoint::origin(2), &q).unwrap();
        assert!(norm(&(w - v)) < 1e-9);
    }

    #[test]
    fn transport_preserves_norm_and_commutes_with_j() {
        for model in [ball(), sphere()] {
            let p = pt(0.2, 0.1, -0.3, 0.25);
            let q = pt(-0.1, 0.3, 0.2, -0.2);
            let v = cvec(&[c(0.7, -0.2), c(0.1, 0.4)]);
            let (qq, w) = model.parallel_transport(&p, &q, &v).unwrap();
            assert!(projective_gap(&model, &qq, &q) < 1e-12);
            let n0 = hermitian_form(&model.metric_at(&p).unwrap(), &v, &v).re;
            let n1 = hermitian_form(&model.metric_at(&qq).unwrap(), &w, &w).re;
            assert!((n0 - n1).abs() < 1e-10);
            let (_, wj) = model.parallel_transport(&p, &q, &(&v * crate::linalg::I)).unwrap();
            assert!(norm(&(wj - w * crate::linalg::I)) < 1e-10);
        }
        let v = cvec(&[c(0.7, -0.2), c(0.1, 0.4)]);
        let (_, w) = flat().parallel_transport(&pt(0.0, 0.0, 0.0, 0.0), &pt(3.0, 1.0, 0.0, 2.0), &v).unwrap();
        assert!(norm(&(w - &v)) < 1e-14);
        let (_, w) = ball().parallel_transport(&ModelPoint::origin(2), &pt(1f64.tanh(), 0.0, 0.0, 0.0), &unit(2, 1)).unwrap();
        assert!(w[0].norm() < 1e-14);
    }

    #[test]
    fn frame_data_reconstruction() {
        for model in [ball(), sphere(), flat()] {
            let p = pt(0.2, 0.1, -0.3, 0.25);
            let q = pt(-0.1, 0.3, 0.2, -0.2);
            // Build an isometric frame from a unitary between orthonormal frames.
            let ep = crate::linalg::orthonormal_frame(&model.metric_at(&p).unwrap(), &p.coords).unwrap();
            let eq = crate::linalg::orthonormal_frame(&model.metric_at(&q).unwrap(), &q.coords).unwrap();
            let theta: f64 = 0.7;
            let u = CMat::from_row_slice(2, 2, &[c(theta.cos(), 0.0), c(-theta.sin(), 0.0), c(0.0, theta.sin()), c(0.0, theta.cos())]);
            let a = &eq * u * inverse(&ep).unwrap();
            let sigma = model.isometry_from_frame_data(&p, &q, &a, 1e-9).unwrap();
            let (image, d) = sigma.differential(&p).unwrap();
            assert!(projective_gap(&model, &image, &q) < 1e-12);
            assert!(frobenius(&(d - &a)) < 1e-10);
            assert!(model.isometry_from_frame_data(&p, &q, &(a * c(1.1, 0.0)), 1e-6).is_err());
        }
    }

    #[test]
    fn group_operations() {
        let model = flat();
        let u1 = CMat::from_diagonal(&cvec(&[c(0.0, 1.0), c(1.0, 0.0)]));
        let u2 = CMat::from_diagonal(&cvec(&[c(-1.0, 0.0), c(0.0, -1.0)]));
        let (b1, b2) = (cvec(&[c(1.0, 2.0), c(0.0, 0.5)]), cvec(&[c(-0.3, 0.0), c(2.0, 1.0)]));
        let s = ModelIsometry::affine(model, &u1, &b1).compose(&ModelIsometry::affine(model, &u2, &b2));
        let expect = ModelIsometry::affine(model, &(&u1 * &u2), &(&u1 * &b2 + &b1));
        assert!(frobenius(&(s.mat - expect.mat)) < 1e-15);
        let t = ball().transvection(&pt(0.3, 0.2, -0.1, 0.4)).unwrap();
        let id = t.compose(&t.inverse().unwrap());
        let samples = [pt(0.1, 0.0, 0.2, 0.0), pt(-0.4, 0.1, 0.0, 0.3)];
        assert!(isometries_equal(&id, &ModelIsometry::identity(ball()), &samples, 1e-12).unwrap().0);
        let flip = ModelIsometry::affine(model, &CMat::from_diagonal(&cvec(&[c(-1.0, 0.0), c(1.0, 0.0)])), &CVec::zeros(2));
        let (eq, _) = isometries_equal(&ModelIsometry::identity(model), &flip, &[pt(1.0, 0.0, 0.0, 0.0)], 1e-9).unwrap();
        assert!(!eq);
        let s = sphere().transvection(&pt(0.3, 0.2, -0.1, 0.4)).unwrap();
        let scaled = ModelIsometry { model: sphere(), mat: &s.mat * c(0.0, 1.0) };
        assert!(isometries_equal(&s, &scaled, &samples, 1e-12).unwrap().0);
    }

    #[test]
    fn ball_transvections_preserve_the_form() {
        let a = ball().transvection(&pt(0.3, 0.2, -0.1, 0.4)).unwrap();
        let b = ball().transvection(&pt(-0.5, 0.1, 0.2, -0.6)).unwrap();
        assert!(a.compose(&b).group_residual() < 1e-10);
        assert!(sphere().transvection(&pt(3.0, 0.2, -0.1, 0.4)).unwrap().group_residual() < 1e-10);
    }
}
