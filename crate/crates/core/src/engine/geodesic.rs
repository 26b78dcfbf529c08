use nalgebra::{DMatrix, DVector};

use super::field::{MetricDerivatives, MetricField};
use super::ode::{integrate, OdeOptions};
use crate::error::{pairs, Error, Result};
use crate::linalg::{c, norm, CMat, CVec, RealTangent, C64};

/// `Γ(u, v) = M⁻¹ Σ_j u_j (∂_{z_j} M) v`, the complex Christoffel contraction.
pub fn christoffel(d: &MetricDerivatives, u: &CVec, v: &CVec) -> Result<CVec> {
    let n = u.len();
    let mut acc = CVec::zeros(n);
    for j in 0..n {
        if u[j] != c(0.0, 0.0) {
            acc += &d.dz[j] * v * u[j];
        }
    }
    d.m.clone()
        .lu()
        .solve(&acc)
        .ok_or_else(|| Error::Geometry("singular metric in Christoffel solve".into()))
}

fn derivatives_on_path(field: &MetricField, z: &CVec) -> Result<MetricDerivatives> {
    field.check_point(z).map_err(|e| match e {
        Error::Domain { point, .. } | Error::Guard { point, .. } => Error::PathExitsDomain { point },
        other => other,
    })?;
    field.metric_derivatives(z, 1)
}

/// Integrate the geodesic from `p` with initial velocity `v` up to time `t`,
/// parallel-transporting the columns of `frame` along it. Returns the end
/// point, end velocity and transported frame.
pub fn geodesic_with_frame(
    field: &MetricField,
    p: &CVec,
    v: &CVec,
    t: f64,
    frame: &CMat,
    opts: &OdeOptions,
) -> Result<(CVec, CVec, CMat)> {
    let n = field.dim();
    let k = frame.ncols();
    field.check_point(p)?;
    let mut y0: Vec<C64> = Vec::with_capacity(n * (2 + k));
    y0.extend(p.iter());
    y0.extend(v.iter());
    for col in 0..k {
        y0.extend(frame.column(col).iter());
    }
    let rhs = |_t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let z = CVec::from_column_slice(&y[..n]);
        let zd = CVec::from_column_slice(&y[n..2 * n]);
        let d = derivatives_on_path(field, &z)?;
        let mut out = Vec::with_capacity(y.len());
        out.extend(zd.iter());
        out.extend((-christoffel(&d, &zd, &zd)?).iter());
        for col in 0..k {
            let w = CVec::from_column_slice(&y[(2 + col) * n..(3 + col) * n]);
            out.extend((-christoffel(&d, &zd, &w)?).iter());
        }
        Ok(out)
    };
    let y = integrate(rhs, 0.0, t, &y0, opts)?;
    let q = CVec::from_column_slice(&y[..n]);
    let qd = CVec::from_column_slice(&y[n..2 * n]);
    let f = CMat::from_fn(n, k, |r, col| y[(2 + col) * n + r]);
    Ok((q, qd, f))
}

/// Point and velocity at time `t` along the geodesic `(p, v)`.
pub fn geodesic(field: &MetricField, p: &CVec, v: &CVec, t: f64, opts: &OdeOptions) -> Result<(CVec, CVec)> {
    let (q, qd, _) = geodesic_with_frame(field, p, v, t, &CMat::zeros(field.dim(), 0), opts)?;
    Ok((q, qd))
}

pub fn exp_map(field: &MetricField, p: &CVec, v: &CVec, opts: &OdeOptions) -> Result<CVec> {
    if norm(v) == 0.0 {
        field.check_point(p)?;
        return Ok(p.clone());
    }
    geodesic(field, p, v, 1.0, opts).map(|(q, _)| q)
}

/// Parallel transport of `v` along the polyline through `path` (straight
/// coordinate segments between consecutive points).
pub fn parallel_transport(field: &MetricField, path: &[CVec], v: &CVec, opts: &OdeOptions) -> Result<CVec> {
    let n = field.dim();
    let mut w = v.clone();
    for seg in path.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let delta = b - a;
        if norm(&delta) == 0.0 {
            continue;
        }
        let rhs = |t: f64, y: &[C64]| -> Result<Vec<C64>> {
            let z = a + &delta * c(t, 0.0);
            let d = derivatives_on_path(field, &z)?;
            let cur = CVec::from_column_slice(y);
            Ok((-christoffel(&d, &delta, &cur)?).as_slice().to_vec())
        };
        let y = integrate(rhs, 0.0, 1.0, w.as_slice(), opts)?;
        w = CVec::from_column_slice(&y[..n]);
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    pub max_iter: usize,
    /// Target residual `|exp_p(v) − q|`.
    pub tol: f64,
    /// Residual accepted when iterations stall.
    pub accept: f64,
    pub fd_step: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-12,
            accept: 1e-9,
            fd_step: 1e-6,
        }
    }
}

fn to_real(v: &CVec) -> DVector<f64> {
    RealTangent::from_complex(v).0
}

fn to_complex(v: &DVector<f64>) -> CVec {
    RealTangent(v.clone()).to_complex()
}

/// Solve `exp_p(v) = q`.
///
/// A chord iteration with the local linearization `I − Γ_p(v, ·)` of the
/// exponential, started from the second-order guess `Δ + ½Γ_p(Δ, Δ)`, settles
/// short segments in a few integrations. If it stalls, damped Newton with a
/// finite-difference Jacobian takes over from the best iterate.
pub fn log_map(field: &MetricField, p: &CVec, q: &CVec, opts: &OdeOptions, shoot: &ShootingOptions) -> Result<CVec> {
    field.check_point(q)?;
    let delta = q - p;
    if norm(&delta) == 0.0 {
        field.check_point(p)?;
        return Ok(delta);
    }
    let d = field.metric_derivatives(p, 1)?;
    let mut v = &delta + christoffel(&d, &delta, &delta)? * c(0.5, 0.0);
    let mut best: Option<(CVec, f64)> = None;
    for _ in 0..8 {
        let r = match exp_map(field, p, &v, opts) {
            Ok(e) => e - q,
            Err(Error::PathExitsDomain { .. }) => break,
            Err(e) => return Err(e),
        };
        let rn = norm(&r);
        if rn <= shoot.tol {
            return Ok(v);
        }
        if let Some((_, prev)) = &best {
            if rn > 0.5 * prev {
                break;
            }
        }
        let n = v.len();
        let mut jac = CMat::identity(n, n);
        for k in 0..n {
            let e = crate::linalg::unit(n, k);
            jac.set_column(k, &(crate::linalg::unit(n, k) - christoffel(&d, &v, &e)?));
        }
        let Some(step) = jac.lu().solve(&r) else { break };
        best = Some((v.clone(), rn));
        v -= step;
    }
    let start = best.map(|(v, _)| v).unwrap_or(delta);
    newton_log(field, p, q, start, opts, shoot)
}

fn newton_log(field: &MetricField, p: &CVec, q: &CVec, mut v: CVec, opts: &OdeOptions, shoot: &ShootingOptions) -> Result<CVec> {
    let residual = |v: &CVec| -> Result<DVector<f64>> { Ok(to_real(&(exp_map(field, p, v, opts)? - q))) };
    let mut r = residual(&v)?;
    let mut jac: Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> = None;
    let m = 2 * field.dim();
    let mut last_ratio = 1.0;
    for _ in 0..shoot.max_iter {
        let rn = r.norm();
        if rn <= shoot.tol {
            return Ok(v);
        }
        if jac.is_none() || last_ratio > 0.1 {
            let base = to_real(&v);
            let h = shoot.fd_step * base.norm().max(1e-2);
            let mut j = DMatrix::zeros(m, m);
            for a in 0..m {
                let mut vp = base.clone();
                vp[a] += h;
                let ra = residual(&to_complex(&vp))?;
                j.set_column(a, &((ra - &r) / h));
            }
            jac = Some(j.lu());
        }
        let step = jac
            .as_ref()
            .and_then(|lu| lu.solve(&(-&r)))
            .ok_or_else(|| Error::NoConvergence {
                what: "geodesic shooting (singular Jacobian)".into(),
                residual: rn,
            })?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let trial = to_complex(&(to_real(&v) + &step * lambda));
            match residual(&trial) {
                Ok(rt) if rt.norm() < rn => {
                    accepted = Some((trial, rt));
                    break;
                }
                Ok(_) | Err(Error::PathExitsDomain { .. }) => lambda *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((nv, nr)) => {
                last_ratio = nr.norm() / rn;
                v = nv;
                r = nr;
            }
            None => {
                if rn <= shoot.accept {
                    return Ok(v);
                }
                if last_ratio <= 0.1 {
                    // Retry once with a fresh Jacobian before giving up.
                    last_ratio = 1.0;
                    continue;
                }
                return Err(Error::NoConvergence {
                    what: format!("geodesic shooting from {:?}", pairs(p.as_slice())),
                    residual: rn,
                });
            }
        }
    }
    if r.norm() <= shoot.accept {
        return Ok(v);
    }
    Err(Error::NoConvergence {
        what: "geodesic shooting (iteration limit)".into(),
        residual: r.norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::field::Domain;
    use crate::linalg::{cvec, hermitian_form, identity};

    fn bergman() -> MetricField {
        MetricField::parse_potential("-log(1 - abs2(z1) - abs2(z2))", 2, Domain::ball(1.0)).unwrap()
    }

    fn flat() -> MetricField {
        MetricField::parse_potential("abs2(z1) + abs2(z2)", 2, Domain::ball(10.0)).unwrap()
    }

    #[test]
    fn flat_geodesics_are_lines() {
        let p = cvec(&[c(0.1, 0.2), c(-0.3, 0.0)]);
        let v = cvec(&[c(0.5, -0.1), c(0.2, 0.3)]);
        let (q, qd) = geodesic(&flat(), &p, &v, 2.0, &OdeOptions::default()).unwrap();
        assert!(norm(&(q - (&p + &v * c(2.0, 0.0)))) < 1e-13);
        assert!(norm(&(qd - &v)) < 1e-13);
        let path = vec![p.clone(), cvec(&[c(1.0, 0.0), c(0.0, 1.0)]), cvec(&[c(-1.0, 0.5), c(0.0, 0.0)])];
        let w = parallel_transport(&flat(), &path, &v, &OdeOptions::default()).unwrap();
        assert!(norm(&(w - v)) < 1e-14);
    }

    #[test]
    fn bergman_radial_geodesic_is_tanh() {
        for t in [0.3, 1.0, 1.7] {
            let q = exp_map(&bergman(), &CVec::zeros(2), &cvec(&[c(t, 0.0), c(0.0, 0.0)]), &OdeOptions::default()).unwrap();
            assert!((q[0].re - t.tanh()).abs() < 1e-8, "t={t}: {}", q[0]);
            assert!(q[1].norm() < 1e-14);
        }
    }

    #[test]
    fn energy_is_conserved() {
        let f = bergman();
        let p = cvec(&[c(0.2, 0.1), c(-0.1, 0.3)]);
        let v = cvec(&[c(0.4, -0.2), c(0.3, 0.5)]);
        let (q, qd) = geodesic(&f, &p, &v, 1.0, &OdeOptions::default()).unwrap();
        let e0 = hermitian_form(&f.metric_at(&p).unwrap(), &v, &v).re;
        let e1 = hermitian_form(&f.metric_at(&q).unwrap(), &qd, &qd).re;
        assert!(((e1 - e0) / e0).abs() < 1e-7);
    }

    #[test]
    fn transport_is_isometric_and_complex_linear() {
        let f = bergman();
        let p = cvec(&[c(0.2, 0.1), c(-0.1, 0.3)]);
        let v = cvec(&[c(0.4, -0.2), c(0.3, 0.5)]);
        let (q, _, frame) = geodesic_with_frame(&f, &p, &v, 1.0, &identity(2), &OdeOptions::default()).unwrap();
        let g0 = f.metric_at(&p).unwrap();
        let g1 = f.metric_at(&q).unwrap();
        let pulled = frame.adjoint() * g1 * &frame;
        assert!(crate::linalg::frobenius(&(pulled - g0)) < 1e-8);
    }

    #[test]
    fn log_inverts_exp() {
        let f = bergman();
        let p = cvec(&[c(0.2, 0.1), c(-0.1, 0.3)]);
        let v = cvec(&[c(0.4, -0.2), c(0.3, 0.5)]);
        let q = exp_map(&f, &p, &v, &OdeOptions::default()).unwrap();
        let w = log_map(&f, &p, &q, &OdeOptions::default(), &ShootingOptions::default()).unwrap();
        assert!(norm(&(w - &v)) < 1e-8);
        let back = exp_map(&f, &p, &log_map(&f, &p, &q, &OdeOptions::default(), &ShootingOptions::default()).unwrap(), &OdeOptions::default()).unwrap();
        assert!(norm(&(back - q)) < 1e-7);
    }

    #[test]
    fn leaving_the_domain_is_reported() {
        let f = bergman();
        let r = exp_map(&f, &CVec::zeros(2), &cvec(&[c(30.0, 0.0), c(0.0, 0.0)]), &OdeOptions::default());
        assert!(matches!(r, Err(Error::PathExitsDomain { .. })), "{r:?}");
    }
}
