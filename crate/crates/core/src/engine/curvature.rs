use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::field::{Domain, MetricField};
use crate::dsl::ExprPotential;
use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_form, inverse, real_inner, CMat, CVec, RealTangent, C64};
use crate::report::VerificationReport;

/// Components `R_{i j̄ k l̄}` of the curvature tensor at a point, in the
/// coordinate frame, before calibration.
#[derive(Debug, Clone)]
pub struct CurvatureComponents {
    pub point: CVec,
    pub metric: CMat,
    n: usize,
    r: Vec<C64>,
}

impl CurvatureComponents {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> C64 {
        let n = self.n;
        self.r[((i * n + j) * n + k) * n + l]
    }

    /// Largest violation of the Kähler symmetries `R_{ij̄kl̄} = R_{kj̄il̄} =
    /// R_{il̄kj̄}` and `R_{ij̄kl̄} = conj(R_{jīlk̄})`, relative to the largest
    /// component.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        let scale = self.r.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        worst = worst
                            .max((v - self.get(k, j, i, l)).norm())
                            .max((v - self.get(i, l, k, j)).norm())
                            .max((v - self.get(j, i, l, k).conj()).norm());
                    }
                }
            }
        }
        worst / scale
    }

    /// `Σ R_{ij̄kl̄} (Xⁱ Ȳʲ − Yⁱ X̄ʲ)(Zᵏ W̄ˡ − Wᵏ Z̄ˡ)` for complex vectors.
    fn contract(&self, x: &CVec, y: &CVec, z: &CVec, w: &CVec) -> f64 {
        let n = self.n;
        let mut total = c(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let a = x[i] * y[j].conj() - y[i] * x[j].conj();
                if a == c(0.0, 0.0) {
                    continue;
                }
                for k in 0..n {
                    for l in 0..n {
                        let b = z[k] * w[l].conj() - w[k] * z[l].conj();
                        total += self.get(i, j, k, l) * a * b;
                    }
                }
            }
        }
        total.re
    }

    /// Calibrated `Rm(X, Y, Z, W)`.
    pub fn rm(&self, x: &RealTangent, y: &RealTangent, z: &RealTangent, w: &RealTangent) -> f64 {
        calibration_constant()
            * self.contract(&x.to_complex(), &y.to_complex(), &z.to_complex(), &w.to_complex())
    }
}

/// `R_{ij̄kl̄} = −∂_k ∂_{l̄} g_{ij̄} + g^{pq̄} ∂_k g_{iq̄} ∂_{l̄} g_{pj̄}`, with
/// `g_{ij̄} = m[(j, i)]` and `g^{pq̄} = m⁻¹[(p, q)]`.
pub fn curvature_at(field: &MetricField, z: &CVec) -> Result<CurvatureComponents> {
    let d = field.metric_derivatives(z, 2)?;
    let n = field.dim();
    let minv = inverse(&d.m).ok_or_else(|| Error::NotPositiveDefinite {
        point: crate::error::pairs(z.as_slice()),
    })?;
    let dzbar: Vec<CMat> = (0..n).map(|l| d.dzbar(l)).collect();
    let mut r = vec![c(0.0, 0.0); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = -d.ddbar[k][l][(j, i)];
                    for p in 0..n {
                        for q in 0..n {
                            v += minv[(p, q)] * d.dz[k][(q, i)] * dzbar[l][(j, p)];
                        }
                    }
                    r[((i * n + j) * n + k) * n + l] = v;
                }
            }
        }
    }
    Ok(CurvatureComponents {
        point: z.clone(),
        metric: d.m,
        n,
        r,
    })
}

/// Overall factor turning the raw contraction into `Rm`. It is fixed by
/// requiring the canonical ball potential `−log(1 − |z|²)` in two variables to
/// have holomorphic sectional curvature `−4` at the origin.
pub fn calibration_constant() -> f64 {
    static KAPPA: OnceLock<f64> = OnceLock::new();
    *KAPPA.get_or_init(|| {
        let potential = ExprPotential::parse("-log(1 - abs2(z1) - abs2(z2))", 2).expect("anchor potential parses");
        let field = MetricField::from_potential(2, Arc::new(potential), Domain::ball(1.0));
        let origin = CVec::zeros(2);
        let comps = curvature_at(&field, &origin).expect("anchor curvature evaluates");
        let x = crate::linalg::unit(2, 0);
        let jx = &x * crate::linalg::I;
        -4.0 / comps.contract(&x, &jx, &x, &jx)
    })
}

/// Sign of the calibration factor, reported alongside curvature results.
pub fn calibration_sign() -> f64 {
    calibration_constant().signum()
}

pub fn rm(field: &MetricField, z: &CVec, x: &RealTangent, y: &RealTangent, zz: &RealTangent, w: &RealTangent) -> Result<f64> {
    Ok(curvature_at(field, z)?.rm(x, y, zz, w))
}

/// The algebraic curvature tensor of constant holomorphic sectional
/// curvature 1:
/// `¼(g(X,Z)g(Y,W) − g(X,W)g(Y,Z) + g(X,JZ)g(Y,JW) − g(X,JW)g(Y,JZ) + 2g(X,JY)g(Z,JW))`.
pub fn r0_with_metric(m: &CMat, x: &RealTangent, y: &RealTangent, z: &RealTangent, w: &RealTangent) -> f64 {
    let g = |a: &RealTangent, b: &RealTangent| real_inner(m, a, b);
    let (jy, jz, jw) = (y.j(), z.j(), w.j());
    0.25 * (g(x, z) * g(y, w) - g(x, w) * g(y, z) + g(x, &jz) * g(y, &jw) - g(x, &jw) * g(y, &jz)
        + 2.0 * g(x, &jy) * g(z, &jw))
}

pub fn r0(field: &MetricField, z: &CVec, x: &RealTangent, y: &RealTangent, zz: &RealTangent, w: &RealTangent) -> Result<f64> {
    Ok(r0_with_metric(&field.metric_at(z)?, x, y, zz, w))
}

/// Holomorphic sectional curvature of the J-invariant plane spanned by `x`.
pub fn hsc(field: &MetricField, z: &CVec, x: &RealTangent) -> Result<f64> {
    let comps = curvature_at(field, z)?;
    hsc_from(&comps, x)
}

pub fn hsc_from(comps: &CurvatureComponents, x: &RealTangent) -> Result<f64> {
    let norm2 = hermitian_form(&comps.metric, &x.to_complex(), &x.to_complex()).re;
    if !(norm2 > 0.0) {
        return Err(Error::InvalidParameter("holomorphic sectional curvature needs a nonzero vector".into()));
    }
    let jx = x.j();
    Ok(comps.rm(x, &jx, x, &jx) / (norm2 * norm2))
}

/// A random real tangent vector of unit length for the metric `m`.
pub fn random_unit(m: &CMat, rng: &mut ChaCha8Rng) -> RealTangent {
    let n = m.nrows();
    loop {
        let xi = CVec::from_fn(n, |_, _| c(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0));
        let norm2 = hermitian_form(m, &xi, &xi).re;
        if norm2 > 1e-12 {
            return RealTangent::from_complex(&(xi * c(1.0 / norm2.sqrt(), 0.0)));
        }
    }
}

/// Check `Rm = c·R₀` at each sample over `tuples` random unit 4-tuples.
///
/// The report residual is `max |Rm − c R₀|`; `best_fit_c` is the least-squares
/// slope `Σ Rm·R₀ / Σ R₀²` over all tuples. Points that fail to evaluate make
/// the report fail with a note rather than raising.
pub fn verify_space_form(
    field: &MetricField,
    samples: &[CVec],
    c_target: f64,
    tuples: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> VerificationReport {
    let mut worst: f64 = 0.0;
    let mut worst_index = 0usize;
    let (mut num, mut den) = (0.0, 0.0);
    let mut symmetry: f64 = 0.0;
    let mut hsc_spread: f64 = 0.0;
    let mut notes = Vec::new();
    for (s, z) in samples.iter().enumerate() {
        let comps = match curvature_at(field, z) {
            Ok(comps) => comps,
            Err(e) => {
                notes.push(format!("sample {s}: {e}"));
                worst = f64::INFINITY;
                continue;
            }
        };
        symmetry = symmetry.max(comps.symmetry_residual());
        for _ in 0..tuples {
            let v: Vec<RealTangent> = (0..4).map(|_| random_unit(&comps.metric, rng)).collect();
            let rm = comps.rm(&v[0], &v[1], &v[2], &v[3]);
            let base = r0_with_metric(&comps.metric, &v[0], &v[1], &v[2], &v[3]);
            num += rm * base;
            den += base * base;
            let r = (rm - c_target * base).abs();
            if r > worst || r.is_nan() {
                worst = if r.is_nan() { f64::INFINITY } else { r };
                worst_index = s;
            }
            if let Ok(h) = hsc_from(&comps, &v[0]) {
                hsc_spread = hsc_spread.max((h - c_target).abs());
            }
        }
    }
    let best_fit = if den > 0.0 { num / den } else { 0.0 };
    let mut report = VerificationReport::new("space_form", worst, tol)
        .with_metric("best_fit_c", best_fit)
        .with_metric("calibration_sign", calibration_sign())
        .with_metric("calibration_constant", calibration_constant())
        .with_metric("target_c", c_target)
        .with_metric("samples", samples.len() as f64)
        .with_metric("worst_sample", worst_index as f64)
        .with_metric("symmetry_residual", symmetry)
        .with_metric("max_hsc_deviation", hsc_spread);
    for n in notes {
        report = report.with_note(n);
    }
    if samples.is_empty() {
        report = report.with_note("no samples").fail();
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cvec, unit};
    use rand::SeedableRng;

    fn field(text: &str) -> MetricField {
        MetricField::parse_potential(text, 2, Domain::ball(1.0)).unwrap()
    }

    #[test]
    fn calibration_factor_is_minus_one_half() {
        assert!((calibration_constant() + 0.5).abs() < 1e-12);
        assert_eq!(calibration_sign(), -1.0);
    }

    #[test]
    fn bergman_and_fubini_study_origin_components() {
        let b = curvature_at(&field("-log(1 - abs2(z1) - abs2(z2))"), &CVec::zeros(2)).unwrap();
        let f = curvature_at(&field("log(1 + abs2(z1) + abs2(z2))"), &CVec::zeros(2)).unwrap();
        assert!((b.get(0, 0, 0, 0).norm() - 2.0).abs() < 1e-12);
        assert!((f.get(0, 0, 0, 0).norm() - 2.0).abs() < 1e-12);
        assert!((b.get(0, 0, 0, 0).re * f.get(0, 0, 0, 0).re) < 0.0);
    }

    #[test]
    fn hsc_of_models() {
        let z = cvec(&[c(0.2, -0.1), c(0.3, 0.05)]);
        let x = RealTangent::from_complex(&cvec(&[c(0.3, 0.2), c(-0.5, 0.1)]));
        let hb = hsc(&field("-log(1 - abs2(z1) - abs2(z2))"), &z, &x).unwrap();
        let hf = hsc(&field("log(1 + abs2(z1) + abs2(z2))"), &z, &x).unwrap();
        assert!((hb + 4.0).abs() < 1e-9, "{hb}");
        assert!((hf - 4.0).abs() < 1e-9, "{hf}");
        assert_eq!(hsc(&field("abs2(z1) + abs2(z2)"), &z, &x).unwrap(), 0.0);
    }

    #[test]
    fn hsc_is_constant_on_the_complex_line() {
        let f = field("-log(1 - abs2(z1) - abs2(z2)) + 0.3*abs2(z1)^2");
        let z = cvec(&[c(0.1, 0.2), c(-0.2, 0.1)]);
        let x = RealTangent::from_complex(&cvec(&[c(0.3, 0.2), c(-0.5, 0.1)]));
        let h0 = hsc(&f, &z, &x).unwrap();
        for k in 1..16 {
            let t = k as f64 * 0.4;
            let xt = x.scale(t.cos()).add(&x.j().scale(t.sin()));
            assert!((hsc(&f, &z, &xt).unwrap() - h0).abs() < 1e-8);
        }
    }

    #[test]
    fn r0_values() {
        let m = CMat::identity(2, 2);
        let x = RealTangent::from_complex(&unit(2, 0));
        assert!((r0_with_metric(&m, &x, &x.j(), &x, &x.j()) - 1.0).abs() < 1e-15);
        let y = RealTangent::from_complex(&cvec(&[c(0.1, 0.4), c(0.3, -0.2)]));
        assert_eq!(r0_with_metric(&m, &x, &x, &y, &y.j()), 0.0);
        let z = RealTangent::from_complex(&cvec(&[c(-0.7, 0.2), c(0.0, 0.5)]));
        let a = r0_with_metric(&m, &x.scale(2.0), &y, &z, &y.j());
        let b = r0_with_metric(&m, &x, &y, &z, &y.j());
        assert!((a - 2.0 * b).abs() < 1e-15);
    }

    #[test]
    fn space_form_reports() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples = vec![cvec(&[c(0.1, 0.0), c(0.2, -0.3)]), cvec(&[c(-0.4, 0.1), c(0.0, 0.2)])];
        let b = verify_space_form(&field("-log(1 - abs2(z1) - abs2(z2))"), &samples, -4.0, 10, 1e-5, &mut rng);
        assert!(b.pass, "{b:?}");
        let flat = verify_space_form(&field("abs2(z1) + abs2(z2)"), &samples, -4.0, 10, 1e-5, &mut rng);
        assert!(!flat.pass);
        assert!(flat.metric("best_fit_c").unwrap().abs() < 1e-12);
        let cone = MetricField::parse_potential(
            "abs2(z1)^0.5 + abs2(z2)",
            2,
            Domain::ball(1.0).with_puncture(super::super::field::Puncture::Divisor(0)),
        )
        .unwrap();
        let r = verify_space_form(&cone, &samples, -4.0, 10, 1e-5, &mut rng);
        assert!(!r.pass);
        assert!(r.metric("best_fit_c").unwrap().abs() < 1e-6);
    }
}
