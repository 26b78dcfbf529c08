use std::fmt;
use std::sync::Arc;

use crate::dsl::ExprPotential;
use crate::error::{pairs, Error, Result};
use crate::jet::Jet;
use crate::linalg::{c, cholesky, CMat, CVec, C64};

/// A set excluded from the domain of a metric field.
#[derive(Debug, Clone, PartialEq)]
pub enum Puncture {
    /// Closed ball `|z − center| ≤ radius`.
    Ball { center: CVec, radius: f64 },
    /// The plane `{z₁ = z₂ = 0}`.
    Plane,
    /// The coordinate hyperplane `{z_j = 0}` (0-based `j`).
    Divisor(usize),
}

impl Puncture {
    /// Euclidean distance from `z` to the excluded set.
    pub fn distance(&self, z: &CVec) -> f64 {
        match self {
            Puncture::Ball { center, radius } => ((z - center).norm() - radius).max(0.0),
            Puncture::Plane => (z[0].norm_sqr() + z[1].norm_sqr()).sqrt(),
            Puncture::Divisor(j) => z[*j].norm(),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Puncture::Ball { center, radius } => {
                format!("ball(center={:?}, radius={radius})", pairs(center.as_slice()))
            }
            Puncture::Plane => "plane z1=z2=0".into(),
            Puncture::Divisor(j) => format!("divisor z{}=0", j + 1),
        }
    }
}

/// Open ball of radius `radius` (possibly infinite) minus punctures.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    pub radius: f64,
    pub punctures: Vec<Puncture>,
}

impl Domain {
    pub fn ball(radius: f64) -> Self {
        Self {
            radius,
            punctures: Vec::new(),
        }
    }

    pub fn with_puncture(mut self, p: Puncture) -> Self {
        self.punctures.push(p);
        self
    }

    pub fn distance_to_punctures(&self, z: &CVec) -> f64 {
        self.punctures.iter().map(|p| p.distance(z)).fold(f64::INFINITY, f64::min)
    }

    fn nearest_puncture(&self, z: &CVec) -> Option<&Puncture> {
        self.punctures
            .iter()
            .min_by(|a, b| a.distance(z).total_cmp(&b.distance(z)))
    }

    pub fn check(&self, z: &CVec, guard: f64) -> Result<()> {
        if z.iter().any(|w| !w.re.is_finite() || !w.im.is_finite()) {
            return Err(Error::NonFinite { point: pairs(z.as_slice()) });
        }
        if z.norm() >= self.radius {
            return Err(Error::Domain {
                point: pairs(z.as_slice()),
                reason: format!("|z| = {:.6} is not below the domain radius {}", z.norm(), self.radius),
            });
        }
        if let Some(p) = self.nearest_puncture(z) {
            if p.distance(z) < guard {
                return Err(Error::Guard {
                    point: pairs(z.as_slice()),
                    puncture: p.describe(),
                });
            }
        }
        Ok(())
    }
}

/// A real Kähler potential that can be expanded to a requested order in the
/// interleaved real coordinates.
pub trait Potential: Send + Sync {
    fn jet(&self, z: &CVec, order: usize) -> Result<Jet>;
    fn label(&self) -> String;
}

impl Potential for ExprPotential {
    fn jet(&self, z: &CVec, order: usize) -> Result<Jet> {
        ExprPotential::jet(self, z, order)
    }

    fn label(&self) -> String {
        crate::dsl::print(&self.expr)
    }
}

pub type ComponentFn = dyn Fn(&CVec) -> Result<CMat> + Send + Sync;

#[derive(Clone)]
pub enum Evaluator {
    Potential(Arc<dyn Potential>),
    Components(Arc<ComponentFn>),
}

/// The Hermitian metric matrix at a point with its Wirtinger derivatives.
///
/// `m[(a, b)] = ∂_{z̄_a} ∂_{z_b} φ`; `dz[j] = ∂_{z_j} m` and, when requested,
/// `ddbar[k][l] = ∂_{z_k} ∂_{z̄_l} m`. The antiholomorphic first derivatives
/// are `dz[j]ᴴ`.
#[derive(Debug, Clone)]
pub struct MetricDerivatives {
    pub m: CMat,
    pub dz: Vec<CMat>,
    pub ddbar: Vec<Vec<CMat>>,
}

impl MetricDerivatives {
    pub fn dzbar(&self, j: usize) -> CMat {
        self.dz[j].adjoint()
    }
}

/// A Kähler metric on a punctured ball, given by a potential or by components.
#[derive(Clone)]
pub struct MetricField {
    n: usize,
    domain: Domain,
    evaluator: Evaluator,
    guard: f64,
    fd_step: f64,
    label: String,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("n", &self.n)
            .field("domain", &self.domain)
            .field("label", &self.label)
            .field("guard", &self.guard)
            .finish()
    }
}

impl MetricField {
    pub fn from_potential(n: usize, potential: Arc<dyn Potential>, domain: Domain) -> Self {
        let label = potential.label();
        let guard = default_guard(&domain);
        Self {
            n,
            domain,
            evaluator: Evaluator::Potential(potential),
            guard,
            fd_step: 1e-4,
            label,
        }
    }

    pub fn from_components(n: usize, components: Arc<ComponentFn>, domain: Domain, label: &str) -> Self {
        let guard = default_guard(&domain);
        Self {
            n,
            domain,
            evaluator: Evaluator::Components(components),
            guard,
            fd_step: 1e-4,
            label: label.to_string(),
        }
    }

    /// Build from whichever sources are present; a potential takes precedence.
    pub fn from_sources(
        n: usize,
        potential: Option<Arc<dyn Potential>>,
        components: Option<Arc<ComponentFn>>,
        domain: Domain,
    ) -> Result<Self> {
        match (potential, components) {
            (Some(p), _) => Ok(Self::from_potential(n, p, domain)),
            (None, Some(f)) => Ok(Self::from_components(n, f, domain, "components")),
            (None, None) => Err(Error::InvalidParameter("metric field needs a potential or components".into())),
        }
    }

    pub fn parse_potential(text: &str, n: usize, domain: Domain) -> Result<Self> {
        Ok(Self::from_potential(n, Arc::new(ExprPotential::parse(text, n)?), domain))
    }

    pub fn with_guard(mut self, guard: f64) -> Self {
        self.guard = guard;
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn guard(&self) -> f64 {
        self.guard
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn is_potential_backed(&self) -> bool {
        matches!(self.evaluator, Evaluator::Potential(_))
    }

    pub fn check_point(&self, z: &CVec) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: z.len(),
            });
        }
        self.domain.check(z, self.guard)
    }

    /// Metric matrix at `z`, checked for positive definiteness.
    pub fn metric_at(&self, z: &CVec) -> Result<CMat> {
        self.check_point(z)?;
        let m = self.raw_metric(z)?;
        cholesky(&m, z)?;
        Ok(m)
    }

    fn raw_metric(&self, z: &CVec) -> Result<CMat> {
        match &self.evaluator {
            Evaluator::Potential(p) => Ok(metric_from_jet(&p.jet(z, 2)?, self.n)),
            Evaluator::Components(f) => f(z),
        }
    }

    /// Metric with first (`order = 1`) or first and mixed second (`order = 2`)
    /// Wirtinger derivatives.
    pub fn metric_derivatives(&self, z: &CVec, order: usize) -> Result<MetricDerivatives> {
        self.check_point(z)?;
        match &self.evaluator {
            Evaluator::Potential(p) => {
                let jet = p.jet(z, 2 + order)?;
                Ok(derivatives_from_jet(&jet, self.n, order))
            }
            Evaluator::Components(f) => self.derivatives_by_differences(f.as_ref(), z, order),
        }
    }

    fn derivatives_by_differences(&self, f: &ComponentFn, z: &CVec, order: usize) -> Result<MetricDerivatives> {
        let n = self.n;
        let h = self.fd_step;
        let m = f(z)?;
        let shifted = |steps: &[(usize, f64)]| -> Result<CMat> {
            let mut w = z.clone();
            for &(var, s) in steps {
                let k = var / 2;
                w[k] += if var % 2 == 0 { c(s * h, 0.0) } else { c(0.0, s * h) };
            }
            f(&w)
        };
        // Real first partials along each interleaved coordinate.
        let mut first = Vec::with_capacity(2 * n);
        for var in 0..2 * n {
            let d = (shifted(&[(var, 1.0)])? - shifted(&[(var, -1.0)])?) * c(0.5 / h, 0.0);
            first.push(d);
        }
        let dz = (0..n)
            .map(|j| (&first[2 * j] - &first[2 * j + 1] * c(0.0, 1.0)) * c(0.5, 0.0))
            .collect();
        let mut ddbar = Vec::new();
        if order >= 2 {
            let mut second = vec![vec![CMat::zeros(n, n); 2 * n]; 2 * n];
            #[allow(clippy::needless_range_loop)]
            for a in 0..2 * n {
                for b in a..2 * n {
                    let d = if a == b {
                        (shifted(&[(a, 1.0)])? - &m * c(2.0, 0.0) + shifted(&[(a, -1.0)])?) * c(1.0 / (h * h), 0.0)
                    } else {
                        (shifted(&[(a, 1.0), (b, 1.0)])? - shifted(&[(a, 1.0), (b, -1.0)])?
                            - shifted(&[(a, -1.0), (b, 1.0)])?
                            + shifted(&[(a, -1.0), (b, -1.0)])?)
                            * c(0.25 / (h * h), 0.0)
                    };
                    second[a][b] = d.clone();
                    second[b][a] = d;
                }
            }
            for k in 0..n {
                let mut row = Vec::with_capacity(n);
                for l in 0..n {
                    let (xk, yk, xl, yl) = (2 * k, 2 * k + 1, 2 * l, 2 * l + 1);
                    let re = &second[xk][xl] + &second[yk][yl];
                    let im = &second[xk][yl] - &second[yk][xl];
                    row.push((re + im * c(0.0, 1.0)) * c(0.25, 0.0));
                }
                ddbar.push(row);
            }
        }
        Ok(MetricDerivatives { m, dz, ddbar })
    }
}

fn default_guard(domain: &Domain) -> f64 {
    if domain.radius.is_finite() {
        1e-3 * domain.radius
    } else {
        1e-3
    }
}

/// Wirtinger derivative `∂_{z_{h₁}}⋯∂_{z̄_{a₁}}⋯ f` of a jet over interleaved
/// real coordinates.
pub fn wirtinger(jet: &Jet, holo: &[usize], anti: &[usize]) -> C64 {
    let ops: Vec<(usize, f64)> = holo
        .iter()
        .map(|&k| (k, -1.0))
        .chain(anti.iter().map(|&k| (k, 1.0)))
        .collect();
    let mut vars = Vec::with_capacity(ops.len());
    let total = expand(jet, &ops, 0, c(1.0, 0.0), &mut vars);
    total * 0.5f64.powi(ops.len() as i32)
}

fn expand(jet: &Jet, ops: &[(usize, f64)], pos: usize, coeff: C64, vars: &mut Vec<usize>) -> C64 {
    if pos == ops.len() {
        return coeff * jet.partial(vars);
    }
    let (k, sign) = ops[pos];
    vars.push(2 * k);
    let mut total = expand(jet, ops, pos + 1, coeff, vars);
    vars.pop();
    vars.push(2 * k + 1);
    total += expand(jet, ops, pos + 1, coeff * c(0.0, sign), vars);
    vars.pop();
    total
}

fn metric_from_jet(jet: &Jet, n: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = wirtinger(jet, &[b], &[a]);
            m[(a, b)] = v;
            m[(b, a)] = v.conj();
        }
    }
    m
}

fn derivatives_from_jet(jet: &Jet, n: usize, order: usize) -> MetricDerivatives {
    let m = metric_from_jet(jet, n);
    let dz = (0..n)
        .map(|j| CMat::from_fn(n, n, |a, b| wirtinger(jet, &[b, j], &[a])))
        .collect();
    let ddbar = if order >= 2 {
        (0..n)
            .map(|k| {
                (0..n)
                    .map(|l| CMat::from_fn(n, n, |a, b| wirtinger(jet, &[b, k], &[a, l])))
                    .collect()
            })
            .collect()
    } else {
        Vec::new()
    };
    MetricDerivatives { m, dz, ddbar }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cvec, frobenius, identity};

    fn bergman() -> MetricField {
        MetricField::parse_potential("-log(1 - abs2(z1) - abs2(z2))", 2, Domain::ball(1.0)).unwrap()
    }

    #[test]
    fn flat_metric_is_identity() {
        let f = MetricField::parse_potential("abs2(z1) + abs2(z2)", 2, Domain::ball(1.0)).unwrap();
        let m = f.metric_at(&cvec(&[c(0.3, 0.0), c(0.0, 0.7)])).unwrap();
        assert!(frobenius(&(m - identity(2))) < 1e-15);
    }

    #[test]
    fn bergman_metric_values() {
        let f = bergman();
        let m0 = f.metric_at(&CVec::zeros(2)).unwrap();
        assert!(frobenius(&(m0 - identity(2))) < 1e-15);
        let m = f.metric_at(&cvec(&[c(0.5, 0.0), c(0.0, 0.0)])).unwrap();
        assert!((m[(0, 0)] - c(16.0 / 9.0, 0.0)).norm() < 1e-13);
        assert!((m[(1, 1)] - c(4.0 / 3.0, 0.0)).norm() < 1e-13);
        assert!(m[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn bergman_off_diagonal_matches_closed_form() {
        // M = (I + z zᴴ/(1−r²)) / (1−r²) with M[a][b] carrying z_a z̄_b.
        let z = cvec(&[c(0.2, 0.3), c(-0.1, 0.25)]);
        let m = bergman().metric_at(&z).unwrap();
        let s = 1.0 - z.norm_squared();
        let expect = (identity(2) + &z * z.adjoint() * c(1.0 / s, 0.0)) * c(1.0 / s, 0.0);
        assert!(frobenius(&(m - expect)) < 1e-13);
    }

    #[test]
    fn guard_and_domain_errors() {
        let f = bergman().with_domain(Domain::ball(1.0).with_puncture(Puncture::Divisor(0)));
        assert!(matches!(
            f.metric_at(&cvec(&[c(1e-5, 0.0), c(0.3, 0.0)])),
            Err(Error::Guard { .. })
        ));
        assert!(matches!(f.metric_at(&cvec(&[c(0.9, 0.0), c(0.5, 0.0)])), Err(Error::Domain { .. })));
    }

    #[test]
    fn jet_and_difference_derivatives_agree() {
        let f = bergman();
        let g = f.clone();
        let comp = MetricField::from_components(
            2,
            Arc::new(move |z: &CVec| g.metric_at(z)),
            Domain::ball(1.0),
            "bergman-components",
        );
        let z = cvec(&[c(0.21, -0.13), c(0.05, 0.33)]);
        let a = f.metric_derivatives(&z, 2).unwrap();
        let b = comp.metric_derivatives(&z, 2).unwrap();
        for j in 0..2 {
            assert!(frobenius(&(&a.dz[j] - &b.dz[j])) < 1e-7);
            for l in 0..2 {
                assert!(frobenius(&(&a.ddbar[j][l] - &b.ddbar[j][l])) < 1e-5);
            }
        }
    }

    #[test]
    fn potential_wins_over_components() {
        let pot: Arc<dyn Potential> = Arc::new(ExprPotential::parse("abs2(z1) + abs2(z2)", 2).unwrap());
        let comp: Arc<ComponentFn> = Arc::new(|_z: &CVec| Ok(identity(2) * c(5.0, 0.0)));
        let f = MetricField::from_sources(2, Some(pot), Some(comp), Domain::ball(1.0)).unwrap();
        assert!(f.is_potential_backed());
        assert!((f.metric_at(&CVec::zeros(2)).unwrap()[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
    }
}
