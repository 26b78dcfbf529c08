//! Named built-in metrics and holomorphic test maps.

use std::sync::Arc;

use super::eval::{eval, eval_jet, ExprPotential};
use super::{parse_with_dim, Expr};
use crate::engine::field::wirtinger;
use crate::engine::{Domain, MetricField, Puncture};
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};

/// Parameters shared by catalog constructors. Unused fields are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogParams {
    pub n: usize,
    /// Holomorphic sectional curvature; each entry has its own default.
    pub c: Option<f64>,
    /// Cone angles `β_j` (cone entries only).
    pub beta: Vec<f64>,
    /// Domain radius; defaults to 1 (0.6 for `cone-log`).
    pub radius: Option<f64>,
}

impl CatalogParams {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            c: None,
            beta: Vec::new(),
            radius: None,
        }
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }

    pub fn with_beta(mut self, beta: &[f64]) -> Self {
        self.beta = beta.to_vec();
        self
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    Field,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub kind: EntryKind,
    pub params: &'static [&'static str],
    pub description: &'static str,
}

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "flat",
        kind: EntryKind::Field,
        params: &["n", "radius"],
        description: "Euclidean metric, potential Σ|z_j|²",
    },
    CatalogEntry {
        name: "bergman",
        kind: EntryKind::Field,
        params: &["n", "c<0", "radius"],
        description: "ball metric (4/|c|)·(−log(1 − Σ|z_j|²)), curvature c (default −4)",
    },
    CatalogEntry {
        name: "fubini-study",
        kind: EntryKind::Field,
        params: &["n", "c>0", "radius"],
        description: "affine chart of projective space, (4/c)·log(1 + Σ|z_j|²), curvature c (default 4)",
    },
    CatalogEntry {
        name: "cone-flat",
        kind: EntryKind::Field,
        params: &["n", "beta", "radius"],
        description: "Σ|z_j|^{2β_j}: flat away from the divisors {z_j = 0} with β_j ≠ 1",
    },
    CatalogEntry {
        name: "cone-log",
        kind: EntryKind::Field,
        params: &["n", "beta", "c<0", "radius"],
        description: "(4/|c|)·(−log(1 − Σ|z_j|^{2β_j})): ball metric pulled back by a branched cover",
    },
    CatalogEntry {
        name: "identity",
        kind: EntryKind::Map,
        params: &["n"],
        description: "z ↦ z",
    },
    CatalogEntry {
        name: "conjugate",
        kind: EntryKind::Map,
        params: &["n"],
        description: "z ↦ (z̄₁, z₂, …): antiholomorphic in the first variable",
    },
    CatalogEntry {
        name: "polynomial",
        kind: EntryKind::Map,
        params: &["n"],
        description: "z ↦ (z₁², z₁z₂ + 1, z₃, …)",
    },
];

pub fn catalog_entries() -> &'static [CatalogEntry] {
    ENTRIES
}

/// A holomorphic map `ℂⁿ → ℂⁿ` given by component expressions.
#[derive(Debug, Clone)]
pub struct HolomorphicMap {
    pub n: usize,
    pub components: Vec<Expr>,
}

impl HolomorphicMap {
    pub fn parse(components: &[&str], n: usize) -> Result<Self> {
        if components.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: components.len(),
            });
        }
        let components = components
            .iter()
            .map(|t| parse_with_dim(t, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, components })
    }

    pub fn eval(&self, z: &CVec) -> Result<CVec> {
        let values = self
            .components
            .iter()
            .map(|e| eval(e, z.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        Ok(CVec::from_vec(values))
    }

    /// Complex Jacobian `∂F_i/∂z_j` (holomorphic part).
    pub fn jacobian(&self, z: &CVec) -> Result<CMat> {
        let n = self.n;
        let mut j = CMat::zeros(n, n);
        for (i, e) in self.components.iter().enumerate() {
            let jet = eval_jet(e, z.as_slice(), 1)?;
            for k in 0..n {
                j[(i, k)] = wirtinger(&jet, &[k], &[]);
            }
        }
        Ok(j)
    }
}

#[derive(Debug, Clone)]
pub enum CatalogItem {
    Field(MetricField),
    Map(HolomorphicMap),
}

impl CatalogItem {
    pub fn into_field(self) -> Result<MetricField> {
        match self {
            CatalogItem::Field(f) => Ok(f),
            CatalogItem::Map(_) => Err(Error::InvalidParameter("catalog entry is a map, not a metric".into())),
        }
    }

    pub fn into_map(self) -> Result<HolomorphicMap> {
        match self {
            CatalogItem::Map(m) => Ok(m),
            CatalogItem::Field(_) => Err(Error::InvalidParameter("catalog entry is a metric, not a map".into())),
        }
    }
}

fn sum_abs2(n: usize) -> String {
    (1..=n).map(|k| format!("abs2(z{k})")).collect::<Vec<_>>().join(" + ")
}

fn minus_abs2(n: usize) -> String {
    (1..=n).map(|k| format!(" - abs2(z{k})")).collect::<String>()
}

fn scaled(scale: f64, body: String) -> String {
    if scale == 1.0 {
        body
    } else {
        format!("{scale:?}*{body}")
    }
}

fn cone_terms(beta: &[f64]) -> Vec<String> {
    beta.iter()
        .enumerate()
        .map(|(j, &b)| {
            if b == 1.0 {
                format!("abs2(z{})", j + 1)
            } else {
                format!("abs2(z{})^{b:?}", j + 1)
            }
        })
        .collect()
}

fn curvature(params: &CatalogParams, default: f64, sign: f64, name: &str) -> Result<f64> {
    let c = params.c.unwrap_or(default);
    if !(c * sign > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} needs curvature of sign {sign:+}, got {c}")));
    }
    Ok(c)
}

fn check_beta(params: &CatalogParams) -> Result<()> {
    if params.beta.len() != params.n {
        return Err(Error::InvalidParameter(format!(
            "beta needs {} entries, got {}",
            params.n,
            params.beta.len()
        )));
    }
    if let Some(b) = params.beta.iter().find(|b| !(**b > 0.0) || !b.is_finite()) {
        return Err(Error::InvalidParameter(format!("cone angle beta must be positive, got {b}")));
    }
    Ok(())
}

fn field_from(text: &str, params: &CatalogParams, domain: Domain, name: &str) -> Result<MetricField> {
    let potential = ExprPotential::parse(text, params.n)?;
    Ok(MetricField::from_potential(params.n, Arc::new(potential), domain).with_label(name))
}

/// Construct a named metric field or holomorphic map.
pub fn catalog(name: &str, params: &CatalogParams) -> Result<CatalogItem> {
    let n = params.n;
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let radius = params.radius.unwrap_or(if name == "cone-log" { 0.6 } else { 1.0 });
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {radius}")));
    }
    let domain = Domain::ball(radius);
    let field = match name {
        "flat" => field_from(&sum_abs2(n), params, domain, name)?,
        "bergman" => {
            let c = curvature(params, -4.0, -1.0, name)?;
            let text = scaled(4.0 / c.abs(), format!("(-log(1{}))", minus_abs2(n)));
            field_from(&text, params, domain, name)?
        }
        "fubini-study" => {
            let c = curvature(params, 4.0, 1.0, name)?;
            let text = scaled(4.0 / c, format!("log(1 + {})", sum_abs2(n)));
            field_from(&text, params, domain, name)?
        }
        "cone-flat" | "cone-log" => {
            check_beta(params)?;
            let terms = cone_terms(&params.beta);
            let text = if name == "cone-flat" {
                terms.join(" + ")
            } else {
                let c = curvature(params, -4.0, -1.0, name)?;
                let inner: String = terms.iter().map(|t| format!(" - {t}")).collect();
                scaled(4.0 / c.abs(), format!("(-log(1{inner}))"))
            };
            let mut domain = domain;
            for (j, &b) in params.beta.iter().enumerate() {
                if b != 1.0 {
                    domain = domain.with_puncture(Puncture::Divisor(j));
                }
            }
            field_from(&text, params, domain, name)?
        }
        "identity" => {
            let comps: Vec<String> = (1..=n).map(|k| format!("z{k}")).collect();
            return map_from(&comps, n);
        }
        "conjugate" => {
            let comps: Vec<String> = (1..=n)
                .map(|k| if k == 1 { "conj(z1)".to_string() } else { format!("z{k}") })
                .collect();
            return map_from(&comps, n);
        }
        "polynomial" => {
            if n < 2 {
                return Err(Error::InvalidParameter("polynomial map needs n ≥ 2".into()));
            }
            let comps: Vec<String> = (1..=n)
                .map(|k| match k {
                    1 => "z1^2".to_string(),
                    2 => "z1*z2 + 1".to_string(),
                    _ => format!("z{k}"),
                })
                .collect();
            return map_from(&comps, n);
        }
        other => return Err(Error::UnknownCatalog(other.to_string())),
    };
    Ok(CatalogItem::Field(field))
}

fn map_from(components: &[String], n: usize) -> Result<CatalogItem> {
    let refs: Vec<&str> = components.iter().map(String::as_str).collect();
    Ok(CatalogItem::Map(HolomorphicMap::parse(&refs, n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cvec, frobenius, identity};

    #[test]
    fn names_are_unique() {
        let mut names: Vec<_> = catalog_entries().iter().map(|e| e.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), catalog_entries().len());
    }

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(catalog("nope", &CatalogParams::new(2)), Err(Error::UnknownCatalog(_))));
        let p = CatalogParams::new(2).with_beta(&[0.5, -1.0]);
        assert!(matches!(catalog("cone-flat", &p), Err(Error::InvalidParameter(_))));
        let p = CatalogParams::new(2).with_c(3.0);
        assert!(catalog("bergman", &p).is_err());
    }

    #[test]
    fn cone_flat_with_unit_angles_is_flat() {
        let p = CatalogParams::new(2).with_beta(&[1.0, 1.0]);
        let f = catalog("cone-flat", &p).unwrap().into_field().unwrap();
        assert!(f.domain().punctures.is_empty());
        let z = cvec(&[c(0.3, 0.1), c(-0.2, 0.4)]);
        assert_eq!(f.metric_at(&z).unwrap(), identity(2));
    }

    #[test]
    fn cone_entries_puncture_the_divisor() {
        let p = CatalogParams::new(2).with_beta(&[0.5, 1.0]);
        let f = catalog("cone-flat", &p).unwrap().into_field().unwrap();
        assert_eq!(f.domain().punctures, vec![Puncture::Divisor(0)]);
        // |z|^{2β} gives β²|z|^{2β−2} on the diagonal.
        let m = f.metric_at(&cvec(&[c(0.25, 0.0), c(0.1, 0.0)])).unwrap();
        assert!((m[(0, 0)].re - 0.25 * 0.25f64.powf(-1.0)).abs() < 1e-12);
    }

    #[test]
    fn scaled_bergman_has_scaled_metric() {
        let f = catalog("bergman", &CatalogParams::new(2).with_c(-1.0)).unwrap().into_field().unwrap();
        let m = f.metric_at(&CVec::zeros(2)).unwrap();
        assert!(frobenius(&(m - identity(2) * c(4.0, 0.0))) < 1e-13);
    }

    #[test]
    fn maps() {
        let m = catalog("polynomial", &CatalogParams::new(2)).unwrap().into_map().unwrap();
        let z = cvec(&[c(0.5, 0.5), c(2.0, 0.0)]);
        let f = m.eval(&z).unwrap();
        assert!((f[0] - z[0] * z[0]).norm() < 1e-15);
        let j = m.jacobian(&z).unwrap();
        assert!((j[(0, 0)] - z[0] * 2.0).norm() < 1e-14);
        assert!((j[(1, 0)] - z[1]).norm() < 1e-14);
        let conj = catalog("conjugate", &CatalogParams::new(2)).unwrap().into_map().unwrap();
        assert!(conj.jacobian(&z).unwrap()[(0, 0)].norm() < 1e-15);
    }
}
