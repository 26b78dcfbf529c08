//! Run configuration: a sectioned `key = value` file (TOML syntax).
//!
//! Every field has a default except the metric source, so the resolved
//! configuration embedded in each report is fully explicit.

use serde::{Deserialize, Serialize};

use spaceform::dsl::{catalog, CatalogParams};
use spaceform::engine::{MetricField, Puncture};
use spaceform::linalg::{cvec_from_pairs, CMat, CVec};

pub type Pair = [f64; 2];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; when present it must name the subcommand being run.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub puncture: Option<PunctureSpec>,
    #[serde(default)]
    pub base: BaseSpec,
    #[serde(default)]
    pub paths: Vec<PathSpec>,
    #[serde(default)]
    pub words: Vec<WordSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub develop: DevelopSpec,
    #[serde(default)]
    pub extension: ExtensionSpec,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub n: usize,
    /// Target holomorphic sectional curvature; defaults to the catalog value.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub catalog: Option<String>,
    /// Kähler potential in the expression language.
    #[serde(default)]
    pub potential: Option<String>,
    /// Curvature parameter passed to the catalog constructor.
    #[serde(default)]
    pub catalog_c: Option<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PunctureSpec {
    /// `ball`, `plane` or `divisor`.
    pub kind: String,
    #[serde(default)]
    pub center: Option<Vec<Pair>>,
    #[serde(default)]
    pub radius: Option<f64>,
    /// 1-based coordinate index for `divisor`.
    #[serde(default)]
    pub axis: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    /// Defaults to `0.5·e₁`.
    #[serde(default)]
    pub point: Option<Vec<Pair>>,
    /// `identity`, `standard` or `unitary` (with `frame_matrix`).
    #[serde(default = "default_frame")]
    pub frame: String,
    #[serde(default)]
    pub frame_matrix: Option<Vec<Vec<Pair>>>,
}

impl Default for BaseSpec {
    fn default() -> Self {
        Self {
            point: None,
            frame: default_frame(),
            frame_matrix: None,
        }
    }
}

fn default_frame() -> String {
    "identity".into()
}

/// A path or loop: explicit vertices, or a rotation `z_axis ↦ z_axis e^{iθ}`
/// of the base point.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub points: Option<Vec<Vec<Pair>>>,
    #[serde(default)]
    pub rotation: Option<usize>,
    #[serde(default = "one")]
    pub turns: f64,
    #[serde(default = "default_pieces")]
    pub pieces: usize,
    /// `identity`, or a matrix the linear part must match.
    #[serde(default)]
    pub expect: Option<String>,
    #[serde(default)]
    pub expect_linear: Option<Vec<Vec<Pair>>>,
}

fn one() -> f64 {
    1.0
}

fn default_pieces() -> usize {
    64
}

/// A loop word: 1-based path indices, negative for the reversed loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordSpec {
    pub loops: Vec<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub ode_rtol: f64,
    pub ode_atol: f64,
    pub shooting: f64,
    pub space_form: f64,
    pub monodromy: f64,
    pub pullback: f64,
    pub holomorphy: f64,
    pub agreement: f64,
    pub origin: f64,
    pub det_threshold: f64,
    pub probe: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ode_rtol: 1e-9,
            ode_atol: 1e-11,
            shooting: 1e-12,
            space_form: 1e-5,
            monodromy: 1e-6,
            pullback: 1e-6,
            holomorphy: 1e-6,
            agreement: 1e-5,
            origin: 1e-6,
            det_threshold: 1e-6,
            probe: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    pub samples: usize,
    pub tuples: usize,
    /// Samples are drawn with `|z| ≤ radius`; defaults to `0.9·min(R, 1)`.
    pub radius: Option<f64>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            samples: 100,
            tuples: 20,
            radius: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DevelopSpec {
    pub samples: usize,
    /// Sample shell `inner ≤ |z| ≤ outer`; defaults clear the punctures.
    pub inner: Option<f64>,
    pub outer: Option<f64>,
    pub knn: usize,
    pub max_edge: f64,
}

impl Default for DevelopSpec {
    fn default() -> Self {
        Self {
            samples: 200,
            inner: None,
            outer: None,
            knn: 8,
            max_edge: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtensionSpec {
    pub rho: Option<f64>,
    pub degree: usize,
    pub grid: usize,
    pub slice_grid: Option<usize>,
    pub agreement_samples: usize,
    pub jacobian_radius: f64,
    pub jacobian_grid: usize,
    /// Expected `g̃(0) = s·I`; defaults to the catalog value when known.
    pub origin_scale: Option<f64>,
    /// Test hook: `conjugate` or `scale:<factor>`.
    pub inject: Option<String>,
    /// Points per axis of the emitted metric grid.
    pub output_grid: usize,
}

impl Default for ExtensionSpec {
    fn default() -> Self {
        Self {
            rho: None,
            degree: 20,
            grid: 64,
            slice_grid: None,
            agreement_samples: 200,
            jacobian_radius: 0.3,
            jacobian_grid: 7,
            origin_scale: None,
            inject: None,
            output_grid: 11,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// `f-minus-one` or `cone`.
    pub kind: String,
    #[serde(default = "three")]
    pub n: usize,
    #[serde(default = "ten")]
    pub grid: usize,
    #[serde(default = "extent")]
    pub extent: f64,
    #[serde(default = "fifty")]
    pub curvature_samples: usize,
    /// Cone probes: catalog entry, angles and the fixed trailing coordinates.
    #[serde(default)]
    pub entry: Option<String>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub rest: Vec<Pair>,
    #[serde(default = "start")]
    pub start: f64,
    #[serde(default = "ratio")]
    pub ratio: f64,
    #[serde(default = "floor")]
    pub floor: f64,
}

fn three() -> usize {
    3
}
fn ten() -> usize {
    10
}
fn fifty() -> usize {
    50
}
fn extent() -> f64 {
    0.9
}
fn start() -> f64 {
    0.3
}
fn ratio() -> f64 {
    0.5
}
fn floor() -> f64 {
    5e-3
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    /// Check command-specific requirements.
    pub fn validate(&self, command: &str) -> Result<(), ConfigError> {
        if let Some(c) = &self.command {
            if c != command {
                return err(format!("config is for `{c}` but `{command}` was invoked"));
            }
        }
        let t = &self.tolerances;
        let all = [
            t.ode_rtol,
            t.ode_atol,
            t.shooting,
            t.space_form,
            t.monodromy,
            t.pullback,
            t.holomorphy,
            t.agreement,
            t.origin,
            t.det_threshold,
            t.probe,
        ];
        if all.iter().any(|x| *x <= 0.0 || !x.is_finite()) {
            return err("tolerances must be positive and finite");
        }
        if command == "probe" {
            if self.probe.is_none() {
                return err("probe needs a [probe] section");
            }
            return Ok(());
        }
        let metric = match &self.metric {
            Some(m) => m,
            None => return err(format!("{command} needs a [metric] section")),
        };
        if metric.n == 0 {
            return err("metric.n must be at least 1");
        }
        if metric.catalog.is_some() == metric.potential.is_some() {
            return err("metric needs exactly one of `catalog` or `potential`");
        }
        if metric.potential.is_some() && metric.c.is_none() {
            return err("a potential-defined metric needs the target curvature `c`");
        }
        match command {
            "monodromy" if self.paths.is_empty() => return err("monodromy needs at least one [[paths]] loop"),
            "extend" => match self.puncture.as_ref().map(|p| p.kind.as_str()) {
                Some("ball") | Some("plane") => {}
                _ => return err("extend needs a ball or plane [puncture]"),
            },
            _ => {}
        }
        for w in &self.words {
            if w.loops.iter().any(|&k| k == 0 || k.unsigned_abs() as usize > self.paths.len()) {
                return err(format!("word {:?} refers to a missing path", w.loops));
            }
        }
        Ok(())
    }

    pub fn metric(&self) -> &MetricSpec {
        self.metric.as_ref().expect("validated")
    }

    /// Target curvature: explicit, else the catalog entry's own value.
    pub fn target_c(&self) -> f64 {
        let m = self.metric();
        if let Some(c) = m.c {
            return c;
        }
        match m.catalog.as_deref() {
            Some("bergman") | Some("cone-log") => m.catalog_c.unwrap_or(-4.0),
            Some("fubini-study") => m.catalog_c.unwrap_or(4.0),
            _ => 0.0,
        }
    }

    /// `g(0)` of the catalog metric as a multiple of the identity, if known.
    pub fn origin_scale(&self) -> Option<f64> {
        if let Some(s) = self.extension.origin_scale {
            return Some(s);
        }
        let m = self.metric();
        match m.catalog.as_deref() {
            Some("flat") => Some(1.0),
            Some("bergman") => Some(4.0 / m.catalog_c.unwrap_or(-4.0).abs()),
            Some("fubini-study") => Some(4.0 / m.catalog_c.unwrap_or(4.0)),
            _ => None,
        }
    }

    pub fn field(&self) -> spaceform::Result<MetricField> {
        let m = self.metric();
        let mut field = if let Some(name) = &m.catalog {
            let mut p = CatalogParams::new(m.n).with_beta(&m.beta);
            p.c = m.catalog_c;
            p.radius = m.radius;
            catalog(name, &p)?.into_field()?
        } else {
            let text = m.potential.as_deref().unwrap_or_default();
            let domain = spaceform::engine::Domain::ball(m.radius.unwrap_or(1.0));
            MetricField::parse_potential(text, m.n, domain)?
        };
        if let Some(p) = &self.puncture {
            let puncture = match p.kind.as_str() {
                "ball" => Puncture::Ball {
                    center: match &p.center {
                        Some(c) => self.point(c)?,
                        None => CVec::zeros(m.n),
                    },
                    radius: p.radius.ok_or_else(|| bad("ball puncture needs `radius`"))?,
                },
                "plane" => {
                    if m.n < 2 {
                        return Err(bad("plane puncture needs n ≥ 2"));
                    }
                    Puncture::Plane
                }
                "divisor" => {
                    let a = p.axis.ok_or_else(|| bad("divisor puncture needs `axis`"))?;
                    if a == 0 || a > m.n {
                        return Err(bad("divisor axis out of range"));
                    }
                    Puncture::Divisor(a - 1)
                }
                other => return Err(bad(&format!("unknown puncture kind `{other}`"))),
            };
            let domain = field.domain().clone().with_puncture(puncture);
            field = field.with_domain(domain);
        }
        Ok(field)
    }

    pub fn point(&self, pairs: &[Pair]) -> spaceform::Result<CVec> {
        let n = self.metric().n;
        if pairs.len() != n {
            return Err(spaceform::Error::Dimension {
                expected: n,
                got: pairs.len(),
            });
        }
        Ok(cvec_from_pairs(pairs))
    }

    pub fn base_point(&self) -> spaceform::Result<CVec> {
        match &self.base.point {
            Some(p) => self.point(p),
            None => {
                let mut z = CVec::zeros(self.metric().n);
                z[0] = spaceform::linalg::c(0.5, 0.0);
                Ok(z)
            }
        }
    }
}

pub fn bad(msg: &str) -> spaceform::Error {
    spaceform::Error::InvalidParameter(msg.to_string())
}

pub fn matrix(rows: &[Vec<Pair>], n: usize) -> spaceform::Result<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(bad(&format!("expected a {n}×{n} matrix")));
    }
    Ok(CMat::from_fn(n, n, |i, j| spaceform::linalg::c(rows[i][j][0], rows[i][j][1])))
}
