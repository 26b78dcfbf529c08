//! Holomorphic extension of developed maps across a compact hole or the plane
//! `{z₁ = z₂ = 0}` by Cauchy integration over a distinguished torus.
//!
//! Torus values are transformed with an n-dimensional DFT; nonnegative
//! frequencies scaled by `ρ^{−k}` are the Taylor coefficients, and the mass
//! left in negative frequencies measures how far the data is from holomorphic.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::developing::{DevelopOptions, DevelopedField, Developer, FrameChoice, Germ};
use crate::engine::{Domain, MetricField, Puncture};
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius, inverse, norm, CMat, CVec, C64};
use crate::models::{CurvatureSign, ModelIsometry, ModelPoint, ModelSpace, CHART_BOUND};
use crate::report::VerificationReport;

/// Product grid on the torus `{|z_i| = radii[i]}` with `sizes[i]` angles per
/// axis. Flat indices run with the last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TorusGrid {
    pub radii: Vec<f64>,
    pub sizes: Vec<usize>,
}

impl TorusGrid {
    pub fn uniform(n: usize, rho: f64, m: usize) -> Self {
        Self {
            radii: vec![rho; n],
            sizes: vec![m; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.radii.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = flat % self.sizes[a];
            flat /= self.sizes[a];
        }
        idx
    }

    pub fn point(&self, flat: usize) -> CVec {
        let idx = self.multi_index(flat);
        CVec::from_fn(self.dim(), |a, _| {
            let theta = std::f64::consts::TAU * idx[a] as f64 / self.sizes[a] as f64;
            c(self.radii[a] * theta.cos(), self.radii[a] * theta.sin())
        })
    }

    pub fn points(&self) -> Vec<CVec> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// In-place forward DFT over every axis of a row-major array, normalized by
/// the total size.
fn fft_nd(data: &mut [C64], shape: &[usize]) {
    let mut planner = FftPlanner::<f64>::new();
    let total: usize = shape.iter().product();
    let mut stride = 1;
    for a in (0..shape.len()).rev() {
        let len = shape[a];
        let fft = planner.plan_fft_forward(len);
        let mut line = vec![c(0.0, 0.0); len];
        let outer = total / (len * stride);
        for o in 0..outer {
            for s in 0..stride {
                let start = o * len * stride + s;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
        stride *= len;
    }
    let scale = 1.0 / total as f64;
    data.iter_mut().for_each(|v| *v *= scale);
}

/// Truncated Taylor series of a holomorphic map about the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeriesMap {
    pub n: usize,
    pub degree: usize,
    /// Polyradius of the torus the series was computed from.
    pub rho: Vec<f64>,
    /// Coordinate scale of the source domain (its radius).
    pub lambda: f64,
    /// Model chart of the values (see [`ModelPoint::chart`]).
    pub chart: usize,
    pub terms: Vec<Vec<usize>>,
    /// `coeffs[t][i]`: coefficient of `z^{terms[t]}` in component `i`.
    pub coeffs: Vec<CVec>,
    pub negative_mass: f64,
    pub torus_max: f64,
    pub torus_residual: f64,
}

impl PowerSeriesMap {
    pub fn coefficient(&self, k: &[usize]) -> Option<&CVec> {
        self.terms.iter().position(|t| t == k).map(|i| &self.coeffs[i])
    }

    fn powers(&self, z: &CVec) -> Vec<Vec<C64>> {
        (0..self.n)
            .map(|a| {
                let mut p = Vec::with_capacity(self.degree + 1);
                let mut acc = c(1.0, 0.0);
                for _ in 0..=self.degree {
                    p.push(acc);
                    acc *= z[a];
                }
                p
            })
            .collect()
    }

    pub fn eval(&self, z: &CVec) -> CVec {
        let pw = self.powers(z);
        let mut out = CVec::zeros(self.coeffs.first().map_or(self.n, |v| v.len()));
        for (k, a) in self.terms.iter().zip(&self.coeffs) {
            let mono: C64 = k.iter().enumerate().map(|(i, &e)| pw[i][e]).product();
            out += a * mono;
        }
        out
    }

    /// Exact term-wise derivative: `J[i][j] = ∂F_i/∂z_j`.
    pub fn jacobian(&self, z: &CVec) -> CMat {
        let pw = self.powers(z);
        let comps = self.coeffs.first().map_or(self.n, |v| v.len());
        let mut j = CMat::zeros(comps, self.n);
        for (k, a) in self.terms.iter().zip(&self.coeffs) {
            for var in 0..self.n {
                if k[var] == 0 {
                    continue;
                }
                let mut mono = c(k[var] as f64, 0.0);
                for (i, &e) in k.iter().enumerate() {
                    mono *= if i == var { pw[i][e - 1] } else { pw[i][e] };
                }
                for comp in 0..comps {
                    j[(comp, var)] += a[comp] * mono;
                }
            }
        }
        j
    }

    /// Text export: `key value…` header lines, then per component a
    /// `component i` line followed by `k₁ … k_n re im` rows.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        writeln!(s, "# spaceform power series").ok();
        writeln!(s, "n {}", self.n).ok();
        writeln!(s, "degree {}", self.degree).ok();
        writeln!(s, "rho {}", join(&self.rho)).ok();
        writeln!(s, "lambda {:e}", self.lambda).ok();
        writeln!(s, "chart {}", self.chart).ok();
        writeln!(s, "negative_mass {:e}", self.negative_mass).ok();
        let comps = self.coeffs.first().map_or(0, |v| v.len());
        for comp in 0..comps {
            writeln!(s, "component {}", comp + 1).ok();
            for (k, a) in self.terms.iter().zip(&self.coeffs) {
                let idx: Vec<String> = k.iter().map(|e| e.to_string()).collect();
                writeln!(s, "{} {:e} {:e}", idx.join(" "), a[comp].re, a[comp].im).ok();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::Syntax {
            line: line + 1,
            column: 1,
            expected: vec![what.to_string()],
        };
        let mut n = 0;
        let mut degree = 0;
        let mut rho = Vec::new();
        let (mut lambda, mut chart, mut negative_mass) = (1.0, usize::MAX, 0.0);
        let mut comps: Vec<Vec<(Vec<usize>, C64)>> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default();
            let rest: Vec<&str> = parts.collect();
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(ln, "number"));
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad(ln, "integer"));
            match key {
                "n" => n = int(rest.first().ok_or_else(|| bad(ln, "integer"))?)?,
                "degree" => degree = int(rest.first().ok_or_else(|| bad(ln, "integer"))?)?,
                "rho" => rho = rest.iter().map(|s| num(s)).collect::<Result<_>>()?,
                "lambda" => lambda = num(rest.first().ok_or_else(|| bad(ln, "number"))?)?,
                "chart" => chart = int(rest.first().ok_or_else(|| bad(ln, "integer"))?)?,
                "negative_mass" => negative_mass = num(rest.first().ok_or_else(|| bad(ln, "number"))?)?,
                "component" => comps.push(Vec::new()),
                _ => {
                    let row: Vec<&str> = std::iter::once(key).chain(rest).collect();
                    if row.len() != n + 2 || comps.is_empty() {
                        return Err(bad(ln, "k1 … kn re im"));
                    }
                    let k = row[..n].iter().map(|s| int(s)).collect::<Result<Vec<_>>>()?;
                    let v = c(num(row[n])?, num(row[n + 1])?);
                    comps.last_mut().expect("component started").push((k, v));
                }
            }
        }
        let terms: Vec<Vec<usize>> = comps.first().map(|v| v.iter().map(|(k, _)| k.clone()).collect()).unwrap_or_default();
        if comps.iter().any(|cv| cv.len() != terms.len() || cv.iter().zip(&terms).any(|((k, _), t)| k != t)) {
            return Err(bad(0, "identical multi-index lists per component"));
        }
        let coeffs = (0..terms.len())
            .map(|t| CVec::from_fn(comps.len(), |i, _| comps[i][t].1))
            .collect();
        Ok(Self {
            n,
            degree,
            rho,
            lambda,
            chart: if chart == usize::MAX { n } else { chart },
            terms,
            coeffs,
            negative_mass,
            torus_max: 0.0,
            torus_residual: 0.0,
        })
    }
}

fn max_modulus(values: &[CVec]) -> f64 {
    values
        .iter()
        .flat_map(|v| v.iter().map(|x| x.norm()))
        .fold(0.0, f64::max)
}

/// Taylor coefficients from values of a map on a distinguished torus.
///
/// Fails with a not-holomorphic error when the negative-frequency mass exceeds
/// `holo_tol · max|F|`.
pub fn torus_extend(grid: &TorusGrid, values: &[CVec], degree: usize, holo_tol: f64) -> Result<PowerSeriesMap> {
    let n = grid.dim();
    if values.len() != grid.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            got: values.len(),
        });
    }
    if let Some(&m) = grid.sizes.iter().find(|&&m| m < 3) {
        return Err(Error::InvalidParameter(format!("torus grid of size {m} is too coarse")));
    }
    let comps = values.first().map_or(n, |v| v.len());
    let mut spectra = Vec::with_capacity(comps);
    for comp in 0..comps {
        let mut data: Vec<C64> = values.iter().map(|v| v[comp]).collect();
        fft_nd(&mut data, &grid.sizes);
        spectra.push(data);
    }
    let mut negative_mass = 0.0;
    let mut terms = Vec::new();
    let mut coeffs = Vec::new();
    for flat in 0..grid.len() {
        let k = grid.multi_index(flat);
        let negative = k.iter().zip(&grid.sizes).any(|(&ki, &m)| 2 * ki >= m);
        if negative {
            negative_mass += spectra.iter().map(|s| s[flat].norm()).sum::<f64>();
            continue;
        }
        if k.iter().sum::<usize>() > degree {
            continue;
        }
        let scale: f64 = k.iter().zip(&grid.radii).map(|(&ki, &r)| r.powi(-(ki as i32))).product();
        terms.push(k);
        coeffs.push(CVec::from_fn(comps, |i, _| spectra[i][flat] * scale));
    }
    let torus_max = max_modulus(values).max(f64::MIN_POSITIVE);
    let tolerance = holo_tol * torus_max.max(1.0);
    if !(negative_mass <= tolerance) {
        return Err(Error::NotHolomorphic {
            mass: negative_mass,
            tolerance,
        });
    }
    // Order terms by total degree, then lexicographically.
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&a, &b| terms[a].iter().sum::<usize>().cmp(&terms[b].iter().sum::<usize>()).then(terms[a].cmp(&terms[b])));
    let mut series = PowerSeriesMap {
        n,
        degree,
        rho: grid.radii.clone(),
        lambda: 1.0,
        chart: n,
        terms: order.iter().map(|&i| terms[i].clone()).collect(),
        coeffs: order.iter().map(|&i| coeffs[i].clone()).collect(),
        negative_mass,
        torus_max,
        torus_residual: 0.0,
    };
    series.torus_residual = (0..grid.len())
        .map(|i| norm(&(series.eval(&grid.point(i)) - &values[i])))
        .fold(0.0, f64::max);
    Ok(series)
}

/// Per-slice extensions in the first two coordinates, plus the series
/// assembled over the whole grid.
#[derive(Debug, Clone)]
pub struct SliceExtension {
    /// Values of the slice coordinates `(z₃, …)` for each slice.
    pub slice_points: Vec<CVec>,
    pub slices: Vec<PowerSeriesMap>,
    pub assembled: PowerSeriesMap,
    /// Largest gap between a slice series and the assembled series on a
    /// check grid inside the slice polydisc.
    pub continuity: f64,
}

/// Extend slice by slice: for each grid point of the trailing axes a 2-torus
/// extension in `(z₁, z₂)`, then a DFT across slices.
pub fn slice_extend(grid: &TorusGrid, values: &[CVec], degree: usize, holo_tol: f64) -> Result<SliceExtension> {
    let n = grid.dim();
    if n < 2 {
        return Err(Error::InvalidParameter("slice extension needs n ≥ 2".into()));
    }
    let plane = TorusGrid {
        radii: grid.radii[..2].to_vec(),
        sizes: grid.sizes[..2].to_vec(),
    };
    let rest = TorusGrid {
        radii: grid.radii[2..].to_vec(),
        sizes: grid.sizes[2..].to_vec(),
    };
    let slices_count = rest.len().max(1);
    let mut slices = Vec::with_capacity(slices_count);
    let mut slice_points = Vec::with_capacity(slices_count);
    for s in 0..slices_count {
        // Flat index = plane_index * slices_count + s.
        let vals: Vec<CVec> = (0..plane.len()).map(|p| values[p * slices_count + s].clone()).collect();
        slices.push(torus_extend(&plane, &vals, degree, holo_tol)?);
        slice_points.push(if rest.dim() == 0 { CVec::zeros(0) } else { rest.point(s) });
    }
    let assembled = torus_extend(grid, values, degree, holo_tol)?;
    let mut continuity: f64 = 0.0;
    for (series, w) in slices.iter().zip(&slice_points) {
        for i in 0..9 {
            let theta = std::f64::consts::TAU * i as f64 / 9.0;
            let mut z = CVec::zeros(n);
            z[0] = c(0.5 * plane.radii[0] * theta.cos(), 0.5 * plane.radii[0] * theta.sin());
            z[1] = c(0.5 * plane.radii[1] * (2.0 * theta).sin(), 0.0);
            for (a, wa) in w.iter().enumerate() {
                z[2 + a] = *wa;
            }
            let zs = CVec::from_fn(2, |a, _| z[a]);
            continuity = continuity.max(norm(&(series.eval(&zs) - assembled.eval(&z))));
        }
    }
    Ok(SliceExtension {
        slice_points,
        slices,
        assembled,
        continuity,
    })
}

/// Minimum `|det dF|` over `points`; passes iff it reaches `threshold`.
pub fn jacobian_check(series: &PowerSeriesMap, points: &[CVec], threshold: f64) -> VerificationReport {
    let mut best = (f64::INFINITY, 0usize);
    for (i, z) in points.iter().enumerate() {
        let d = series.jacobian(z).determinant().norm();
        if d < best.0 || d.is_nan() {
            best = (d, i);
        }
    }
    let mut report = VerificationReport::new("jacobian", -best.0, -threshold)
        .with_metric("min_det", best.0)
        .with_metric("threshold", threshold)
        .with_metric("grid_points", points.len() as f64);
    if let Some(z) = points.get(best.1) {
        report = report.with_note(format!("minimum at {:?}", crate::linalg::to_pairs(z)));
    }
    report
}

/// Maximum-principle witness for `h = Σ|F_i|²`. For `c < 0` passes iff the
/// boundary maximum is below 1 and the interior never exceeds it by more
/// than `1e-8`; for `c > 0` checks that every value stays inside its chart.
pub fn containment_check(
    series: &PowerSeriesMap,
    model: &ModelSpace,
    boundary: &[CVec],
    interior: &[CVec],
) -> VerificationReport {
    let h = |v: &CVec| v.norm_squared();
    let boundary_max = boundary.iter().map(h).fold(0.0, f64::max);
    let interior_max = interior.iter().map(|z| h(&series.eval(z))).fold(0.0, f64::max);
    match model.sign() {
        CurvatureSign::Zero => VerificationReport::new("containment", 0.0, 0.0)
            .with_metric("margin", f64::INFINITY)
            .with_note("flat model: containment is automatic"),
        CurvatureSign::Negative => {
            let excess = interior_max - boundary_max;
            let margin = 1.0 - boundary_max;
            let pass = excess <= 1e-8 && margin > 0.0;
            let mut r = VerificationReport::new("containment", excess.max(-margin), 1e-8)
                .with_metric("margin", margin)
                .with_metric("boundary_max", boundary_max)
                .with_metric("interior_max", interior_max);
            r.pass = pass;
            r
        }
        CurvatureSign::Positive => {
            let bound = CHART_BOUND * CHART_BOUND;
            let worst = boundary_max.max(interior_max);
            VerificationReport::new("containment", worst, bound)
                .with_metric("margin", bound - worst)
                .with_metric("boundary_max", boundary_max)
                .with_metric("interior_max", interior_max)
                .with_note("positive model: chart validity check")
        }
    }
}

/// Faults injected into torus data for negative tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Injection {
    /// Replace the first component by its conjugate.
    Conjugate,
    /// Multiply all values by a constant.
    Scale(f64),
}

#[derive(Debug, Clone)]
pub struct ExtendConfig {
    pub base: CVec,
    pub frame: FrameChoice,
    /// Torus polyradius; `None` picks the midpoint of the admissible interval.
    pub rho: Option<f64>,
    pub degree: usize,
    pub grid: usize,
    /// Angles per trailing axis when `n > 2` and the puncture is the plane.
    pub slice_grid: Option<usize>,
    pub holo_tol: f64,
    pub agreement_tol: f64,
    pub agreement_samples: usize,
    pub det_threshold: f64,
    pub jacobian_radius: f64,
    pub jacobian_grid: usize,
    pub origin_tol: f64,
    /// Expected metric at the origin, if known.
    pub reference_origin: Option<CMat>,
    pub inject: Option<Injection>,
    pub develop: DevelopOptions,
    pub seed: u64,
}

impl ExtendConfig {
    pub fn new(n: usize) -> Self {
        let mut base = CVec::zeros(n);
        base[0] = c(0.5, 0.0);
        Self {
            base,
            frame: FrameChoice::Identity,
            rho: None,
            degree: 20,
            grid: 64,
            slice_grid: None,
            holo_tol: 1e-6,
            agreement_tol: 1e-5,
            agreement_samples: 200,
            det_threshold: 1e-6,
            jacobian_radius: 0.3,
            jacobian_grid: 7,
            origin_tol: 1e-6,
            reference_origin: None,
            inject: None,
            develop: DevelopOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    pub pass: bool,
    pub lambda: f64,
    pub rho: Vec<f64>,
    pub degree: usize,
    pub grid: Vec<usize>,
    pub checks: Vec<VerificationReport>,
}

impl ExtensionReport {
    pub fn check(&self, name: &str) -> Option<&VerificationReport> {
        self.checks.iter().find(|r| r.check == name)
    }
}

/// Result of [`extend_metric`]. `field` and `series` are absent when the run
/// stopped at the holomorphy check.
#[derive(Clone)]
pub struct Extension {
    pub model: ModelSpace,
    pub base: Germ,
    pub grid: TorusGrid,
    pub developed: Option<DevelopedField>,
    pub series: Option<PowerSeriesMap>,
    pub field: Option<MetricField>,
    pub report: ExtensionReport,
}

/// Radius of the excluded set (`0` for the plane) and whether it is the plane.
fn excluded_radius(domain: &Domain) -> Result<(f64, bool)> {
    let mut r: f64 = 0.0;
    let mut plane = false;
    for p in &domain.punctures {
        match p {
            Puncture::Ball { center, radius } => r = r.max(center.norm() + radius),
            Puncture::Plane => plane = true,
            Puncture::Divisor(j) => {
                return Err(Error::Geometry(format!(
                    "extension across the divisor z{}=0 is not supported",
                    j + 1
                )))
            }
        }
    }
    Ok((r, plane))
}

/// Pullback metric `dFᴴ G(F) dF` of a series.
pub fn series_metric(series: &PowerSeriesMap, model: &ModelSpace, z: &CVec) -> Result<CMat> {
    let f = series.eval(z);
    let j = series.jacobian(z);
    let g = model.metric_at(&ModelPoint { coords: f, chart: series.chart })?;
    Ok(j.adjoint() * g * j)
}

/// Real grid with `k` points per real axis inside `|z_i| ≤ box_radius`,
/// filtered by `keep`.
fn real_grid(n: usize, box_radius: f64, k: usize, keep: impl Fn(&CVec) -> bool) -> Vec<CVec> {
    let axis: Vec<f64> = (0..k)
        .map(|i| if k == 1 { 0.0 } else { -box_radius + 2.0 * box_radius * i as f64 / (k - 1) as f64 })
        .collect();
    let total = k.pow(2 * n as u32);
    let mut out = Vec::new();
    for mut flat in 0..total {
        let mut v = vec![0.0; 2 * n];
        for slot in v.iter_mut() {
            *slot = axis[flat % k];
            flat /= k;
        }
        let z = CVec::from_fn(n, |i, _| c(v[2 * i], v[2 * i + 1]));
        if keep(&z) {
            out.push(z);
        }
    }
    out
}

/// Develop the field on a distinguished torus around the excluded set, extend
/// the developing map inward and pull the model metric back.
pub fn extend_metric(field: &MetricField, c_target: f64, cfg: &ExtendConfig) -> Result<Extension> {
    let n = field.dim();
    if n < 2 {
        return Err(Error::InvalidParameter("extension needs n ≥ 2".into()));
    }
    let domain = field.domain().clone();
    let lambda = domain.radius;
    let (r, plane) = excluded_radius(&domain)?;
    let upper = lambda / (n as f64).sqrt();
    if !(r < upper) {
        return Err(Error::Geometry(format!(
            "excluded set of radius {r} does not fit inside a torus of the domain (needs r < {upper})"
        )));
    }
    let rho = cfg.rho.unwrap_or(0.5 * (r + upper));
    if !(rho > r && rho < upper) {
        return Err(Error::Geometry(format!("torus radius {rho} is outside the admissible interval ({r}, {upper})")));
    }
    let mut grid = TorusGrid::uniform(n, rho, cfg.grid);
    if plane && n > 2 {
        let ms = cfg.slice_grid.unwrap_or(cfg.grid);
        for a in 2..n {
            grid.sizes[a] = ms;
        }
    }
    for z in grid.points() {
        field.check_point(&z).map_err(|e| Error::Geometry(format!("torus meets the excluded set: {e}")))?;
    }

    let developer = Developer::new(field, c_target)?.with_options(cfg.develop);
    let model = developer.model;
    let base = developer.initial_germ(&cfg.base, &cfg.frame)?;
    let samples = grid.points();
    let developed = developer.develop_region(&base, &samples)?;

    // Express all images in one chart.
    let mut chart = n;
    let mut values = Vec::with_capacity(samples.len());
    let standard_ok = developed.germs.iter().all(|g| g.image.is_standard());
    if !standard_ok {
        let target = (0..=n)
            .find(|&k| {
                developed.germs.iter().all(|g| {
                    model
                        .rechart(&g.image, k)
                        .map(|(q, _)| q.coords.iter().all(|x| x.norm() <= CHART_BOUND))
                        .unwrap_or(false)
                })
            })
            .ok_or_else(|| Error::ChartFailure("no single affine chart contains the torus image".into()))?;
        chart = target;
    }
    for g in &developed.germs {
        let v = if g.image.chart == chart {
            g.image.coords.clone()
        } else {
            model.rechart(&g.image, chart)?.0.coords
        };
        values.push(v);
    }
    match cfg.inject {
        Some(Injection::Conjugate) => values.iter_mut().for_each(|v| v[0] = v[0].conj()),
        Some(Injection::Scale(s)) => values.iter_mut().for_each(|v| *v *= c(s, 0.0)),
        None => {}
    }

    let mut report = ExtensionReport {
        pass: false,
        lambda,
        rho: grid.radii.clone(),
        degree: cfg.degree,
        grid: grid.sizes.clone(),
        checks: Vec::new(),
    };
    let extended = if plane && n > 2 {
        slice_extend(&grid, &values, cfg.degree, cfg.holo_tol).map(|s| (s.assembled.clone(), Some(s)))
    } else {
        torus_extend(&grid, &values, cfg.degree, cfg.holo_tol).map(|s| (s, None))
    };
    let (mut series, slices) = match extended {
        Ok(v) => v,
        Err(Error::NotHolomorphic { mass, tolerance }) => {
            report.checks.push(
                VerificationReport::new("holomorphy", mass, tolerance).with_note("negative-frequency mass too large"),
            );
            return Ok(Extension {
                model,
                base,
                grid,
                developed: Some(developed),
                series: None,
                field: None,
                report,
            });
        }
        Err(e) => return Err(e),
    };
    series.lambda = lambda;
    series.chart = chart;
    let holo_scale = series.torus_max.max(1.0);
    let mut holo = VerificationReport::new("holomorphy", series.negative_mass, cfg.holo_tol * holo_scale)
        .with_metric("torus_residual", series.torus_residual)
        .with_metric("torus_max", series.torus_max);
    if let Some(s) = &slices {
        holo = holo.with_metric("slice_continuity", s.continuity).with_metric("slices", s.slices.len() as f64);
        if s.continuity > 1e-6 * holo_scale {
            holo = holo.with_note("slice series disagree with the assembled series").fail();
        }
    }
    report.checks.push(holo);

    let inside = |z: &CVec| z.iter().zip(&grid.radii).all(|(x, &rr)| x.norm() <= 0.98 * rr);
    let jac_box = cfg.jacobian_radius.min(0.98 * rho);
    let jac_points = real_grid(n, jac_box, cfg.jacobian_grid, |z| z.norm() <= cfg.jacobian_radius && inside(z));
    report.checks.push(jacobian_check(&series, &jac_points, cfg.det_threshold));

    let interior = real_grid(n, 0.98 * rho, if n > 2 { 5 } else { 7 }, inside);
    report.checks.push(containment_check(&series, &model, &values, &interior));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    let mut attempts = 0;
    while taken < cfg.agreement_samples && attempts < 1000 * cfg.agreement_samples.max(1) {
        attempts += 1;
        let z = CVec::from_fn(n, |a, _| {
            let rad = 0.9 * grid.radii[a] * rng.gen::<f64>().sqrt();
            let th = rng.gen::<f64>() * std::f64::consts::TAU;
            c(rad * th.cos(), rad * th.sin())
        });
        if field.check_point(&z).is_err() {
            continue;
        }
        taken += 1;
        let g = field.metric_at(&z)?;
        let gt = series_metric(&series, &model, &z)?;
        worst = worst.max(frobenius(&(gt - g)));
    }
    report.checks.push(
        VerificationReport::new("agreement", if taken == 0 { f64::NAN } else { worst }, cfg.agreement_tol)
            .with_metric("samples", taken as f64),
    );

    let origin = CVec::zeros(n);
    let g0 = series_metric(&series, &model, &origin)?;
    let origin_report = match &cfg.reference_origin {
        Some(reference) => VerificationReport::new("origin_metric", frobenius(&(&g0 - reference)), cfg.origin_tol),
        None => VerificationReport::new("origin_metric", 0.0, cfg.origin_tol).with_note("no reference metric supplied"),
    };
    let origin_report = (0..n).fold(origin_report, |r, i| r.with_metric(&format!("g{}{}", i + 1, i + 1), g0[(i, i)].re));
    report.checks.push(origin_report);
    report.pass = report.checks.iter().all(|r| r.pass);

    let polyradius = grid.radii.clone();
    let fallback = field.clone();
    let s2 = series.clone();
    let components = move |z: &CVec| -> Result<CMat> {
        if z.iter().zip(&polyradius).all(|(x, &rr)| x.norm() < 0.98 * rr) {
            series_metric(&s2, &model, z)
        } else {
            fallback.metric_at(z)
        }
    };
    let extended_field = MetricField::from_components(n, Arc::new(components), Domain::ball(lambda), &format!("{} (extended)", field.label()));
    Ok(Extension {
        model,
        base,
        grid,
        developed: Some(developed),
        series: Some(series),
        field: Some(extended_field),
        report,
    })
}

/// Compare two extensions of one field. The witness `τ` is built from the
/// base germs (the second continued to the first base point when they
/// differ) and must satisfy `S₁ = τ ∘ S₂` on `points`; the report residual is
/// the largest metric gap `‖g̃₁ − g̃₂‖`.
pub fn uniqueness_compare(
    e1: &Extension,
    e2: &Extension,
    field: &MetricField,
    points: &[CVec],
    tol: f64,
    map_tol: f64,
) -> Result<(VerificationReport, ModelIsometry)> {
    let model = e1.model;
    let developer = Developer::new(field, model.c)?;
    let g2 = if norm(&(&e1.base.center - &e2.base.center)) > 1e-12 {
        developer.continue_germ(&e2.base, &crate::developing::PathPolyline::segment(&e2.base.center, &e1.base.center, 1))?
    } else {
        e2.base.clone()
    };
    let a2_inv = inverse(&g2.frame).ok_or_else(|| Error::Geometry("singular base frame".into()))?;
    let tau = model.isometry_from_frame_data(&g2.image, &e1.base.image, &(&e1.base.frame * a2_inv), 1e-6)?;
    let (s1, s2) = match (&e1.series, &e2.series) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidParameter("both extensions need a series".into())),
    };
    let mut map_gap: f64 = 0.0;
    let mut metric_gap: f64 = 0.0;
    for z in points {
        let p1 = ModelPoint { coords: s1.eval(z), chart: s1.chart };
        let p2 = ModelPoint { coords: s2.eval(z), chart: s2.chart };
        let image = tau.apply(&p2)?;
        map_gap = map_gap.max(crate::models::projective_gap(&model, &p1, &image));
        let m1 = series_metric(s1, &model, z)?;
        let m2 = series_metric(s2, &model, z)?;
        metric_gap = metric_gap.max(frobenius(&(m1 - m2)));
    }
    let mut report = VerificationReport::new("uniqueness", metric_gap, tol)
        .with_metric("map_gap", map_gap)
        .with_metric("map_tolerance", map_tol)
        .with_metric("samples", points.len() as f64)
        .with_metric("tau_group_residual", tau.group_residual());
    if map_gap > map_tol {
        report = report.with_note("D1 = tau o D2 fails on the samples").fail();
    }
    Ok((report, tau))
}
