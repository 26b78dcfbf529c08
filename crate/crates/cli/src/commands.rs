use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use spaceform::developing::{DevelopOptions, Developer, FrameChoice, Germ, PathPolyline};
use spaceform::engine::{verify_space_form, MetricField, OdeOptions, Puncture, ShootingOptions};
use spaceform::extension::{extend_metric, ExtendConfig, Injection};
use spaceform::linalg::{identity, inverse, op_norm, to_pairs, CMat, CVec};
use spaceform::models::{isometries_equal, ModelIsometry, ModelPoint, ModelSpace};
use spaceform::probes::{
    cone_profile, derivative_jump, geometric_distances, jacobian_minimum, pullback_curvature_report, punctured_grid,
    RealMap,
};
use spaceform::{Error, Result};

use crate::config::{bad, matrix, RunConfig};
use crate::output::{write_atomic, write_csv};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Result of one command: the JSON report and whether every check passed.
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

pub fn run(command: &str, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out).map_err(io)?;
    let (pass, body, mut files) = match command {
        "verify-space-form" => verify(cfg)?,
        "develop" => develop(cfg, out)?,
        "monodromy" => monodromy(cfg, out)?,
        "extend" => extend(cfg, out)?,
        "probe" => probe(cfg, out)?,
        other => return Err(bad(&format!("unknown command `{other}`"))),
    };
    let report = json!({
        "command": command,
        "version": VERSION,
        "pass": pass,
        "config": serde_json::to_value(cfg).map_err(|e| bad(&e.to_string()))?,
        "result": body,
    });
    let text = serde_json::to_string_pretty(&report).map_err(|e| bad(&e.to_string()))? + "\n";
    let path = out.join(format!("{command}_report.json"));
    write_atomic(&path, text.as_bytes())?;
    files.push(path);
    Ok(Outcome { pass, files })
}

pub fn io(e: std::io::Error) -> Error {
    Error::InvalidParameter(format!("i/o: {e}"))
}

type Produced = (bool, Value, Vec<PathBuf>);

fn rng(cfg: &RunConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed)
}

fn develop_options(cfg: &RunConfig) -> DevelopOptions {
    let t = &cfg.tolerances;
    DevelopOptions {
        ode: OdeOptions {
            rtol: t.ode_rtol,
            atol: t.ode_atol,
            ..OdeOptions::default()
        },
        shooting: ShootingOptions {
            tol: t.shooting,
            ..ShootingOptions::default()
        },
        space_form_tol: t.space_form,
        knn: cfg.develop.knn,
        max_edge: cfg.develop.max_edge,
        ..DevelopOptions::default()
    }
}

fn frame_choice(cfg: &RunConfig) -> Result<FrameChoice> {
    match cfg.base.frame.as_str() {
        "identity" => Ok(FrameChoice::Identity),
        "standard" => Ok(FrameChoice::Standard),
        "unitary" => {
            let rows = cfg
                .base
                .frame_matrix
                .as_ref()
                .ok_or_else(|| bad("unitary frame needs `frame_matrix`"))?;
            Ok(FrameChoice::Unitary(matrix(rows, cfg.metric().n)?))
        }
        other => Err(bad(&format!("unknown frame `{other}`"))),
    }
}

fn sample_limit(field: &MetricField) -> f64 {
    0.9 * field.domain().radius.min(1.0)
}

/// Uniform rejection samples with `inner ≤ |z| ≤ outer` that pass the domain
/// and guard checks.
fn sample_shell(field: &MetricField, count: usize, inner: f64, outer: f64, rng: &mut ChaCha8Rng) -> Result<Vec<CVec>> {
    let n = field.dim();
    if outer.is_nan() || inner.is_nan() || outer <= inner {
        return Err(bad(&format!("empty sampling shell [{inner}, {outer}]")));
    }
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::Geometry("could not place samples in the domain".into()));
        }
        let z = CVec::from_fn(n, |_, _| {
            spaceform::linalg::c(outer * (2.0 * rng.gen::<f64>() - 1.0), outer * (2.0 * rng.gen::<f64>() - 1.0))
        });
        let r = z.norm();
        if r >= inner && r <= outer && field.check_point(&z).is_ok() {
            out.push(z);
        }
    }
    Ok(out)
}

fn verify(cfg: &RunConfig) -> Result<Produced> {
    let field = cfg.field()?;
    let radius = cfg.verify.radius.unwrap_or_else(|| sample_limit(&field));
    let mut rng = rng(cfg);
    let samples = sample_shell(&field, cfg.verify.samples, 0.0, radius, &mut rng)?;
    let report = verify_space_form(
        &field,
        &samples,
        cfg.target_c(),
        cfg.verify.tuples,
        cfg.tolerances.space_form,
        &mut rng,
    );
    let body = json!({
        "pass": report.pass,
        "max_residual": report.residual,
        "best_fit_c": report.metric("best_fit_c"),
        "calibration_sign": report.metric("calibration_sign"),
        "report": report,
    });
    Ok((report.pass, body, Vec::new()))
}

fn complex_header(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).flat_map(|k| [format!("{prefix}{k}_re"), format!("{prefix}{k}_im")]).collect()
}

fn push_complex(row: &mut Vec<String>, v: &CVec) {
    for x in v.iter() {
        row.push(x.re.to_string());
        row.push(x.im.to_string());
    }
}

fn germ_header(n: usize) -> Vec<String> {
    let mut h = complex_header("z", n);
    h.extend(complex_header("F", n));
    h.extend(["chart".to_string(), "det_re".to_string(), "det_im".to_string()]);
    h
}

/// One CSV row: center, image (standard coordinates when available) and
/// `det dF`.
fn germ_row(model: &ModelSpace, germ: &Germ) -> Vec<String> {
    let mut row = Vec::new();
    push_complex(&mut row, &germ.center);
    let (coords, chart, det) = match model.standard_coords(&germ.image) {
        Ok(z) if !germ.image.is_standard() => {
            let (_, d) = model.rechart(&germ.image, model.dim).expect("standard chart");
            (z, model.dim, (d * &germ.frame).determinant())
        }
        Ok(z) => (z, model.dim, germ.frame.determinant()),
        Err(_) => (germ.image.coords.clone(), germ.image.chart, germ.frame.determinant()),
    };
    push_complex(&mut row, &coords);
    row.push(chart.to_string());
    row.push(det.re.to_string());
    row.push(det.im.to_string());
    row
}

fn default_inner(field: &MetricField) -> f64 {
    let mut r: f64 = 0.0;
    for p in &field.domain().punctures {
        if let Puncture::Ball { center, radius } = p {
            r = r.max(center.norm() + radius);
        }
    }
    r + 0.05
}

fn develop(cfg: &RunConfig, out: &Path) -> Result<Produced> {
    let field = cfg.field()?;
    let developer = Developer::new(&field, cfg.target_c())?.with_options(develop_options(cfg));
    let germ = developer.initial_germ(&cfg.base_point()?, &frame_choice(cfg)?)?;
    let inner = cfg.develop.inner.unwrap_or_else(|| default_inner(&field));
    let outer = cfg.develop.outer.unwrap_or_else(|| sample_limit(&field));
    let samples = sample_shell(&field, cfg.develop.samples, inner, outer, &mut rng(cfg))?;
    let dev = developer.develop_region(&germ, &samples)?;
    let report = developer.verify_pullback(&dev, cfg.tolerances.pullback);
    let rows: Vec<Vec<String>> = dev.germs.iter().map(|g| germ_row(&developer.model, g)).collect();
    let path = out.join("develop.csv");
    write_csv(&path, &germ_header(field.dim()), &rows)?;
    let body = json!({
        "base": {"center": to_pairs(&germ.center), "image": to_pairs(&germ.image.coords), "chart": germ.image.chart},
        "samples": dev.len(),
        "pullback": report,
    });
    Ok((report.pass, body, vec![path]))
}

fn build_path(cfg: &RunConfig, index: usize, base: &CVec) -> Result<PathPolyline> {
    let spec = &cfg.paths[index];
    let path = match (&spec.points, spec.rotation) {
        (Some(points), None) => {
            let pts = points.iter().map(|p| cfg.point(p)).collect::<Result<Vec<_>>>()?;
            if pts.len() < 2 {
                return Err(bad("a path needs at least two points"));
            }
            PathPolyline::new(pts).subdivide(spec.pieces.max(1))
        }
        (None, Some(axis)) => {
            if axis == 0 || axis > base.len() {
                return Err(bad("rotation axis out of range"));
            }
            PathPolyline::rotation_loop(base, axis - 1, spec.turns, spec.pieces.max(1))
        }
        _ => return Err(bad("each path needs exactly one of `points` or `rotation`")),
    };
    if spaceform::linalg::norm(&(path.start() - base)) > 1e-12 {
        return Err(bad(&format!("path {} does not start at the base point", index + 1)));
    }
    Ok(path)
}

/// Continue vertex by vertex, keeping each intermediate germ.
fn continue_tracked(developer: &Developer, germ: &Germ, path: &PathPolyline) -> Result<Vec<Germ>> {
    let mut germs = vec![germ.clone()];
    for w in path.points.windows(2) {
        let last = germs.last().expect("non-empty");
        germs.push(developer.continue_germ(last, &PathPolyline::new(vec![w[0].clone(), w[1].clone()]))?);
    }
    Ok(germs)
}

fn holonomy(developer: &Developer, base: &Germ, end: &Germ) -> Result<(ModelIsometry, f64)> {
    let a0 = inverse(&base.frame).ok_or_else(|| Error::Geometry("singular base frame".into()))?;
    let g = developer
        .model
        .isometry_from_frame_data(&base.image, &end.image, &(&end.frame * a0), 1e-6)?;
    let residual = developer.germ_deviation(&developer.transform_germ(&g, base)?, end)?;
    Ok((g, residual))
}

/// Model points near the base image on which isometries are compared.
fn probe_points(base: &Germ) -> Vec<ModelPoint> {
    let n = base.image.coords.len();
    let mut pts = vec![base.image.clone()];
    for k in 0..n {
        for s in [0.1, -0.1] {
            let mut p = base.image.clone();
            p.coords[k] += spaceform::linalg::c(s, 0.5 * s);
            pts.push(p);
        }
    }
    pts
}

fn monodromy(cfg: &RunConfig, out: &Path) -> Result<Produced> {
    let field = cfg.field()?;
    let n = field.dim();
    let tol = cfg.tolerances.monodromy;
    let developer = Developer::new(&field, cfg.target_c())?.with_options(develop_options(cfg));
    let base_point = cfg.base_point()?;
    let germ = developer.initial_germ(&base_point, &frame_choice(cfg)?)?;
    let points = probe_points(&germ);
    let mut pass = true;
    let mut rows = Vec::new();
    let mut loops = Vec::new();
    let mut isometries = Vec::new();
    for i in 0..cfg.paths.len() {
        let spec = &cfg.paths[i];
        let path = build_path(cfg, i, &base_point)?;
        if !path.is_closed(1e-9) {
            return Err(bad(&format!("path {} is not a closed loop", i + 1)));
        }
        let germs = continue_tracked(&developer, &germ, &path)?;
        for g in &germs {
            let mut row = vec![(i + 1).to_string()];
            row.extend(germ_row(&developer.model, g));
            rows.push(row);
        }
        let (g, residual) = holonomy(&developer, &germ, germs.last().expect("non-empty"))?;
        let mut entry = json!({
            "index": i + 1,
            "name": spec.name,
            "isometry": g,
            "linear_part": g.linear_part().row_iter().map(|r| r.iter().map(|x| [x.re, x.im]).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "residual": residual,
            "residual_pass": residual <= tol,
        });
        let mut ok = residual <= tol;
        if let Some(expect) = &spec.expect {
            if expect != "identity" {
                return Err(bad(&format!("unknown expectation `{expect}`")));
            }
            let (eq, gap) = isometries_equal(&g, &ModelIsometry::identity(developer.model), &points, tol)?;
            entry["expect_identity_gap"] = json!(gap);
            ok &= eq;
        }
        if let Some(rows) = &spec.expect_linear {
            let want: CMat = matrix(rows, n)?;
            let gap = op_norm(&(g.linear_part() - want));
            entry["expect_linear_gap"] = json!(gap);
            ok &= gap <= tol;
        }
        entry["pass"] = json!(ok);
        pass &= ok;
        loops.push(entry);
        isometries.push((g, path));
    }
    let mut words = Vec::new();
    for w in &cfg.words {
        let mut path: Option<PathPolyline> = None;
        let mut composed = ModelIsometry::identity(developer.model);
        for &k in &w.loops {
            let (g, p) = &isometries[k.unsigned_abs() as usize - 1];
            let (g, p) = if k > 0 { (g.clone(), p.clone()) } else { (g.inverse()?, p.reversed()) };
            composed = composed.compose(&g);
            path = Some(match path {
                None => p,
                Some(acc) => acc.then(&p),
            });
        }
        let path = path.expect("validated non-empty word");
        let direct = developer.monodromy(&germ, &path)?;
        let (eq, gap) = isometries_equal(&direct.isometry, &composed, &points, tol)?;
        pass &= eq;
        words.push(json!({"loops": w.loops, "gap": gap, "pass": eq}));
    }
    let mut header = vec!["path".to_string()];
    header.extend(germ_header(n));
    let csv_path = out.join("monodromy.csv");
    write_csv(&csv_path, &header, &rows)?;
    let body = json!({"loops": loops, "words": words});
    Ok((pass, body, vec![csv_path]))
}

fn parse_injection(text: &str) -> Result<Injection> {
    if text == "conjugate" {
        return Ok(Injection::Conjugate);
    }
    if let Some(s) = text.strip_prefix("scale:") {
        let f: f64 = s.parse().map_err(|_| bad(&format!("bad scale factor `{s}`")))?;
        return Ok(Injection::Scale(f));
    }
    Err(bad(&format!("unknown injection `{text}`")))
}

fn extend(cfg: &RunConfig, out: &Path) -> Result<Produced> {
    let field = cfg.field()?;
    let n = field.dim();
    let e = &cfg.extension;
    let t = &cfg.tolerances;
    let mut ec = ExtendConfig::new(n);
    ec.base = cfg.base_point()?;
    ec.frame = frame_choice(cfg)?;
    ec.rho = e.rho;
    ec.degree = e.degree;
    ec.grid = e.grid;
    ec.slice_grid = e.slice_grid;
    ec.holo_tol = t.holomorphy;
    ec.agreement_tol = t.agreement;
    ec.agreement_samples = e.agreement_samples;
    ec.det_threshold = t.det_threshold;
    ec.jacobian_radius = e.jacobian_radius;
    ec.jacobian_grid = e.jacobian_grid;
    ec.origin_tol = t.origin;
    ec.reference_origin = cfg.origin_scale().map(|s| identity(n) * spaceform::linalg::c(s, 0.0));
    ec.inject = e.inject.as_deref().map(parse_injection).transpose()?;
    ec.develop = develop_options(cfg);
    ec.seed = cfg.seed;
    let ext = extend_metric(&field, cfg.target_c(), &ec)?;
    let mut files = Vec::new();
    if let Some(series) = &ext.series {
        let path = out.join("series.txt");
        write_atomic(&path, series.to_text().as_bytes())?;
        files.push(path);
    }
    if let Some(g) = &ext.field {
        let k = e.output_grid.max(2);
        let limit = 0.9 * ext.report.lambda.min(1.0);
        let mut header = complex_header("z", n);
        for a in 1..=n {
            for b in a..=n {
                header.push(format!("g{a}{b}_re"));
                header.push(format!("g{a}{b}_im"));
            }
        }
        let mut rows = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let x = -limit + 2.0 * limit * i as f64 / (k - 1) as f64;
                let y = -limit + 2.0 * limit * j as f64 / (k - 1) as f64;
                let mut z = CVec::zeros(n);
                z[0] = spaceform::linalg::c(x, 0.0);
                z[1] = spaceform::linalg::c(y, 0.0);
                if z.norm() > limit {
                    continue;
                }
                let Ok(m) = g.metric_at(&z) else { continue };
                let mut row = Vec::new();
                push_complex(&mut row, &z);
                for a in 0..n {
                    for b in a..n {
                        row.push(m[(a, b)].re.to_string());
                        row.push(m[(a, b)].im.to_string());
                    }
                }
                rows.push(row);
            }
        }
        let path = out.join("metric_grid.csv");
        write_csv(&path, &header, &rows)?;
        files.push(path);
    }
    let pass = ext.report.pass;
    Ok((pass, json!({ "extension": ext.report }), files))
}

fn probe(cfg: &RunConfig, out: &Path) -> Result<Produced> {
    let spec = cfg.probe.as_ref().expect("validated");
    let tol = cfg.tolerances.probe;
    match spec.kind.as_str() {
        "f-minus-one" => {
            let n = spec.n;
            if n < 2 {
                return Err(bad("f-minus-one probe needs n ≥ 2"));
            }
            let map = RealMap::f_minus_one(n);
            let grid = punctured_grid(n, spec.grid, spec.extent);
            let sweep = jacobian_minimum(&map, &grid)?;
            let bound = 0.5f64.powi(n as i32 + 1) - 1e-9;
            let dirs: Vec<DVector<f64>> = (0..n).map(|k| DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 })).collect();
            let jumps = derivative_jump(&map, &dirs, &[1e-2, 1e-3, 1e-4])?;
            let jump_ok = jumps.iter().all(|j| (j.jump - 0.5).abs() <= 1e-6);
            let curvature = pullback_curvature_report(&map, -1.0, spec.curvature_samples, cfg.seed, tol);
            let pass = sweep.min_det >= bound && jump_ok && curvature.pass;
            let mut header: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
            header.extend(["hsc", "det_j", "distance"].map(String::from));
            let rows: Vec<Vec<String>> = sweep
                .rows
                .iter()
                .map(|(x, d)| {
                    let mut r: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                    r.push(String::new());
                    r.push(d.to_string());
                    r.push(x.norm().to_string());
                    r
                })
                .collect();
            let path = out.join("probe.csv");
            write_csv(&path, &header, &rows)?;
            let body = json!({
                "min_det": sweep.min_det,
                "min_det_bound": bound,
                "min_det_location": sweep.location,
                "grid_points": sweep.points,
                "jumps": jumps,
                "curvature": curvature,
            });
            Ok((pass, body, vec![path]))
        }
        "cone" => {
            let entry = spec.entry.as_deref().ok_or_else(|| bad("cone probe needs `entry`"))?;
            let distances = geometric_distances(spec.start, spec.ratio, spec.floor);
            let profile = cone_profile(entry, &spec.beta, &spec.rest, &distances, cfg.seed)?;
            let expected = if entry == "cone-log" { -4.0 } else { 0.0 };
            let hsc_gap = (profile.hsc_min - expected).abs().max((profile.hsc_max - expected).abs());
            let pass = hsc_gap <= tol;
            let n = spec.beta.len();
            let mut header = complex_header("z", n);
            header.extend(["hsc", "det_j", "distance"].map(String::from));
            let rows: Vec<Vec<String>> = profile
                .rows
                .iter()
                .map(|r| {
                    let mut row: Vec<String> = r.point.iter().flat_map(|p| [p[0].to_string(), p[1].to_string()]).collect();
                    row.push(r.hsc.to_string());
                    row.push(r.det.to_string());
                    row.push(r.distance.to_string());
                    row
                })
                .collect();
            let path = out.join("probe.csv");
            write_csv(&path, &header, &rows)?;
            let body = json!({"expected_hsc": expected, "hsc_gap": hsc_gap, "profile": profile});
            Ok((pass, body, vec![path]))
        }
        other => Err(bad(&format!("unknown probe kind `{other}`"))),
    }
}
