//! Developing maps by analytic continuation of local isometry germs.
//!
//! A germ `(p, q, A)` stands for the local isometry `exp_q ∘ A ∘ exp_p⁻¹` from
//! the field near `p` to the model space near `q`. Continuation moves the germ
//! along short segments: the field side by geodesic shooting and transport,
//! the model side exactly through its isometry group.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::engine::{geodesic_with_frame, log_map, verify_space_form, MetricField, OdeOptions, ShootingOptions};
use crate::error::{Error, Result};
use crate::linalg::{c, frobenius, identity, inverse, norm, op_norm, orthonormal_frame, CMat, CVec};
use crate::models::{projective_gap, ModelIsometry, ModelPoint, ModelSpace};
use crate::report::VerificationReport;

/// Local developing data: `frame` maps `T_center` to `T_image` and satisfies
/// `frameᴴ G(image) frame = g(center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Germ {
    pub center: CVec,
    pub image: ModelPoint,
    pub frame: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameChoice {
    /// Image at the model origin; orthonormal frames matched column by column.
    Standard,
    /// Image at the same coordinates as the center.
    Identity,
    /// As [`FrameChoice::Identity`], with the model frame rotated by a unitary.
    Unitary(CMat),
    /// Caller-supplied image and frame, validated against the germ invariant.
    Explicit { image: ModelPoint, frame: CMat },
}

/// A polyline in the field's coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPolyline {
    pub points: Vec<CVec>,
}

impl PathPolyline {
    pub fn new(points: Vec<CVec>) -> Self {
        Self { points }
    }

    /// Straight segment split into `pieces` equal parts.
    pub fn segment(a: &CVec, b: &CVec, pieces: usize) -> Self {
        let pieces = pieces.max(1);
        let points = (0..=pieces)
            .map(|i| a + (b - a) * c(i as f64 / pieces as f64, 0.0))
            .collect();
        Self { points }
    }

    /// Loop `z_j ↦ z_j e^{iθ}`, θ from 0 to `2π·turns`, starting at `base`.
    pub fn rotation_loop(base: &CVec, j: usize, turns: f64, pieces: usize) -> Self {
        let points = (0..=pieces)
            .map(|i| {
                let theta = std::f64::consts::TAU * turns * i as f64 / pieces as f64;
                let mut z = base.clone();
                z[j] *= c(theta.cos(), theta.sin());
                z
            })
            .collect();
        Self { points }
    }

    pub fn start(&self) -> &CVec {
        &self.points[0]
    }

    pub fn end(&self) -> &CVec {
        &self.points[self.points.len() - 1]
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        norm(&(self.start() - self.end())) <= tol
    }

    pub fn reversed(&self) -> Self {
        Self {
            points: self.points.iter().rev().cloned().collect(),
        }
    }

    /// This path followed by `other` (which must start where this one ends).
    pub fn then(&self, other: &PathPolyline) -> Self {
        let mut points = self.points.clone();
        points.extend(other.points.iter().skip(1).cloned());
        Self { points }
    }

    /// Split every segment into `k` equal pieces.
    pub fn subdivide(&self, k: usize) -> Self {
        let mut points = vec![self.points[0].clone()];
        for w in self.points.windows(2) {
            for i in 1..=k {
                points.push(&w[0] + (&w[1] - &w[0]) * c(i as f64 / k as f64, 0.0));
            }
        }
        Self { points }
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| norm(&(&w[1] - &w[0]))).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DevelopOptions {
    pub ode: OdeOptions,
    pub shooting: ShootingOptions,
    /// Maximum recursive halvings of a segment that fails to shoot.
    pub max_depth: usize,
    /// Relative tolerance for the germ invariant on explicit frames.
    pub frame_tol: f64,
    /// Tolerance of the space-form check at the base point.
    pub space_form_tol: f64,
    /// Neighbors per sample in the continuation graph.
    pub knn: usize,
    /// Longest edge of the continuation graph.
    pub max_edge: f64,
}

impl Default for DevelopOptions {
    fn default() -> Self {
        Self {
            ode: OdeOptions::default(),
            shooting: ShootingOptions::default(),
            max_depth: 10,
            frame_tol: 1e-7,
            space_form_tol: 1e-5,
            knn: 8,
            max_edge: 1.0,
        }
    }
}

/// Developed values at a sample set. Index `i` of `germs` belongs to
/// `points[i]`; `parent[i]` is the node the germ was continued from, with
/// `None` meaning the base germ.
#[derive(Debug, Clone)]
pub struct DevelopedField {
    pub base: Germ,
    pub points: Vec<CVec>,
    pub germs: Vec<Germ>,
    pub parent: Vec<Option<usize>>,
}

impl DevelopedField {
    pub fn image(&self, i: usize) -> &ModelPoint {
        &self.germs[i].image
    }

    pub fn differential(&self, i: usize) -> &CMat {
        &self.germs[i].frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Monodromy {
    pub isometry: ModelIsometry,
    pub continued: Germ,
    /// Mismatch between `g` applied to the base germ and the continued germ.
    pub residual: f64,
}

/// Binds a field to the model space it is developed into.
#[derive(Clone)]
pub struct Developer<'a> {
    pub field: &'a MetricField,
    pub model: ModelSpace,
    pub opts: DevelopOptions,
}

impl<'a> Developer<'a> {
    pub fn new(field: &'a MetricField, c_target: f64) -> Result<Self> {
        Ok(Self {
            field,
            model: ModelSpace::new(c_target, field.dim())?,
            opts: DevelopOptions::default(),
        })
    }

    pub fn with_options(mut self, opts: DevelopOptions) -> Self {
        self.opts = opts;
        self
    }

    /// `‖Aᴴ G(q) A − g(p)‖ / max(1, ‖g(p)‖)`.
    pub fn germ_residual(&self, germ: &Germ) -> Result<f64> {
        let g = self.field.metric_at(&germ.center)?;
        let h = self.model.metric_at(&germ.image)?;
        let pulled = germ.frame.adjoint() * h * &germ.frame;
        Ok(frobenius(&(pulled - &g)) / frobenius(&g).max(1.0))
    }

    pub fn initial_germ(&self, p: &CVec, choice: &FrameChoice) -> Result<Germ> {
        let g = self.field.metric_at(p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = verify_space_form(
            self.field,
            std::slice::from_ref(p),
            self.model.c,
            8,
            self.opts.space_form_tol,
            &mut rng,
        );
        if !report.pass {
            return Err(Error::NotSpaceForm { residual: report.residual });
        }
        let ef = orthonormal_frame(&g, p)?;
        let ef_inv = inverse(&ef).ok_or_else(|| Error::NotPositiveDefinite {
            point: crate::error::pairs(p.as_slice()),
        })?;
        let model_frame = |q: &ModelPoint| -> Result<CMat> { orthonormal_frame(&self.model.metric_at(q)?, &q.coords) };
        let germ = match choice {
            FrameChoice::Standard => {
                let q = ModelPoint::origin(self.model.dim);
                let a = model_frame(&q)? * &ef_inv;
                Germ { center: p.clone(), image: q, frame: a }
            }
            FrameChoice::Identity | FrameChoice::Unitary(_) => {
                let q = ModelPoint::standard(p.clone());
                let mut em = model_frame(&q)?;
                if let FrameChoice::Unitary(u) = choice {
                    let dev = frobenius(&(u.adjoint() * u - identity(self.model.dim)));
                    if dev > self.opts.frame_tol {
                        return Err(Error::InvalidFrame { deviation: dev });
                    }
                    em *= u;
                }
                Germ { center: p.clone(), image: q, frame: em * &ef_inv }
            }
            FrameChoice::Explicit { image, frame } => Germ {
                center: p.clone(),
                image: image.clone(),
                frame: frame.clone(),
            },
        };
        let residual = self.germ_residual(&germ)?;
        if residual > self.opts.frame_tol {
            return Err(Error::InvalidFrame { deviation: residual });
        }
        Ok(germ)
    }

    /// Largest segment length allowed at `z`.
    pub fn max_step(&self, z: &CVec) -> f64 {
        let domain = self.field.domain();
        let cap = 0.05 * domain.radius.min(1.0);
        (0.25 * domain.distance_to_punctures(z)).min(cap)
    }

    /// One continuation step along the geodesic from the germ center to `x`.
    fn step(&self, germ: &Germ, x: &CVec) -> Result<Germ> {
        let p = &germ.center;
        let n = self.model.dim;
        let v = log_map(self.field, p, x, &self.opts.ode, &self.opts.shooting)?;
        if norm(&v) == 0.0 {
            return Ok(Germ { center: x.clone(), ..germ.clone() });
        }
        let (_, _, transport) = geodesic_with_frame(self.field, p, &v, 1.0, &identity(n), &self.opts.ode)?;
        let back = inverse(&transport).ok_or_else(|| Error::Geometry("degenerate field transport".into()))?;
        let sigma = self.model.geodesic_translation(&germ.image, &(&germ.frame * &v))?;
        let (image, d) = sigma.differential(&germ.image)?;
        Ok(Germ {
            center: x.clone(),
            image,
            frame: d * &germ.frame * back,
        })
    }

    /// Germ value at `x`: image point and differential of `exp_q ∘ A ∘ exp_p⁻¹`.
    pub fn evaluate_germ(&self, germ: &Germ, x: &CVec) -> Result<(ModelPoint, CMat)> {
        let g = self.step(germ, x)?;
        Ok((g.image, g.frame))
    }

    fn step_subdivided(&self, germ: &Germ, x: &CVec, depth: usize) -> Result<Germ> {
        match self.step(germ, x) {
            Ok(g) => Ok(g),
            Err(Error::NoConvergence { .. } | Error::PathExitsDomain { .. }) if depth < self.opts.max_depth => {
                let mid = (&germ.center + x) * c(0.5, 0.0);
                self.field.check_point(&mid)?;
                let half = self.step_subdivided(germ, &mid, depth + 1)?;
                self.step_subdivided(&half, x, depth + 1)
            }
            Err(Error::NoConvergence { .. } | Error::PathExitsDomain { .. }) => Err(Error::StepTooLarge { depth }),
            Err(e) => Err(e),
        }
    }

    /// Continue `germ` along `path`, which must start at the germ center.
    pub fn continue_germ(&self, germ: &Germ, path: &PathPolyline) -> Result<Germ> {
        if norm(&(path.start() - &germ.center)) > 1e-12 {
            return Err(Error::InvalidParameter("path does not start at the germ center".into()));
        }
        let mut cur = germ.clone();
        for w in path.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            self.field.check_point(b)?;
            let len = norm(&(b - a));
            if len == 0.0 {
                continue;
            }
            let step = self.max_step(a).min(self.max_step(b));
            let pieces = if step > 0.0 { (len / step).ceil().max(1.0) as usize } else { 1 };
            for i in 1..=pieces {
                let x = a + (b - a) * c(i as f64 / pieces as f64, 0.0);
                self.field.check_point(&x)?;
                cur = self.step_subdivided(&cur, &x, 0)?;
            }
        }
        Ok(cur)
    }

    /// Develop over `samples` by breadth-first continuation over the
    /// k-nearest-neighbor graph rooted at the base germ. Clusters that kNN leaves
    /// disconnected are joined by their shortest edge.
    pub fn develop_region(&self, base: &Germ, samples: &[CVec]) -> Result<DevelopedField> {
        let count = samples.len();
        // Node `count` is the base center.
        let node = |i: usize| if i == count { &base.center } else { &samples[i] };
        let adjacency = knn_graph(samples, &base.center, self.opts.knn, self.opts.max_edge);
        let mut germs: Vec<Option<Germ>> = vec![None; count];
        let mut parent: Vec<Option<usize>> = vec![None; count];
        let mut reached = vec![false; count + 1];
        reached[count] = true;
        let germ_of = |germs: &Vec<Option<Germ>>, i: usize| -> Germ {
            if i == count {
                base.clone()
            } else {
                germs[i].clone().expect("reached node has a germ")
            }
        };
        let mut frontier = vec![count];
        let mut failed: Vec<bool> = vec![false; count];
        loop {
            while !frontier.is_empty() {
                let mut candidates: Vec<(usize, Vec<usize>)> = Vec::new();
                let mut seen = std::collections::BTreeMap::<usize, Vec<usize>>::new();
                for &u in &frontier {
                    for &v in &adjacency[u] {
                        if v < count && !reached[v] && !failed[v] {
                            seen.entry(v).or_default().push(u);
                        }
                    }
                }
                candidates.extend(seen);
                let results: Vec<(usize, Option<(usize, Germ)>)> = candidates
                    .par_iter()
                    .map(|(v, parents)| {
                        for &u in parents {
                            let g0 = germ_of(&germs, u);
                            let path = PathPolyline::segment(node(u), &samples[*v], 1);
                            if let Ok(g) = self.continue_germ(&g0, &path) {
                                return (*v, Some((u, g)));
                            }
                        }
                        (*v, None)
                    })
                    .collect();
                frontier.clear();
                for (v, res) in results {
                    match res {
                        Some((u, g)) => {
                            germs[v] = Some(g);
                            parent[v] = (u != count).then_some(u);
                            reached[v] = true;
                            frontier.push(v);
                        }
                        None => failed[v] = true,
                    }
                }
                // Failed nodes may still be reached from a later level.
                failed.iter_mut().for_each(|f| *f = false);
            }
            let pending: Vec<usize> = (0..count).filter(|&v| !reached[v]).collect();
            if pending.is_empty() {
                break;
            }
            // Bridge to the nearest unreached sample.
            let mut best: Option<(f64, usize, usize)> = None;
            for u in (0..=count).filter(|&u| reached[u]) {
                for &v in &pending {
                    let d = norm(&(node(u) - &samples[v]));
                    if d <= self.opts.max_edge && best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, u, v));
                    }
                }
            }
            let Some((_, u, v)) = best else {
                return Err(Error::UnreachableSamples(pending));
            };
            let path = PathPolyline::segment(node(u), &samples[v], 1);
            match self.continue_germ(&germ_of(&germs, u), &path) {
                Ok(g) => {
                    germs[v] = Some(g);
                    parent[v] = (u != count).then_some(u);
                    reached[v] = true;
                    frontier.push(v);
                }
                Err(_) => return Err(Error::UnreachableSamples(pending)),
            }
        }
        Ok(DevelopedField {
            base: base.clone(),
            points: samples.to_vec(),
            germs: germs.into_iter().map(|g| g.expect("all samples reached")).collect(),
            parent,
        })
    }

    /// Monodromy of `loop_path` (closed at the germ center): the isometry `g`
    /// with `φ^loop = g ∘ φ`.
    pub fn monodromy(&self, base: &Germ, loop_path: &PathPolyline) -> Result<Monodromy> {
        if !loop_path.is_closed(1e-9) {
            return Err(Error::InvalidParameter("monodromy needs a closed loop".into()));
        }
        let continued = self.continue_germ(base, loop_path)?;
        let a0_inv = inverse(&base.frame).ok_or_else(|| Error::Geometry("singular base frame".into()))?;
        let a = &continued.frame * a0_inv;
        let isometry = self
            .model
            .isometry_from_frame_data(&base.image, &continued.image, &a, 1e-6)?;
        let residual = self.germ_deviation(&self.transform_germ(&isometry, base)?, &continued)?;
        Ok(Monodromy {
            isometry,
            continued,
            residual,
        })
    }

    /// `g ∘ φ` as a germ at the same center.
    pub fn transform_germ(&self, g: &ModelIsometry, germ: &Germ) -> Result<Germ> {
        let (image, d) = g.differential(&germ.image)?;
        Ok(Germ {
            center: germ.center.clone(),
            image,
            frame: d * &germ.frame,
        })
    }

    /// Image gap plus operator-norm frame difference, in the chart of `a`.
    pub fn germ_deviation(&self, a: &Germ, b: &Germ) -> Result<f64> {
        let center_gap = norm(&(&a.center - &b.center));
        let (bimage, bframe) = if a.image.chart == b.image.chart {
            (b.image.clone(), b.frame.clone())
        } else {
            let (q, d) = self.model.rechart(&b.image, a.image.chart)?;
            (q, d * &b.frame)
        };
        Ok(center_gap + projective_gap(&self.model, &a.image, &bimage) + op_norm(&(&a.frame - bframe)))
    }

    /// Largest `‖dFᴴ G(F) dF − g‖` over the developed samples.
    pub fn verify_pullback(&self, dev: &DevelopedField, tol: f64) -> VerificationReport {
        let mut worst: f64 = 0.0;
        let mut worst_rel: f64 = 0.0;
        let mut notes = Vec::new();
        for (x, germ) in dev.points.iter().zip(&dev.germs) {
            let res = self.field.metric_at(x).and_then(|g| {
                let h = self.model.metric_at(&germ.image)?;
                let r = frobenius(&(germ.frame.adjoint() * h * &germ.frame - &g));
                Ok((r, r / frobenius(&g)))
            });
            match res {
                Ok((r, rel)) => {
                    worst = worst.max(r);
                    worst_rel = worst_rel.max(rel);
                }
                Err(e) => {
                    worst = f64::INFINITY;
                    notes.push(e.to_string());
                }
            }
        }
        let mut report = VerificationReport::new("pullback", worst, tol)
            .with_metric("relative_residual", worst_rel)
            .with_metric("samples", dev.len() as f64);
        for n in notes {
            report = report.with_note(n);
        }
        report
    }

    /// Compare continuations of `germ` along two paths with common endpoints.
    pub fn homotopy_invariance_check(
        &self,
        germ: &Germ,
        path1: &PathPolyline,
        path2: &PathPolyline,
        tol: f64,
    ) -> Result<VerificationReport> {
        if norm(&(path1.end() - path2.end())) > 1e-12 {
            return Err(Error::InvalidParameter("paths must share their endpoint".into()));
        }
        let g1 = self.continue_germ(germ, path1)?;
        let g2 = self.continue_germ(germ, path2)?;
        let frame_dev = {
            let other = if g1.image.chart == g2.image.chart {
                g2.frame.clone()
            } else {
                self.model.rechart(&g2.image, g1.image.chart)?.1 * &g2.frame
            };
            op_norm(&(&g1.frame - other))
        };
        let deviation = self.germ_deviation(&g1, &g2)?;
        Ok(VerificationReport::new("homotopy_invariance", deviation, tol)
            .with_metric("frame_deviation", frame_dev)
            .with_metric("image_gap", deviation - frame_dev))
    }
}

/// Symmetric k-nearest-neighbor adjacency over `samples` plus the base point
/// (index `samples.len()`), edges no longer than `max_edge`, neighbors sorted
/// by distance.
fn knn_graph(samples: &[CVec], base: &CVec, k: usize, max_edge: f64) -> Vec<Vec<usize>> {
    let count = samples.len();
    let flat: Vec<Vec<f64>> = samples
        .iter()
        .chain(std::iter::once(base))
        .map(|z| z.iter().flat_map(|w| [w.re, w.im]).collect())
        .collect();
    let dist2 = |i: usize, j: usize| -> f64 { flat[i].iter().zip(&flat[j]).map(|(a, b)| (a - b) * (a - b)).sum() };
    let limit = max_edge * max_edge;
    let mut adj: Vec<Vec<(f64, usize)>> = (0..=count)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..=count).filter(|&j| j != i).map(|j| (dist2(i, j), j)).collect();
            let k = k.min(d.len());
            if k < d.len() {
                d.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.truncate(k);
            }
            d.retain(|&(dd, _)| dd <= limit);
            d
        })
        .collect();
    let snapshot: Vec<Vec<(f64, usize)>> = adj.clone();
    for (i, list) in snapshot.iter().enumerate() {
        for &(dd, j) in list {
            if !adj[j].iter().any(|&(_, x)| x == i) {
                adj[j].push((dd, i));
            }
        }
    }
    adj.into_iter()
        .map(|mut list| {
            list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            list.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}
