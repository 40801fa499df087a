//! General-position checks for families of billiard paths between two points,
//! finite blocking tests, and the pipeline that perturbs a table until it
//! carries `n` billiard paths from `x` to `y` in general position.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beams::conjugacy_test;
use crate::curve::{ck_distance, resolving_grid, Table};
use crate::error::{Error, Result};
use crate::geom::{param_dist, point_line_dist, point_segment_dist, Vec2};
use crate::paths::{
    certified, launch_angle, max_length_path, polish_critical, solve_shooting, CertifiedPath, PATH_IDENTITY_TOL,
};
use crate::perturb::{
    break_conjugacy, bump_point_tangent, move_vertex_on_segment, parallel_chord_shift, support_radius,
    PerturbationRecord, SlideAlong,
};
use crate::ray::PolygonalPath;

pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Gp1,
    Gp2,
    Gp3,
    Gp4,
    Nc,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Gp1 => "GP1",
            Condition::Gp2 => "GP2",
            Condition::Gp3 => "GP3",
            Condition::Gp4 => "GP4",
            Condition::Nc => "NC",
        };
        f.write_str(s)
    }
}

/// A segment of a path: `(path index, segment index)`; segment `k` joins node `k` and node `k + 1`.
pub type SegmentId = (usize, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub paths: Vec<usize>,
    /// Vertex indices (GP1, GP2, NC) as `(path, vertex)` pairs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<(usize, usize)>,
    /// Segments involved (GP3, GP4).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentId>,
    pub points: Vec<Vec2>,
    pub separation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralPositionReport {
    pub tol: f64,
    pub gp1: bool,
    pub gp2: bool,
    pub gp3: bool,
    pub gp4: bool,
    pub nc: bool,
    /// The family passes GP1–GP4 at every tolerance up to this value.
    pub margin: f64,
    pub violations: Vec<Violation>,
}

impl GeneralPositionReport {
    /// GP1–GP4 all hold (NC is tracked separately).
    pub fn passes(&self) -> bool {
        self.gp1 && self.gp2 && self.gp3 && self.gp4
    }

    pub fn count(&self, c: Condition) -> usize {
        self.violations.iter().filter(|v| v.condition == c).count()
    }

    fn gp_violations(&self) -> usize {
        self.violations.iter().filter(|v| v.condition != Condition::Nc).count()
    }
}

struct Segment {
    id: SegmentId,
    a: Vec2,
    b: Vec2,
}

fn all_segments(paths: &[PolygonalPath]) -> Vec<Segment> {
    paths
        .iter()
        .enumerate()
        .flat_map(|(p, path)| {
            path.segments()
                .into_iter()
                .enumerate()
                .map(move |(k, (a, b))| Segment { id: (p, k), a, b })
        })
        .collect()
}

/// Intersection point of two closed segments; parallel pairs yield `None`.
fn segment_intersection(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Option<Vec2> {
    let r = b - a;
    let s = d - c;
    let den = r.cross(s);
    if den.abs() <= 1e-15 * r.norm() * s.norm() {
        return None;
    }
    let t = (c - a).cross(s) / den;
    let u = (c - a).cross(r) / den;
    let slack = 1e-12;
    if t < -slack || t > 1.0 + slack || u < -slack || u > 1.0 + slack {
        return None;
    }
    Some(a + r * t)
}

/// Check GP1–GP4 and NC for paths sharing the endpoints `x`, `y`.
///
/// GP3 is evaluated at the pairwise intersection points of segments (parallel
/// pairs contribute none) lying outside the `tol`-balls around `x` and `y`: such
/// a point violates GP3 when a third segment passes within `tol` of it.
pub fn check_general_position(paths: &[PolygonalPath], x: Vec2, y: Vec2, tol: f64) -> GeneralPositionReport {
    let mut violations = Vec::new();
    let mut margin = f64::INFINITY;

    // GP1 and GP2: vertex separations
    for (pa, a) in paths.iter().enumerate() {
        for (i, &p) in a.points.iter().enumerate() {
            for (pb, b) in paths.iter().enumerate().skip(pa) {
                let start = if pa == pb { i + 1 } else { 0 };
                for (j, &q) in b.points.iter().enumerate().skip(start) {
                    let d = p.dist(q);
                    margin = margin.min(d);
                    if d < tol {
                        violations.push(Violation {
                            condition: if pa == pb { Condition::Gp2 } else { Condition::Gp1 },
                            paths: if pa == pb { vec![pa] } else { vec![pa, pb] },
                            vertices: vec![(pa, i), (pb, j)],
                            segments: Vec::new(),
                            points: vec![p, q],
                            separation: d,
                        });
                    }
                }
            }
        }
    }

    let segs = all_segments(paths);

    // GP3: clusters of pairwise intersections with a third segment nearby
    let mut clusters: Vec<(Vec2, Vec<SegmentId>, f64)> = Vec::new();
    let at_x = |s: &Segment| s.id.1 == 0;
    let at_y = |s: &Segment| s.id.1 == paths[s.id.0].points.len();
    for i in 0..segs.len() {
        for j in i + 1..segs.len() {
            // segments sharing an endpoint meet only there
            if (at_x(&segs[i]) && at_x(&segs[j])) || (at_y(&segs[i]) && at_y(&segs[j])) {
                continue;
            }
            let Some(p) = segment_intersection(segs[i].a, segs[i].b, segs[j].a, segs[j].b) else {
                continue;
            };
            let r = p.dist(x).min(p.dist(y));
            let mut near = Vec::new();
            let mut d3 = f64::INFINITY;
            for (k, s) in segs.iter().enumerate() {
                if k == i || k == j {
                    continue;
                }
                let d = point_segment_dist(p, s.a, s.b);
                d3 = d3.min(d);
                if d < tol {
                    near.push(s.id);
                }
            }
            if r > d3 {
                margin = margin.min(d3);
            }
            if r < tol || near.is_empty() {
                continue;
            }
            let mut members = vec![segs[i].id, segs[j].id];
            members.extend(near);
            match clusters.iter_mut().find(|c| c.0.dist(p) < tol) {
                Some(c) => {
                    for m in members {
                        if !c.1.contains(&m) {
                            c.1.push(m);
                        }
                    }
                    c.2 = c.2.min(d3);
                }
                None => clusters.push((p, members, d3)),
            }
        }
    }
    for (p, mut members, d3) in clusters {
        members.sort();
        let mut ps: Vec<usize> = members.iter().map(|m| m.0).collect();
        ps.dedup();
        violations.push(Violation {
            condition: Condition::Gp3,
            paths: ps,
            vertices: Vec::new(),
            segments: members,
            points: vec![p],
            separation: d3,
        });
    }

    // GP4: endpoints away from segments not incident to them
    for s in &segs {
        let path = &paths[s.id.0];
        let last = path.points.len();
        for (endpoint, incident) in [(x, s.id.1 == 0), (y, s.id.1 == last)] {
            if incident {
                continue;
            }
            let d = point_segment_dist(endpoint, s.a, s.b);
            margin = margin.min(d);
            if d < tol {
                violations.push(Violation {
                    condition: Condition::Gp4,
                    paths: vec![s.id.0],
                    vertices: Vec::new(),
                    segments: vec![s.id],
                    points: vec![endpoint],
                    separation: d,
                });
            }
        }
    }

    let nc = check_non_collinearity(paths, y, tol);
    let nc_ok = nc.is_empty();
    violations.extend(nc);
    let has = |c: Condition| violations.iter().any(|v| v.condition == c);
    GeneralPositionReport {
        tol,
        gp1: !has(Condition::Gp1),
        gp2: !has(Condition::Gp2),
        gp3: !has(Condition::Gp3),
        gp4: !has(Condition::Gp4),
        nc: nc_ok,
        margin,
        violations,
    }
}

/// Pairs of distinct vertices `P`, `Q` with `y` within `tol·|PQ|` of the line `PQ`.
pub fn check_non_collinearity(paths: &[PolygonalPath], y: Vec2, tol: f64) -> Vec<Violation> {
    let verts: Vec<((usize, usize), Vec2)> = paths
        .iter()
        .enumerate()
        .flat_map(|(p, path)| path.points.iter().enumerate().map(move |(i, &q)| ((p, i), q)))
        .collect();
    let mut out = Vec::new();
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            let (vi, p) = verts[i];
            let (vj, q) = verts[j];
            let len = p.dist(q);
            if len < 1e-12 {
                continue;
            }
            let d = point_line_dist(y, p, q);
            if d < tol * len {
                let mut ps = vec![vi.0, vj.0];
                ps.dedup();
                out.push(Violation {
                    condition: Condition::Nc,
                    paths: ps,
                    vertices: vec![vi, vj],
                    segments: Vec::new(),
                    points: vec![p, q],
                    separation: d / len,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockingReport {
    pub all_blocked: bool,
    pub unblocked: Vec<usize>,
}

/// Sub-intervals of `[0, 1]` where `a + t (b - a)` lies outside the open ball `B(c, r)`.
fn outside_ball(a: Vec2, b: Vec2, c: Vec2, r: f64, intervals: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let d = b - a;
    let f = a - c;
    let (qa, qb, qc) = (d.norm_sq(), 2.0 * f.dot(d), f.norm_sq() - r * r);
    let disc = qb * qb - 4.0 * qa * qc;
    if qa == 0.0 || disc <= 0.0 {
        return intervals;
    }
    let sq = disc.sqrt();
    let (t0, t1) = ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa));
    let mut out = Vec::new();
    for (lo, hi) in intervals {
        if t0 > lo {
            out.push((lo, hi.min(t0)));
        }
        if t1 < hi {
            out.push((lo.max(t1), hi));
        }
    }
    out.into_iter().filter(|(lo, hi)| hi >= lo).collect()
}

/// A path is blocked when some blocker lies within `radius` of the path
/// outside the `radius`-balls around its endpoints.
pub fn blocking_test(paths: &[PolygonalPath], blockers: &[Vec2], radius: f64) -> BlockingReport {
    let blocked = |path: &PolygonalPath| {
        path.segments().iter().any(|&(a, b)| {
            let parts = outside_ball(a, b, path.x, radius, vec![(0.0, 1.0)]);
            let parts = outside_ball(a, b, path.y, radius, parts);
            parts.iter().any(|&(lo, hi)| {
                let (p, q) = (a + (b - a) * lo, a + (b - a) * hi);
                blockers.iter().any(|&z| point_segment_dist(z, p, q) < radius)
            })
        })
    };
    let unblocked: Vec<usize> = paths
        .iter()
        .enumerate()
        .filter(|(_, p)| !blocked(p))
        .map(|(i, _)| i)
        .collect();
    BlockingReport {
        all_blocked: unblocked.is_empty(),
        unblocked,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewVertexPath {
    pub path: CertifiedPath,
    /// Index of a vertex at least `tol` away from every existing vertex.
    pub new_vertex: usize,
    pub bounces: usize,
    /// Number of existing vertices the bounce count was derived from.
    pub existing_vertices: usize,
}

/// Bounce count guaranteeing a new vertex when `k` vertices already exist.
pub fn pigeonhole_bounces(k: usize) -> usize {
    k * k - k + 2
}

fn existing_points(existing: &[PolygonalPath]) -> Vec<Vec2> {
    existing.iter().flat_map(|p| p.points.iter().copied()).collect()
}

fn new_vertex_index(path: &PolygonalPath, old: &[Vec2], tol: f64) -> Option<usize> {
    path.points
        .iter()
        .position(|p| old.iter().all(|q| p.dist(*q) >= tol))
}

/// Longest certified path with `k² - k + 2` bounces (`k` existing vertices)
/// and one of its vertices away from all existing ones.
pub fn find_new_vertex_path(
    table: &Table,
    x: Vec2,
    y: Vec2,
    existing: &[PolygonalPath],
    starts: usize,
    seed: u64,
    tol: f64,
) -> Result<NewVertexPath> {
    let old = existing_points(existing);
    let k = old.len();
    let m = pigeonhole_bounces(k);
    let found = max_length_path(table, x, y, m, starts, seed);
    if found.is_empty() {
        return Err(Error::NoPath { bounces: m });
    }
    for c in found {
        if let Some(i) = new_vertex_index(&c.path, &old, tol) {
            return Ok(NewVertexPath {
                path: c,
                new_vertex: i,
                bounces: m,
                existing_vertices: k,
            });
        }
    }
    Err(Error::PigeonholeFailure { bounces: m })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessBundle {
    pub x: Vec2,
    pub y: Vec2,
    pub original_table: Table,
    pub table: Table,
    pub paths: Vec<CertifiedPath>,
    pub report: GeneralPositionReport,
    pub perturbation_log: Vec<PerturbationRecord>,
    pub d2_drift: f64,
    pub eps_budget: f64,
    pub tol: f64,
    /// Stage-by-stage notes from the construction.
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessFailure {
    BudgetExhausted,
    SolverFailure,
}

/// Pipeline failure carrying the bundle as far as it got.
#[derive(Debug, Clone, thiserror::Error)]
#[error("witness construction failed at {stage}: {source}")]
pub struct WitnessError {
    pub kind: WitnessFailure,
    pub stage: String,
    pub source: Error,
    pub partial: Box<WitnessBundle>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessConfig {
    pub tol: f64,
    /// Multi-start count for every path search.
    pub starts: usize,
    /// GP3/GP4/NC repair attempts per step.
    pub repair_rounds: usize,
}

impl Default for WitnessConfig {
    fn default() -> Self {
        WitnessConfig {
            tol: DEFAULT_TOL,
            starts: 24,
            repair_rounds: 12,
        }
    }
}

struct Pipeline<'a> {
    config: &'a WitnessConfig,
    x: Vec2,
    y: Vec2,
    original: Table,
    table: Table,
    paths: Vec<PolygonalPath>,
    log: Vec<PerturbationRecord>,
    notes: Vec<String>,
    eps_budget: f64,
    /// Budget left in the current step.
    step_left: f64,
    /// Some trial move in the current step was rejected for its cost.
    budget_hit: bool,
}

impl Pipeline<'_> {
    fn bundle(&self) -> WitnessBundle {
        let paths: Vec<CertifiedPath> = self
            .paths
            .iter()
            .map(|p| CertifiedPath {
                certificate: crate::paths::certify(&self.table, p).unwrap_or(crate::paths::PathCertificate {
                    residual: f64::INFINITY,
                    min_alpha: 0.0,
                    length: p.length(),
                }),
                path: p.clone(),
            })
            .collect();
        let report = check_general_position(&self.paths, self.x, self.y, self.config.tol);
        let d2_drift = if self.log.is_empty() {
            0.0
        } else {
            ck_distance(&self.original, &self.table, 2, resolving_grid(&self.original, &self.table))
                .unwrap_or(f64::INFINITY)
        };
        WitnessBundle {
            x: self.x,
            y: self.y,
            original_table: self.original.clone(),
            table: self.table.clone(),
            paths,
            report,
            perturbation_log: self.log.clone(),
            d2_drift,
            eps_budget: self.eps_budget,
            tol: self.config.tol,
            diagnostics: self.notes.clone(),
        }
    }

    fn fail(&self, stage: impl Into<String>, source: Error) -> WitnessError {
        let kind = match source {
            Error::BudgetExceeded { .. } => WitnessFailure::BudgetExhausted,
            _ => WitnessFailure::SolverFailure,
        };
        WitnessError {
            kind,
            stage: stage.into(),
            source,
            partial: Box::new(self.bundle()),
        }
    }

    fn report(&self, paths: &[PolygonalPath]) -> GeneralPositionReport {
        check_general_position(paths, self.x, self.y, self.config.tol)
    }

    /// Vertex parameters of every path except `skip`.
    fn protected_except(&self, paths: &[PolygonalPath], skip: Option<usize>) -> Vec<f64> {
        paths
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .flat_map(|(_, p)| p.vertices.iter().copied())
            .collect()
    }

    /// Re-certify `paths` on `table`, re-solving any that broke.
    fn resolve_all(&self, table: &Table, paths: &[PolygonalPath]) -> Result<Vec<PolygonalPath>> {
        paths.iter().map(|p| resolve(table, p)).collect()
    }

    fn repair_error(&self, what: &str) -> Error {
        if self.budget_hit {
            Error::BudgetExceeded {
                effect: f64::INFINITY,
                budget: self.step_left,
            }
        } else {
            Error::Geometry(what.into())
        }
    }

    fn note_failure(&mut self, e: &Error) {
        if matches!(e, Error::BudgetExceeded { .. }) {
            self.budget_hit = true;
        }
    }

    fn accept(&mut self, table: Table, paths: Vec<PolygonalPath>, record: PerturbationRecord) {
        self.step_left -= record.d2_effect;
        self.notes.push(format!(
            "applied {:?} perturbation (d2 {:.3e}, step budget left {:.3e})",
            record.kind(),
            record.d2_effect,
            self.step_left
        ));
        self.table = table;
        self.paths = paths;
        self.log.push(record);
    }
}

/// Re-certify a path on a (slightly) changed table: keep it if it still
/// certifies, else polish the vertices, else re-shoot from its launch angle.
fn resolve(table: &Table, path: &PolygonalPath) -> Result<PolygonalPath> {
    let fresh = path.on_table(table);
    if let Ok(c) = certified(table, fresh.clone()) {
        return Ok(c.path);
    }
    match polish_critical(table, &fresh) {
        Ok(c) if same_vertices(&c.path, path, 1e-3) => Ok(c.path),
        _ => {
            let r = solve_shooting(table, path.x, path.y, path.bounces(), launch_angle(path))?;
            Ok(certified(table, r.path)?.path)
        }
    }
}

fn same_vertices(a: &PolygonalPath, b: &PolygonalPath, tol: f64) -> bool {
    a.vertices.len() == b.vertices.len()
        && a.vertices.iter().zip(&b.vertices).all(|(p, q)| param_dist(*p, *q) < tol)
}

/// Perturb `table` until it carries `n` certified billiard paths from `x` to
/// `y` in general position, spending at most `eps_budget` of `C²` distance.
pub fn construct_witness(
    table: &Table,
    x: Vec2,
    y: Vec2,
    n: usize,
    eps_budget: f64,
    seed: u64,
) -> std::result::Result<WitnessBundle, WitnessError> {
    construct_witness_with(table, x, y, n, eps_budget, seed, &WitnessConfig::default())
}

pub fn construct_witness_with(
    table: &Table,
    x: Vec2,
    y: Vec2,
    n: usize,
    eps_budget: f64,
    seed: u64,
    config: &WitnessConfig,
) -> std::result::Result<WitnessBundle, WitnessError> {
    let mut pl = Pipeline {
        config,
        x,
        y,
        original: table.clone(),
        table: table.clone(),
        paths: vec![PolygonalPath::segment(x, y)],
        log: Vec::new(),
        notes: Vec::new(),
        eps_budget,
        step_left: 0.0,
        budget_hit: false,
    };
    if n == 0 {
        return Err(pl.fail("setup", Error::InvalidArgument("n must be at least 1".into())));
    }
    if x.dist(y) < config.tol || !table.contains(x) || !table.contains(y) {
        return Err(pl.fail("setup", Error::InvalidArgument("x and y must be distinct interior points".into())));
    }
    pl.notes.push("step 1: segment xy".into());
    for k in 1..n {
        pl.step_left = eps_budget * 0.5f64.powi(k as i32);
        pl.budget_hit = false;
        add_path(&mut pl, k, seed)?;
    }
    let bundle = pl.bundle();
    if !bundle.report.passes() {
        let summary = bundle
            .report
            .violations
            .iter()
            .map(|v| v.condition.to_string())
            .collect::<Vec<_>>()
            .join(",");
        return Err(pl.fail("final check", Error::Geometry(format!("general position fails: {summary}"))));
    }
    if bundle.d2_drift > eps_budget {
        return Err(pl.fail(
            "final check",
            Error::BudgetExceeded {
                effect: bundle.d2_drift,
                budget: eps_budget,
            },
        ));
    }
    Ok(bundle)
}

/// One induction step: add a path with a new vertex and repair general position.
fn add_path(pl: &mut Pipeline<'_>, k: usize, seed: u64) -> std::result::Result<(), WitnessError> {
    let stage = |s: &str| format!("step {} ({s})", k + 1);

    // (a) non-collinearity, best effort
    if !check_non_collinearity(&pl.paths, pl.y, pl.config.tol).is_empty() {
        repair_loop(pl, true);
        if !check_non_collinearity(&pl.paths, pl.y, pl.config.tol).is_empty() {
            pl.notes.push(format!("step {}: NC still violated before the path search", k + 1));
        }
    }

    // (b) candidate with a new vertex, escalating the bounce count
    let candidate = search_candidate(pl, k, seed).map_err(|e| pl.fail(stage("path search"), e))?;
    pl.notes.push(format!(
        "step {}: candidate with {} bounces, length {:.6}",
        k + 1,
        candidate.bounces(),
        candidate.length()
    ));

    // (c) conjugacy of the new path
    let protected = pl.protected_except(&pl.paths, None);
    let (table, record, margin) = break_conjugacy(&pl.table, &candidate, pl.step_left, &protected)
        .map_err(|e| pl.fail(stage("conjugacy"), e))?;
    if let Some(record) = record {
        let paths = pl.resolve_all(&table, &pl.paths).map_err(|e| pl.fail(stage("conjugacy"), e))?;
        pl.accept(table, paths, record);
        pl.notes.push(format!("step {}: conjugacy broken, margin {margin:.3e}", k + 1));
    }
    let candidate = resolve(&pl.table, &candidate).map_err(|e| pl.fail(stage("conjugacy"), e))?;
    pl.paths.push(candidate);

    // (d) shared or repeated vertices
    repair_shared_vertices(pl).map_err(|e| pl.fail(stage("vertex separation"), e))?;

    // (e) triple points, endpoints on segments, collinearity
    repair_loop(pl, false);
    let report = pl.report(&pl.paths);
    if !report.passes() {
        return Err(pl.fail(stage("repair"), pl.repair_error("general position repairs exhausted")));
    }
    Ok(())
}

/// Escalate `m = 1, 2, …, K² - K + 2` (`K` existing vertices) and return the
/// first certified candidate with a new vertex that keeps the family in general
/// position; if none does, the candidate with the fewest violations.
fn search_candidate(pl: &Pipeline<'_>, k: usize, seed: u64) -> Result<PolygonalPath> {
    let old = existing_points(&pl.paths);
    let m_max = pigeonhole_bounces(old.len());
    let mut fallback: Option<(usize, PolygonalPath)> = None;
    for m in 1..=m_max {
        let run_seed = seed.wrapping_mul(1_000_003).wrapping_add((k * 1000 + m) as u64);
        let found = if m == m_max {
            match find_new_vertex_path(&pl.table, pl.x, pl.y, &pl.paths, pl.config.starts, run_seed, pl.config.tol) {
                Ok(nv) => vec![nv.path],
                Err(_) => Vec::new(),
            }
        } else {
            max_length_path(&pl.table, pl.x, pl.y, m, pl.config.starts, run_seed)
        };
        for c in found {
            if pl.paths.iter().any(|p| same_vertices(p, &c.path, PATH_IDENTITY_TOL)) {
                continue;
            }
            if new_vertex_index(&c.path, &old, pl.config.tol).is_none() {
                continue;
            }
            let mut trial = pl.paths.clone();
            trial.push(c.path.clone());
            let report = pl.report(&trial);
            let conjugate = conjugacy_test(&pl.table, &c.path).map(|r| r.conjugate).unwrap_or(true);
            let score = report.gp_violations() + usize::from(!report.nc) + usize::from(conjugate);
            if score == 0 {
                return Ok(c.path);
            }
            if fallback.as_ref().is_none_or(|f| score < f.0) {
                fallback = Some((score, c.path));
            }
        }
        if fallback.is_some() && m >= 4 {
            break;
        }
    }
    fallback
        .map(|f| f.1)
        .ok_or(Error::NoPath { bounces: m_max })
}

/// GP1/GP2: rotate the boundary tangent at each shared vertex and re-solve
/// the paths through it, keeping the angle that separates them most.
fn repair_shared_vertices(pl: &mut Pipeline<'_>) -> Result<()> {
    for _ in 0..pl.config.repair_rounds {
        let report = pl.report(&pl.paths);
        let Some(v) = report
            .violations
            .iter()
            .find(|v| matches!(v.condition, Condition::Gp1 | Condition::Gp2))
        else {
            return Ok(());
        };
        let (pa, ia) = v.vertices[0];
        let s = pl.paths[pa].vertices[ia];
        let target = pl.table.point(s);
        let protected: Vec<f64> = pl
            .protected_except(&pl.paths, None)
            .into_iter()
            .filter(|&p| pl.table.point(p).dist(target) >= pl.config.tol)
            .collect();
        let nu = support_radius(s, &protected);
        let mut best: Option<(f64, Table, Vec<PolygonalPath>, PerturbationRecord)> = None;
        // vertices move by about the rotation angle, so small angles suffice;
        // larger ones are tried in case the budget allows a wider separation
        for j in 0..7 {
            for sign in [1.0, -1.0] {
                let angle = sign * 1e-4 * 2f64.powi(j);
                let (table, record) = match bump_point_tangent(&pl.table, s, target, angle, nu, pl.step_left, &protected) {
                    Ok(r) => r,
                    Err(e) => {
                        pl.note_failure(&e);
                        continue;
                    }
                };
                let Ok(paths) = pl.resolve_all(&table, &pl.paths) else {
                    continue;
                };
                let sep = check_general_position(&paths, pl.x, pl.y, pl.config.tol);
                let score = vertex_separation(&paths, target);
                if sep.count(Condition::Gp1) + sep.count(Condition::Gp2) < report.count(Condition::Gp1) + report.count(Condition::Gp2)
                    && best.as_ref().is_none_or(|b| score > b.0)
                {
                    best = Some((score, table, paths, record));
                }
            }
        }
        match best {
            Some((_, table, paths, record)) => pl.accept(table, paths, record),
            None => return Err(pl.repair_error("no tangent rotation separates the shared vertex")),
        }
    }
    Ok(())
}

/// Smallest distance between vertices lying near `around`.
fn vertex_separation(paths: &[PolygonalPath], around: Vec2) -> f64 {
    let near: Vec<Vec2> = paths
        .iter()
        .flat_map(|p| p.points.iter().copied())
        .filter(|p| p.dist(around) < 0.05)
        .collect();
    let mut best = f64::INFINITY;
    for i in 0..near.len() {
        for j in i + 1..near.len() {
            best = best.min(near[i].dist(near[j]));
        }
    }
    best
}

/// Moves that change segment `seg` of `path` (or, with `vertex`, that vertex).
enum Move {
    Slide { vertex: usize, along: SlideAlong },
    Chord { chord: usize },
    /// Turn the boundary tangent at a vertex; needed when the path is
    /// collinear with its neighbours and no slide changes a direction.
    Rotate { vertex: usize },
}

fn moves_for_segment(path: &PolygonalPath, seg: usize) -> Vec<Move> {
    let m = path.bounces();
    let mut out = Vec::new();
    if m == 0 {
        return out;
    }
    if seg == 0 {
        out.push(Move::Slide {
            vertex: 0,
            along: SlideAlong::Outgoing,
        });
    } else if seg == m {
        out.push(Move::Slide {
            vertex: m - 1,
            along: SlideAlong::Incoming,
        });
    } else {
        out.push(Move::Chord { chord: seg - 1 });
    }
    out.push(Move::Rotate { vertex: seg.min(m - 1) });
    if seg > 0 && seg < m {
        out.push(Move::Rotate { vertex: seg - 1 });
    }
    out
}

fn moves_for_vertex(path: &PolygonalPath, vertex: usize) -> Vec<Move> {
    let m = path.bounces();
    let mut out = Vec::new();
    if vertex == 0 {
        out.push(Move::Slide {
            vertex: 0,
            along: SlideAlong::Outgoing,
        });
    }
    if vertex + 1 == m {
        out.push(Move::Slide {
            vertex,
            along: SlideAlong::Incoming,
        });
    }
    if vertex + 1 < m {
        out.push(Move::Chord { chord: vertex });
    }
    if vertex > 0 {
        out.push(Move::Chord { chord: vertex - 1 });
    }
    out.push(Move::Rotate { vertex });
    out
}

/// Greedy GP3/GP4 (and NC) repairs, newest path first; each accepted move
/// must reduce the violation count.
fn repair_loop(pl: &mut Pipeline<'_>, nc_only: bool) {
    let tol = pl.config.tol;
    for _ in 0..pl.config.repair_rounds {
        let report = pl.report(&pl.paths);
        let score = |r: &GeneralPositionReport| {
            if nc_only {
                r.count(Condition::Nc)
            } else {
                10 * r.gp_violations() + r.count(Condition::Nc)
            }
        };
        let current = score(&report);
        if current == 0 {
            return;
        }
        let mut options: Vec<(usize, Move)> = Vec::new();
        for v in &report.violations {
            match v.condition {
                Condition::Gp3 | Condition::Gp4 if !nc_only => {
                    let mut segs = v.segments.clone();
                    segs.sort_by_key(|s| std::cmp::Reverse(s.0));
                    for (p, s) in segs {
                        options.extend(moves_for_segment(&pl.paths[p], s).into_iter().map(|mv| (p, mv)));
                    }
                }
                Condition::Nc => {
                    let mut verts = v.vertices.clone();
                    verts.sort_by_key(|s| std::cmp::Reverse(s.0));
                    for (p, i) in verts {
                        options.extend(moves_for_vertex(&pl.paths[p], i).into_iter().map(|mv| (p, mv)));
                    }
                }
                _ => {}
            }
        }
        let mut done = false;
        'search: for (p, mv) in options {
            for slide in [3.0, -3.0, 10.0, -10.0, 30.0, -30.0].map(|f| f * tol) {
                let (table, path, record) = match apply_move(pl, p, &mv, slide) {
                    Ok(r) => r,
                    Err(e) => {
                        pl.note_failure(&e);
                        continue;
                    }
                };
                let mut paths = match pl.resolve_all(&table, &pl.paths) {
                    Ok(ps) => ps,
                    Err(_) => continue,
                };
                paths[p] = path;
                if score(&check_general_position(&paths, pl.x, pl.y, tol)) < current {
                    pl.accept(table, paths, record);
                    done = true;
                    break 'search;
                }
            }
        }
        if !done {
            pl.notes.push(format!("repairs stalled with {current} weighted violations"));
            return;
        }
    }
}

fn apply_move(
    pl: &Pipeline<'_>,
    p: usize,
    mv: &Move,
    slide: f64,
) -> Result<(Table, PolygonalPath, PerturbationRecord)> {
    let path = &pl.paths[p];
    let mut protected = pl.protected_except(&pl.paths, Some(p));
    match *mv {
        Move::Slide { vertex, along } => {
            protected.extend(path.vertices.iter().enumerate().filter(|(i, _)| *i != vertex).map(|(_, &s)| s));
            let nu = support_radius(path.vertices[vertex], &protected);
            move_vertex_on_segment(&pl.table, path, vertex, along, slide, nu, pl.step_left, &protected)
        }
        Move::Chord { chord } => {
            protected.extend(
                path.vertices
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != chord && *i != chord + 1)
                    .map(|(_, &s)| s),
            );
            let (sp, sq) = (path.vertices[chord], path.vertices[chord + 1]);
            let mut guard = protected.clone();
            guard.push(sq);
            let nu_p = support_radius(sp, &guard);
            guard.pop();
            guard.push(sp);
            let nu = nu_p.min(support_radius(sq, &guard));
            parallel_chord_shift(&pl.table, path, chord, slide, nu, pl.step_left, &protected)
        }
        Move::Rotate { vertex } => {
            protected.extend(path.vertices.iter().enumerate().filter(|(i, _)| *i != vertex).map(|(_, &s)| s));
            let s = path.vertices[vertex];
            let nu = support_radius(s, &protected);
            // the trial slide doubles as the rotation angle
            let (table, record) = bump_point_tangent(&pl.table, s, path.points[vertex], slide, nu, pl.step_left, &protected)?;
            let moved = resolve(&table, path)?;
            Ok((table, moved, record))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub table_valid: bool,
    pub paths_certified: Vec<bool>,
    pub max_residual: f64,
    /// Stored vertex points agree with the table.
    pub points_consistent: bool,
    pub endpoints_consistent: bool,
    pub distinct_paths: bool,
    pub general_position: GeneralPositionReport,
    pub d2_drift: f64,
    pub drift_within_budget: bool,
}

/// Re-check a bundle from its contents alone.
pub fn verify_bundle(bundle: &WitnessBundle) -> VerificationReport {
    let table = &bundle.table;
    let table_valid = table.validate().valid;
    let mut max_residual: f64 = 0.0;
    let mut points_consistent = true;
    let mut paths = Vec::with_capacity(bundle.paths.len());
    let paths_certified: Vec<bool> = bundle
        .paths
        .iter()
        .map(|c| {
            let fresh = c.path.on_table(table);
            points_consistent &= fresh.points.len() == c.path.points.len()
                && fresh.points.iter().zip(&c.path.points).all(|(a, b)| a.dist(*b) < 1e-9);
            let ok = match crate::paths::certify(table, &fresh) {
                Ok(cert) => {
                    max_residual = max_residual.max(cert.residual);
                    cert.is_valid()
                }
                Err(_) => {
                    max_residual = f64::INFINITY;
                    false
                }
            };
            paths.push(fresh);
            ok
        })
        .collect();
    let endpoints_consistent = paths.iter().all(|p| p.x == bundle.x && p.y == bundle.y);
    let distinct_paths = (0..paths.len())
        .all(|i| (i + 1..paths.len()).all(|j| !same_vertices(&paths[i], &paths[j], PATH_IDENTITY_TOL)));
    let general_position = check_general_position(&paths, bundle.x, bundle.y, bundle.tol);
    let d2_drift = if bundle.original_table == bundle.table {
        0.0
    } else {
        ck_distance(&bundle.original_table, table, 2, resolving_grid(&bundle.original_table, table))
            .unwrap_or(f64::INFINITY)
    };
    let drift_within_budget = d2_drift <= bundle.eps_budget;
    let passed = table_valid
        && paths_certified.iter().all(|&b| b)
        && points_consistent
        && endpoints_consistent
        && distinct_paths
        && general_position.passes()
        && drift_within_budget;
    VerificationReport {
        passed,
        table_valid,
        paths_certified,
        max_residual,
        points_consistent,
        endpoints_consistent,
        distinct_paths,
        general_position,
        d2_drift,
        drift_within_budget,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(x: Vec2, y: Vec2, pts: &[Vec2]) -> PolygonalPath {
        PolygonalPath {
            x,
            y,
            vertices: (0..pts.len()).map(|i| i as f64 * 0.1).collect(),
            points: pts.to_vec(),
        }
    }

    #[test]
    fn shared_vertex_fails_gp1() {
        let (x, y) = (Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0));
        let v = Vec2::new(0.0, 1.0);
        let paths = [raw(x, y, &[v]), raw(x, y, &[v])];
        let r = check_general_position(&paths, x, y, 1e-4);
        assert!(!r.gp1);
        let w = r.violations.iter().find(|v| v.condition == Condition::Gp1).unwrap();
        assert_eq!(w.points[0], v);
    }

    #[test]
    fn single_segment_passes() {
        let (x, y) = (Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0));
        let r = check_general_position(&[PolygonalPath::segment(x, y)], x, y, 1e-4);
        assert!(r.passes() && r.nc);
    }

    #[test]
    fn three_segments_through_a_point_fail_gp3() {
        let (x, y) = (Vec2::new(-0.9, -0.1), Vec2::new(0.9, 0.1));
        // three one-bounce paths whose middle segments cross at the origin
        let paths = [
            raw(x, y, &[Vec2::new(-0.6, 0.6), Vec2::new(0.6, -0.6)]),
            raw(x, y, &[Vec2::new(0.0, 0.8), Vec2::new(0.0, -0.8)]),
            raw(x, y, &[Vec2::new(0.7, 0.7), Vec2::new(-0.7, -0.7)]),
        ];
        let r = check_general_position(&paths, x, y, 1e-4);
        assert!(!r.gp3);
        let v = r.violations.iter().find(|v| v.condition == Condition::Gp3).unwrap();
        assert_eq!(v.segments.len(), 3);
        assert!(v.points[0].norm() < 1e-12);
    }

    #[test]
    fn non_collinearity_examples() {
        let y = Vec2::ZERO;
        let x = Vec2::new(0.2, 0.3);
        let bad = [raw(x, y, &[Vec2::new(1.0, 0.0), Vec2::new(-1.0, 0.0)])];
        assert_eq!(check_non_collinearity(&bad, y, 1e-4).len(), 1);
        let good = [raw(x, y, &[Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)])];
        assert!(check_non_collinearity(&good, y, 1e-4).is_empty());
    }

    #[test]
    fn blocking_examples() {
        let c = Table::circle(1.0);
        let o = Vec2::ZERO;
        let d1 = PolygonalPath::new(&c, o, o, vec![0.0]);
        let d2 = PolygonalPath::new(&c, o, o, vec![0.2]);
        let r = blocking_test(&[d1.clone(), d2.clone()], &[Vec2::new(0.5, 0.0)], 1e-3);
        assert!(!r.all_blocked);
        assert_eq!(r.unblocked, vec![1]);
        let mids: Vec<Vec2> = [&d1, &d2].iter().map(|p| p.points[0] * 0.5).collect();
        assert!(blocking_test(&[d1.clone(), d2.clone()], &mids, 1e-3).all_blocked);
        assert!(!blocking_test(&[d1], &[], 1e-3).all_blocked);
    }

    #[test]
    fn new_vertex_from_segment_only() {
        let c = Table::noisy_circle(1.0, 0.01, 5, 2);
        let (x, y) = (Vec2::new(-0.3, 0.1), Vec2::new(0.4, -0.2));
        let r = find_new_vertex_path(&c, x, y, &[PolygonalPath::segment(x, y)], 16, 1, 1e-4).unwrap();
        assert_eq!(r.bounces, 2);
        assert_eq!(r.path.path.bounces(), 2);
    }

    #[test]
    fn repair_moves_segment_off_endpoint() {
        let c = Table::circle(1.0);
        let (x, y) = (Vec2::new(-0.3, 0.0), Vec2::new(0.3, 0.0));
        let through_y = certified(&c, PolygonalPath::new(&c, x, y, vec![0.0])).unwrap().path;
        let config = WitnessConfig::default();
        let mut pl = Pipeline {
            config: &config,
            x,
            y,
            original: c.clone(),
            table: c.clone(),
            paths: vec![PolygonalPath::segment(x, y), through_y],
            log: Vec::new(),
            notes: Vec::new(),
            eps_budget: 4.0,
            step_left: 2.0,
            budget_hit: false,
        };
        assert!(!pl.report(&pl.paths).gp4);
        repair_loop(&mut pl, false);
        let b = pl.bundle();
        assert!(b.report.passes(), "{:?}", b.report.violations);
        assert_eq!(b.perturbation_log.len(), 1);
        assert!(b.paths.iter().all(|p| p.certificate.is_valid()));
        assert!(b.d2_drift <= 2.0);
    }

    #[test]
    fn witness_base_case() {
        let c = Table::circle(1.0);
        let (x, y) = (Vec2::new(-0.3, 0.1), Vec2::new(0.4, -0.2));
        let b = construct_witness(&c, x, y, 1, 1.0, 0).unwrap();
        assert_eq!(b.paths.len(), 1);
        assert!(b.perturbation_log.is_empty());
        assert!(verify_bundle(&b).passed);
    }
}
