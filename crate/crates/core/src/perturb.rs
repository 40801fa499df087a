//! Local table perturbations built from normal-offset bumps: curvature change,
//! point-and-tangent interpolation, vertex slide, parallel chord shift and
//! conjugacy breaking by curvature scaling.
//!
//! Every operation returns a new table, checks strict convexity and measures
//! its `C²` cost against a caller-supplied budget.

use serde::{Deserialize, Serialize};

use crate::beams::{conjugacy_test, FocusChainInput, CONJUGACY_TOL};
use crate::curve::{ck_distance, resolving_grid, NormalBump, Table};
use crate::error::{Error, Result};
use crate::geom::{param_dist, wrap01, Vec2};
use crate::paths::{certified, polish_critical};
use crate::ray::PolygonalPath;

/// Largest support radius chosen automatically.
pub const MAX_SUPPORT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Curvature,
    PointTangent,
    VertexSlide,
    ChordShift,
    ConjugacyBreak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationParams {
    Curvature {
        s0: f64,
        delta_kappa: f64,
        nu: f64,
    },
    PointTangent {
        s0: f64,
        s_star: f64,
        target: Vec2,
        tangent: Vec2,
        nu: f64,
    },
    VertexSlide {
        vertex_index: usize,
        along: SlideAlong,
        slide: f64,
        from: Vec2,
        to: Vec2,
    },
    ChordShift {
        chord_index: usize,
        slide: f64,
        p_new: Vec2,
        q_new: Vec2,
    },
    ConjugacyBreak {
        z: f64,
        margin_before: f64,
        predicted_margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    #[serde(flatten)]
    pub params: PerturbationParams,
    /// Bumps appended to the table.
    pub bumps: Vec<NormalBump>,
    /// Parameter intervals `[center - ν, center + ν]` touched by the bumps.
    pub support: Vec<[f64; 2]>,
    /// Measured `C²` distance between the tables before and after.
    pub d2_effect: f64,
}

impl PerturbationRecord {
    pub fn kind(&self) -> PerturbationKind {
        match self.params {
            PerturbationParams::Curvature { .. } => PerturbationKind::Curvature,
            PerturbationParams::PointTangent { .. } => PerturbationKind::PointTangent,
            PerturbationParams::VertexSlide { .. } => PerturbationKind::VertexSlide,
            PerturbationParams::ChordShift { .. } => PerturbationKind::ChordShift,
            PerturbationParams::ConjugacyBreak { .. } => PerturbationKind::ConjugacyBreak,
        }
    }

    /// Whether `s` lies outside every recorded support interval.
    pub fn untouched(&self, s: f64) -> bool {
        self.bumps.iter().all(|b| !b.contains(s))
    }
}

/// Which incident segment a vertex slides along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlideAlong {
    /// Along the segment arriving at the vertex; only the last vertex may move this way.
    Incoming,
    /// Along the segment leaving the vertex; only the first vertex may move this way.
    Outgoing,
}

/// A quarter of the parameter distance to the nearest protected parameter,
/// capped at [`MAX_SUPPORT`].
pub fn support_radius(s0: f64, protected: &[f64]) -> f64 {
    protected
        .iter()
        .map(|&p| param_dist(p, s0))
        .filter(|d| *d > 0.0)
        .fold(4.0 * MAX_SUPPORT, f64::min)
        * 0.25
}

fn check_support(center: f64, nu: f64, protected: &[f64]) -> Result<()> {
    if !(nu > 0.0 && nu < 0.5) {
        return Err(Error::InvalidArgument(format!("support radius {nu} outside (0, 0.5)")));
    }
    if let Some(&p) = protected.iter().find(|&&p| param_dist(p, center) < nu) {
        return Err(Error::SupportCollision {
            center: wrap01(center),
            protected: p,
        });
    }
    Ok(())
}

fn support_of(bumps: &[NormalBump]) -> Vec<[f64; 2]> {
    bumps
        .iter()
        .map(|b| [b.center_s - b.half_width, b.center_s + b.half_width])
        .collect()
}

/// Validate strict convexity and measure the `C²` cost of `before -> after`.
fn finish(before: &Table, after: &Table, eps: f64) -> Result<f64> {
    let report = after.validate();
    if !report.valid {
        return Err(Error::AmplitudeTooLarge {
            min_kappa: report.min_curvature,
        });
    }
    let effect = ck_distance(before, after, 2, resolving_grid(before, after))?;
    if effect > eps {
        return Err(Error::BudgetExceeded { effect, budget: eps });
    }
    Ok(effect)
}

/// Relative widths of the value bumps making up a curvature bump.
const CURVATURE_WIDTHS: [f64; 3] = [1.0, 0.4, 0.3];
/// Coefficient of the narrowest bump; chosen to keep the largest `|d''|` over
/// the support within about six times its value at the center.
const CURVATURE_TAIL: f64 = -0.0278;

/// Value bumps with zero total value and slope at the center and second
/// derivative `d2` there.
fn curvature_bumps(s0: f64, nu: f64, d2: f64) -> [NormalBump; 3] {
    let [_, k2, k3] = CURVATURE_WIDTHS;
    // unit half-width: c1 + c2 + c3 = 0 and -2 (c1 + c2/k2² + c3/k3²) = 1
    let c3 = CURVATURE_TAIL;
    let c2 = (-0.5 - c3 / (k3 * k3) + c3) / (1.0 / (k2 * k2) - 1.0);
    let c1 = -c2 - c3;
    let scale = d2 * nu * nu;
    [
        NormalBump::value(s0, nu, c1 * scale),
        NormalBump::value(s0, k2 * nu, c2 * scale),
        NormalBump::value(s0, k3 * nu, c3 * scale),
    ]
}

/// Change the curvature at `σ(s0)` by `delta_kappa`, keeping position and tangent there.
pub fn bump_curvature(
    table: &Table,
    s0: f64,
    delta_kappa: f64,
    nu: f64,
    eps: f64,
    protected: &[f64],
) -> Result<(Table, PerturbationRecord)> {
    let s0 = wrap01(s0);
    let params = PerturbationParams::Curvature { s0, delta_kappa, nu };
    if delta_kappa == 0.0 {
        return Ok((table.clone(), identity_record(params)));
    }
    check_support(s0, nu, protected)?;
    // With zero value and slope at s0 the added offset only changes σ'' by d'' N₀,
    // so κ moves by d'' cross(σ', N₀) / |σ'|³.
    let [_, d1] = table.derivs::<2>(s0);
    let n0 = table.base_normal(s0);
    let speed = d1.norm();
    let d2 = delta_kappa * speed * speed * speed / d1.cross(n0);
    let bumps = curvature_bumps(s0, nu, d2).to_vec();
    let after = table.with_bumps(bumps.iter().copied())?;
    let d2_effect = finish(table, &after, eps)?;
    Ok((
        after,
        PerturbationRecord {
            params,
            support: support_of(&bumps),
            bumps,
            d2_effect,
        },
    ))
}

fn identity_record(params: PerturbationParams) -> PerturbationRecord {
    PerturbationRecord {
        params,
        bumps: Vec::new(),
        support: Vec::new(),
        d2_effect: 0.0,
    }
}

/// Parameter `s*` near `s0` with `target - σ(s*)` along the base normal.
fn foot_point(table: &Table, s0: f64, target: Vec2) -> Result<f64> {
    let mut s = s0;
    for _ in 0..50 {
        let [p, d1] = table.derivs::<2>(s);
        let (n0, dn0) = table.base_normal_derivs(s);
        let r = target - p;
        let phi = n0.cross(r);
        let dphi = dn0.cross(r) - n0.cross(d1);
        let step = phi / dphi;
        if !step.is_finite() {
            return Err(Error::TargetOutOfReach);
        }
        s -= step.clamp(-0.01, 0.01);
        if step.abs() < 1e-15 {
            break;
        }
    }
    let [p, _] = table.derivs::<2>(s);
    if table.base_normal(s).cross(target - p).abs() > 1e-12 {
        return Err(Error::TargetOutOfReach);
    }
    Ok(wrap01(s))
}

/// Bump that makes the curve pass through `target` with tangent direction
/// `tangent`, centered at the base-normal foot point of `target`.
fn point_direction_bump(
    table: &Table,
    s0: f64,
    target: Vec2,
    tangent: Vec2,
    nu: f64,
) -> Result<(NormalBump, f64)> {
    let s_star = foot_point(table, s0, target)?;
    if param_dist(s_star, s0) >= nu {
        return Err(Error::TargetOutOfReach);
    }
    let [p, d1] = table.derivs::<2>(s_star);
    let (n0, dn0) = table.base_normal_derivs(s_star);
    let a = (target - p).dot(n0);
    // σ̃' = σ' + a N₀' + b N₀ must be parallel to the requested tangent
    let denom = n0.cross(tangent);
    if denom.abs() < 1e-3 {
        return Err(Error::TargetOutOfReach);
    }
    let b = -(d1 + dn0 * a).cross(tangent) / denom;
    Ok((
        NormalBump {
            center_s: s_star,
            half_width: nu,
            value_coeff: a,
            slope_coeff: b,
        },
        s_star,
    ))
}

fn point_tangent_with_direction(
    table: &Table,
    s0: f64,
    target: Vec2,
    tangent: Vec2,
    nu: f64,
    eps: f64,
    protected: &[f64],
) -> Result<(Table, PerturbationRecord, f64)> {
    let (bump, s_star) = point_direction_bump(table, s0, target, tangent, nu)?;
    let params = PerturbationParams::PointTangent {
        s0: wrap01(s0),
        s_star,
        target,
        tangent,
        nu,
    };
    if bump.value_coeff == 0.0 && bump.slope_coeff == 0.0 {
        return Ok((table.clone(), identity_record(params), s_star));
    }
    check_support(s_star, nu, protected)?;
    let after = table.with_bumps([bump])?;
    let f = after.frame(s_star);
    if f.point.dist(target) > 1e-9 || f.tangent.cross(tangent).abs() > 1e-8 {
        return Err(Error::TargetOutOfReach);
    }
    let d2_effect = finish(table, &after, eps)?;
    Ok((
        after,
        PerturbationRecord {
            params,
            bumps: vec![bump],
            support: support_of(&[bump]),
            d2_effect,
        },
        s_star,
    ))
}

/// Make the curve pass through `target` with tangent equal to the current
/// tangent at the foot point rotated by `target_angle`.
pub fn bump_point_tangent(
    table: &Table,
    s0: f64,
    target: Vec2,
    target_angle: f64,
    nu: f64,
    eps: f64,
    protected: &[f64],
) -> Result<(Table, PerturbationRecord)> {
    let s_star = foot_point(table, s0, target)?;
    let tangent = table.frame(s_star).tangent.rotate(target_angle);
    let (t, r, _) = point_tangent_with_direction(table, s0, target, tangent, nu, eps, protected)?;
    Ok((t, r))
}

/// Tangent at `p` making `a -> p -> b` obey the reflection law, oriented like `reference`.
fn reflecting_tangent(a: Vec2, p: Vec2, b: Vec2, reference: Vec2) -> Vec2 {
    let bisector = (a - p).normalized() + (b - p).normalized();
    let t = bisector.perp().normalized();
    if t.dot(reference) < 0.0 {
        -t
    } else {
        t
    }
}

/// Slide a first or last vertex along one of its segments and bend the table
/// so the moved path is again a billiard path.
pub fn move_vertex_on_segment(
    table: &Table,
    path: &PolygonalPath,
    vertex_index: usize,
    along: SlideAlong,
    slide: f64,
    nu: f64,
    eps: f64,
    protected: &[f64],
) -> Result<(Table, PolygonalPath, PerturbationRecord)> {
    let m = path.bounces();
    if vertex_index >= m {
        return Err(Error::InvalidArgument(format!("vertex {vertex_index} of a {m}-bounce path")));
    }
    let allowed = match along {
        SlideAlong::Incoming => vertex_index + 1 == m,
        SlideAlong::Outgoing => vertex_index == 0,
    };
    if !allowed {
        return Err(Error::InvalidArgument(format!(
            "vertex {vertex_index} cannot slide along its {along:?} segment"
        )));
    }
    let nodes = path.nodes();
    let (a, p, b) = (nodes[vertex_index], nodes[vertex_index + 1], nodes[vertex_index + 2]);
    let dir = match along {
        SlideAlong::Incoming => (p - a).normalized(),
        SlideAlong::Outgoing => (p - b).normalized(),
    };
    // positive slides push the vertex outward along the line of the segment
    let to = p + dir * slide;
    let params = |to| PerturbationParams::VertexSlide {
        vertex_index,
        along,
        slide,
        from: p,
        to,
    };
    if slide == 0.0 {
        return Ok((table.clone(), path.clone(), identity_record(params(p))));
    }
    let s = path.vertices[vertex_index];
    let tangent = reflecting_tangent(a, to, b, table.frame(s).tangent);
    let (after, rec, s_star) = point_tangent_with_direction(table, s, to, tangent, nu, f64::INFINITY, protected)?;
    let mut vertices = path.vertices.clone();
    vertices[vertex_index] = s_star;
    let moved = settle(&after, PolygonalPath::new(&after, path.x, path.y, vertices))?;
    let d2_effect = finish(table, &after, eps)?;
    Ok((
        after,
        moved,
        PerturbationRecord {
            params: params(to),
            d2_effect,
            ..rec
        },
    ))
}

/// Certify a constructed path, polishing it once if rounding left a residual.
fn settle(table: &Table, path: PolygonalPath) -> Result<PolygonalPath> {
    match certified(table, path.clone()) {
        Ok(c) => Ok(c.path),
        Err(_) => Ok(polish_critical(table, &path)?.path),
    }
}

/// Intersection of the lines `p + t d` and `q + u e`.
fn line_intersection(p: Vec2, d: Vec2, q: Vec2, e: Vec2) -> Option<Vec2> {
    let den = d.cross(e);
    if den.abs() < 1e-12 {
        return None;
    }
    Some(p + d * ((q - p).cross(e) / den))
}

/// Translate the chord between vertices `chord_index` and `chord_index + 1`
/// parallel to itself by sliding its ends along the neighbouring segments.
pub fn parallel_chord_shift(
    table: &Table,
    path: &PolygonalPath,
    chord_index: usize,
    slide: f64,
    nu: f64,
    eps: f64,
    protected: &[f64],
) -> Result<(Table, PolygonalPath, PerturbationRecord)> {
    let m = path.bounces();
    if chord_index + 1 >= m {
        return Err(Error::InvalidArgument(format!("chord {chord_index} of a {m}-bounce path")));
    }
    let nodes = path.nodes();
    let (a, p, q, b) = (
        nodes[chord_index],
        nodes[chord_index + 1],
        nodes[chord_index + 2],
        nodes[chord_index + 3],
    );
    let params = |p_new, q_new| PerturbationParams::ChordShift {
        chord_index,
        slide,
        p_new,
        q_new,
    };
    if slide == 0.0 {
        return Ok((table.clone(), path.clone(), identity_record(params(p, q))));
    }
    let p_new = p + (p - a).normalized() * slide;
    let q_new = line_intersection(p_new, q - p, q, q - b)
        .ok_or_else(|| Error::Geometry("chord is parallel to the following segment".into()))?;
    let (sp, sq) = (path.vertices[chord_index], path.vertices[chord_index + 1]);
    let tp = reflecting_tangent(a, p_new, q_new, table.frame(sp).tangent);
    let tq = reflecting_tangent(p_new, q_new, b, table.frame(sq).tangent);
    let mut guard: Vec<f64> = protected.to_vec();
    guard.push(sq);
    let (mid, r1, sp_new) = point_tangent_with_direction(table, sp, p_new, tp, nu, f64::INFINITY, &guard)?;
    guard.pop();
    guard.push(sp_new);
    let (after, r2, sq_new) = point_tangent_with_direction(&mid, sq, q_new, tq, nu, f64::INFINITY, &guard)?;
    let mut vertices = path.vertices.clone();
    vertices[chord_index] = sp_new;
    vertices[chord_index + 1] = sq_new;
    let moved = settle(&after, PolygonalPath::new(&after, path.x, path.y, vertices))?;
    let d2_effect = finish(table, &after, eps)?;
    let bumps: Vec<NormalBump> = r1.bumps.into_iter().chain(r2.bumps).collect();
    Ok((
        after,
        moved,
        PerturbationRecord {
            params: params(p_new, q_new),
            support: support_of(&bumps),
            bumps,
            d2_effect,
        },
    ))
}

/// Scan step for the curvature scale `z`.
const Z_STEP: f64 = 1e-3;
const Z_SCAN: usize = 200;
/// Predicted margin required of a scanned `z`, in units of the conjugacy tolerance.
const Z_MARGIN_FACTOR: f64 = 100.0;

/// If the endpoints of `path` are conjugate, scale the curvature at every
/// vertex by a common factor `z` (position and tangent fixed) so they no longer are.
/// Returns the new table, the record (`None` when nothing had to change) and
/// the conjugacy margin afterwards.
pub fn break_conjugacy(
    table: &Table,
    path: &PolygonalPath,
    eps: f64,
    protected: &[f64],
) -> Result<(Table, Option<PerturbationRecord>, f64)> {
    let before = conjugacy_test(table, path)?;
    if !before.conjugate {
        return Ok((table.clone(), None, before.margin));
    }
    let chain = FocusChainInput::from_path(table, path, 1.0);
    let mut distinct: Vec<f64> = Vec::new();
    for &s in &path.vertices {
        if !distinct.iter().any(|&d| param_dist(d, s) < 1e-12) {
            distinct.push(s);
        }
    }
    let mut log = Vec::new();
    let mut cheapest_over = f64::INFINITY;
    for j in 1..=Z_SCAN {
        let mut over = 0;
        for sign in [1.0, -1.0] {
            let z = 1.0 + sign * Z_STEP * j as f64;
            let predicted = chain.with_z(z).evaluate()?.value();
            if predicted.abs() < Z_MARGIN_FACTOR * CONJUGACY_TOL {
                continue;
            }
            let attempt = scale_curvatures(table, &distinct, z, protected)
                .and_then(|(after, bumps)| finish(table, &after, eps).map(|d| (after, bumps, d)));
            match attempt {
                Ok((after, bumps, d2_effect)) => {
                    let margin = conjugacy_test(&after, &path.on_table(&after))?.margin;
                    let record = PerturbationRecord {
                        params: PerturbationParams::ConjugacyBreak {
                            z,
                            margin_before: before.margin,
                            predicted_margin: predicted,
                        },
                        support: support_of(&bumps),
                        bumps,
                        d2_effect,
                    };
                    return Ok((after, Some(record), margin));
                }
                Err(Error::BudgetExceeded { effect, .. }) => {
                    over += 1;
                    cheapest_over = cheapest_over.min(effect);
                }
                Err(e) => log.push(format!("z = {z}: {e}")),
            }
        }
        // the cost grows with |z - 1|, so nothing further out can fit
        if over == 2 {
            break;
        }
    }
    if cheapest_over.is_finite() {
        return Err(Error::BudgetExceeded {
            effect: cheapest_over,
            budget: eps,
        });
    }
    let shown = log.len().min(3);
    Err(Error::ConjugacyScanFailed(format!(
        "{} scale factors rejected, e.g. {}",
        log.len(),
        log[..shown].join("; ")
    )))
}

/// Curvature `κ_i → z κ_i` at each parameter, each bump clear of the others and of `protected`.
fn scale_curvatures(table: &Table, params: &[f64], z: f64, protected: &[f64]) -> Result<(Table, Vec<NormalBump>)> {
    let mut cur = table.clone();
    let mut bumps = Vec::new();
    for (i, &s) in params.iter().enumerate() {
        let others: Vec<f64> = protected
            .iter()
            .copied()
            .chain(params.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, &p)| p))
            .collect();
        let nu = support_radius(s, &others);
        let kappa = cur.frame(s).kappa;
        let (next, rec) = bump_curvature(&cur, s, kappa * (z - 1.0), nu, f64::INFINITY, &others)?;
        bumps.extend(rec.bumps);
        cur = next;
    }
    Ok((cur, bumps))
}
