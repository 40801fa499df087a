//! Single-ray billiard dynamics: boundary hits, reflection and the section map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::Table;
use crate::error::{Error, Result};
use crate::geom::{wrap01, Vec2};

/// A hit with `|<v, N>|` below this is rejected as grazing.
pub const GRAZING_TOL: f64 = 1e-7;

/// Roots closer than this along the ray are treated as the starting point itself.
const MIN_HIT_T: f64 = 1e-9;

/// Distance below which a starting point counts as lying on the boundary.
const ON_BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayState {
    pub p: Vec2,
    pub v: Vec2,
}

impl RayState {
    /// Ray with direction normalized.
    pub fn new(p: Vec2, v: Vec2) -> Self {
        RayState { p, v: v.normalized() }
    }

    pub fn at(&self, t: f64) -> Vec2 {
        self.p + self.v * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BouncePoint {
    pub s: f64,
    pub t: f64,
    /// Angle from `T(s)` to the incoming direction, in `(0, pi)`.
    pub alpha: f64,
    pub point: Vec2,
}

/// Reflection of `v` in the line with unit normal `n`.
pub fn reflect(v: Vec2, n: Vec2) -> Vec2 {
    v - n * (2.0 * n.dot(v))
}

/// Incidence angle of an outward-going direction at a boundary frame.
pub fn incidence_angle(v: Vec2, tangent: Vec2, normal: Vec2) -> f64 {
    (-v.dot(normal)).atan2(v.dot(tangent))
}

/// Unit direction leaving `σ(s)` at angle `alpha` from `T(s)`.
pub fn launch_direction(table: &Table, s: f64, alpha: f64) -> Vec2 {
    let f = table.frame(s);
    f.tangent * alpha.cos() + f.normal * alpha.sin()
}

/// Exit intersection of a ray with the boundary.
///
/// A start within 1e-9 of the boundary is treated as a boundary point and the
/// root at the start is discarded.
pub fn first_hit(table: &Table, ray: &RayState) -> Result<BouncePoint> {
    let tc = table.tubular(ray.p)?;
    if tc.w.abs() < ON_BOUNDARY_TOL {
        first_hit_from(table, tc.s, ray.v)
    } else {
        first_hit_general(table, ray)
    }
}

/// `cross(v, σ(s) - p)`: zero exactly where the line through `p` meets `σ(s)`.
fn side(v: Vec2, p: Vec2, q: Vec2) -> f64 {
    v.cross(q - p)
}

/// Illinois false position for a sign change of `f` on `[a, b]`.
fn illinois(f: impl Fn(f64) -> f64, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64) -> f64 {
    let mut side_kept = 0i8;
    for _ in 0..200 {
        if fa == 0.0 {
            return a;
        }
        if fb == 0.0 {
            return b;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
        let fc = f(c);
        if fc == 0.0 || (b - a).abs() < 1e-16 {
            return c;
        }
        if (fc > 0.0) == (fb > 0.0) {
            b = c;
            fb = fc;
            if side_kept == -1 {
                fa *= 0.5;
            }
            side_kept = -1;
        } else {
            a = c;
            fa = fc;
            if side_kept == 1 {
                fb *= 0.5;
            }
            side_kept = 1;
        }
        if (b - a).abs() < 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

fn make_bounce(table: &Table, s: f64, ray: &RayState, bounce: usize) -> Result<BouncePoint> {
    let f = table.frame(s);
    let cos_normal = ray.v.dot(f.normal);
    if cos_normal.abs() < GRAZING_TOL {
        return Err(Error::Grazing { bounce, cos_normal });
    }
    if cos_normal > 0.0 {
        return Err(Error::Geometry(format!("ray enters the table at s = {s:.6}")));
    }
    Ok(BouncePoint {
        s: wrap01(s),
        t: (f.point - ray.p).dot(ray.v),
        alpha: incidence_angle(ray.v, f.tangent, f.normal),
        point: f.point,
    })
}

fn first_hit_general(table: &Table, ray: &RayState) -> Result<BouncePoint> {
    let samples = table.samples();
    let n = samples.len();
    let g = |s: f64| side(ray.v, ray.p, table.point(s));
    let mut best: Option<(f64, f64)> = None;
    let mut prev = side(ray.v, ray.p, samples[n - 1]);
    for i in 0..n {
        let cur = side(ray.v, ray.p, samples[i]);
        if (prev < 0.0) != (cur < 0.0) || cur == 0.0 {
            let (a, b) = ((i as f64 - 1.0) / n as f64, i as f64 / n as f64);
            let s = if cur == 0.0 { b } else { illinois(g, a, prev, b, cur) };
            let t = (table.point(s) - ray.p).dot(ray.v);
            if t > MIN_HIT_T && best.is_none_or(|(bt, _)| t > bt) {
                best = Some((t, s));
            }
        }
        prev = cur;
    }
    let (_, s) = best.ok_or_else(|| Error::Geometry("ray does not cross the boundary".into()))?;
    make_bounce(table, s, ray, 0)
}

/// Exit intersection for a ray leaving the boundary point `σ(s0)` along `v`.
pub fn first_hit_from(table: &Table, s0: f64, v: Vec2) -> Result<BouncePoint> {
    let s0 = wrap01(s0);
    let [p, d1] = table.derivs::<2>(s0);
    let v = v.normalized();
    let frame = table.frame(s0);
    let cos_normal = v.dot(frame.normal);
    if cos_normal.abs() < GRAZING_TOL {
        return Err(Error::Grazing { bounce: 0, cos_normal });
    }
    if cos_normal < 0.0 {
        return Err(Error::Geometry("direction points out of the table".into()));
    }
    // Deflate the known root at s0: h(u) = g(s0 + u) / sin(pi u) on (0, 1)
    // has a single sign change at the far intersection.
    let g0 = v.cross(d1);
    let h = |u: f64| {
        if u <= 0.0 {
            g0 / PI
        } else if u >= 1.0 {
            -g0 / PI
        } else {
            side(v, p, table.point(s0 + u)) / (PI * u).sin()
        }
    };
    let samples = table.samples();
    let n = samples.len();
    let start = ((s0 * n as f64).floor() as usize + 1) % n;
    let mut prev_u = 0.0;
    let mut prev_h = g0 / PI;
    let mut bracket = None;
    for k in 0..=n {
        let (u, hv) = if k == n {
            (1.0, -g0 / PI)
        } else {
            let i = (start + k) % n;
            let u = wrap01(i as f64 / n as f64 - s0);
            if u <= 0.0 {
                continue;
            }
            (u, side(v, p, samples[i]) / (PI * u).sin())
        };
        if (prev_h < 0.0) != (hv < 0.0) || hv == 0.0 {
            bracket = Some((prev_u, prev_h, u, hv));
            break;
        }
        prev_u = u;
        prev_h = hv;
    }
    let (a, fa, b, fb) = bracket.ok_or_else(|| Error::Geometry("no far intersection found".into()))?;
    let u = illinois(h, a, fa, b, fb);
    let ray = RayState { p, v };
    let hit = make_bounce(table, s0 + u, &ray, 0)?;
    if hit.t <= MIN_HIT_T {
        return Err(Error::Grazing { bounce: 0, cos_normal });
    }
    Ok(hit)
}

/// One step of the section map `(s, alpha) -> (s', alpha')`.
pub fn billiard_map(table: &Table, s: f64, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < PI) {
        return Err(Error::InvalidArgument(format!("angle {alpha} outside (0, pi)")));
    }
    let hit = first_hit_from(table, s, launch_direction(table, s, alpha))?;
    Ok((hit.s, hit.alpha))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub start: RayState,
    pub bounces: Vec<BouncePoint>,
    /// Ray leaving the last bounce (the start ray when there are no bounces).
    pub exit: RayState,
    /// Sum of the traced segment lengths up to the last bounce.
    pub length: f64,
}

pub fn trace(table: &Table, ray: &RayState, bounces: usize) -> Result<Trace> {
    let start = RayState::new(ray.p, ray.v);
    let mut out = Trace {
        start,
        bounces: Vec::with_capacity(bounces),
        exit: start,
        length: 0.0,
    };
    let mut cur = start;
    let mut on_boundary: Option<f64> = None;
    for k in 0..bounces {
        let hit = match on_boundary {
            Some(s) => first_hit_from(table, s, cur.v),
            None => first_hit(table, &cur),
        }
        .map_err(|e| match e {
            Error::Grazing { cos_normal, .. } => Error::Grazing { bounce: k, cos_normal },
            other => other,
        })?;
        let f = table.frame(hit.s);
        cur = RayState {
            p: hit.point,
            v: reflect(cur.v, f.normal).normalized(),
        };
        out.length += hit.t;
        out.bounces.push(hit);
        on_boundary = Some(hit.s);
    }
    out.exit = cur;
    Ok(out)
}

/// Polygonal path `x -> σ(s_1) -> ... -> σ(s_m) -> y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonalPath {
    pub x: Vec2,
    pub y: Vec2,
    pub vertices: Vec<f64>,
    pub points: Vec<Vec2>,
}

impl PolygonalPath {
    pub fn new(table: &Table, x: Vec2, y: Vec2, vertices: Vec<f64>) -> Self {
        let vertices: Vec<f64> = vertices.into_iter().map(wrap01).collect();
        let points = vertices.iter().map(|&s| table.point(s)).collect();
        PolygonalPath { x, y, vertices, points }
    }

    pub fn segment(x: Vec2, y: Vec2) -> Self {
        PolygonalPath {
            x,
            y,
            vertices: Vec::new(),
            points: Vec::new(),
        }
    }

    /// Same vertex parameters re-evaluated on another table.
    pub fn on_table(&self, table: &Table) -> Self {
        PolygonalPath::new(table, self.x, self.y, self.vertices.clone())
    }

    pub fn bounces(&self) -> usize {
        self.vertices.len()
    }

    /// `x`, the vertices, then `y`.
    pub fn nodes(&self) -> Vec<Vec2> {
        let mut v = Vec::with_capacity(self.points.len() + 2);
        v.push(self.x);
        v.extend_from_slice(&self.points);
        v.push(self.y);
        v
    }

    pub fn segments(&self) -> Vec<(Vec2, Vec2)> {
        self.nodes().windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Consecutive node distances `ρ_0, …, ρ_m`.
    pub fn rhos(&self) -> Vec<f64> {
        self.nodes().windows(2).map(|w| w[0].dist(w[1])).collect()
    }

    pub fn length(&self) -> f64 {
        self.rhos().iter().sum()
    }

    /// Incoming and outgoing angles `(α_in, α_out)` at every vertex.
    pub fn angles(&self, table: &Table) -> Vec<(f64, f64)> {
        let nodes = self.nodes();
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let f = table.frame(s);
                let d_in = (nodes[i + 1] - nodes[i]).normalized();
                let d_out = (nodes[i + 2] - nodes[i + 1]).normalized();
                let a_in = incidence_angle(d_in, f.tangent, f.normal);
                let a_out = d_out.dot(f.normal).atan2(d_out.dot(f.tangent));
                (a_in, a_out)
            })
            .collect()
    }
}

/// Serialized view of a path together with its angles and length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub x: Vec2,
    pub y: Vec2,
    pub vertices: Vec<f64>,
    pub points: Vec<Vec2>,
    pub angles: Vec<f64>,
    pub length: f64,
}

impl PathRecord {
    pub fn new(table: &Table, path: &PolygonalPath) -> Self {
        PathRecord {
            x: path.x,
            y: path.y,
            vertices: path.vertices.clone(),
            points: path.points.clone(),
            angles: path.angles(table).iter().map(|a| a.0).collect(),
            length: path.length(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::point_line_dist;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn first_hit_examples() {
        let c = Table::circle(1.0);
        let h = first_hit(&c, &RayState::new(Vec2::ZERO, Vec2::new(1.0, 0.0))).unwrap();
        assert!(crate::geom::param_dist(h.s, 0.0) < 1e-12);
        assert!((h.t - 1.0).abs() < 1e-12);
        let h = first_hit(&c, &RayState::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0))).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert!(h.point.dist(Vec2::new(1.0, 0.0)) < 1e-12);
        let h = first_hit(&c, &RayState::new(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 1.0))).unwrap();
        assert!((h.t - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grazing_from_boundary_is_rejected() {
        let c = Table::circle(1.0);
        let r = first_hit(&c, &RayState::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)));
        assert!(matches!(r, Err(Error::Grazing { .. })));
    }

    #[test]
    fn reflect_examples() {
        let n = Vec2::new(0.0, 1.0);
        assert_eq!(reflect(Vec2::new(0.0, -1.0), n), Vec2::new(0.0, 1.0));
        let r = reflect(Vec2::new(FRAC_1_SQRT_2, -FRAC_1_SQRT_2), n);
        assert!((r.x - FRAC_1_SQRT_2).abs() < 1e-15 && (r.y - FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(reflect(Vec2::new(1.0, 0.0), n), Vec2::new(1.0, 0.0));
    }

    #[test]
    fn circle_section_map() {
        let c = Table::circle(1.0);
        let (s, a) = billiard_map(&c, 0.0, PI / 2.0).unwrap();
        assert!(crate::geom::param_dist(s, 0.5) < 1e-12);
        assert!((a - PI / 2.0).abs() < 1e-12);
        let (s, a) = billiard_map(&c, 0.2, PI / 3.0).unwrap();
        assert!(crate::geom::param_dist(s, 0.2 + 1.0 / 3.0) < 1e-12);
        assert!((a - PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_examples() {
        let c = Table::circle(1.0);
        let t = trace(&c, &RayState::new(Vec2::ZERO, Vec2::new(1.0, 0.0)), 2).unwrap();
        assert_eq!(t.bounces.len(), 2);
        assert!(t.bounces[0].point.dist(Vec2::new(1.0, 0.0)) < 1e-12);
        assert!(t.bounces[1].point.dist(Vec2::new(-1.0, 0.0)) < 1e-12);
        for b in &t.bounces {
            assert!((b.alpha - PI / 2.0).abs() < 1e-12);
        }
        let t0 = trace(&c, &RayState::new(Vec2::ZERO, Vec2::new(0.0, 1.0)), 0).unwrap();
        assert!(t0.bounces.is_empty());
        assert_eq!(t0.exit, t0.start);
    }

    #[test]
    fn ellipse_focal_trace() {
        let e = Table::ellipse(2.0, 1.0);
        let f1 = Vec2::new(3f64.sqrt(), 0.0);
        let f2 = Vec2::new(-(3f64.sqrt()), 0.0);
        let t = trace(&e, &RayState::new(f1, Vec2::new(0.3, 1.0)), 3).unwrap();
        for (k, b) in t.bounces.iter().enumerate() {
            let next = t.bounces.get(k + 1).map(|n| n.point).unwrap_or(t.exit.at(1.0));
            let d = point_line_dist(f1, b.point, next).min(point_line_dist(f2, b.point, next));
            assert!(d < 1e-8, "bounce {k}: {d}");
        }
    }

    #[test]
    fn path_angles_on_symmetric_path() {
        let c = Table::circle(1.0);
        let p = PolygonalPath::new(&c, Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0), vec![0.25]);
        let (a, b) = p.angles(&c)[0];
        assert!((a - b).abs() < 1e-14);
        assert!((p.length() - 2.0 * 1.25f64.sqrt()).abs() < 1e-14);
    }
}
