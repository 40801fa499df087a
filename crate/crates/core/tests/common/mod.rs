//! Helpers shared by the integration tests: raw path bundles and a
//! brute-force general-position oracle.
#![allow(dead_code)]

use birkhoff::{PolygonalPath, Vec2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A path with arbitrary vertex points (not tied to any table).
pub fn raw(x: Vec2, y: Vec2, pts: Vec<Vec2>) -> PolygonalPath {
    PolygonalPath {
        x,
        y,
        vertices: (0..pts.len()).map(|i| i as f64 / 16.0).collect(),
        points: pts,
    }
}

pub fn random_bundle(rng: &mut ChaCha8Rng) -> (Vec<PolygonalPath>, Vec2, Vec2) {
    let disc = |rng: &mut ChaCha8Rng| Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * rng.gen_range(0.0..0.8);
    let x = disc(rng);
    let y = disc(rng);
    let n = rng.gen_range(1..5);
    let paths = (0..n)
        .map(|_| {
            let m = rng.gen_range(0..4);
            // a coarse angle lattice makes shared vertices and concurrences likely
            let pts = (0..m)
                .map(|_| Vec2::from_angle(rng.gen_range(0..12) as f64 * std::f64::consts::PI / 6.0))
                .collect();
            raw(x, y, pts)
        })
        .collect();
    (paths, x, y)
}

pub mod oracle {
    use super::*;

    pub struct Verdict {
        pub gp: [bool; 4],
        pub nc: bool,
    }

    fn nodes(p: &PolygonalPath) -> Vec<Vec2> {
        let mut v = vec![p.x];
        v.extend(p.points.iter().copied());
        v.push(p.y);
        v
    }

    fn dist_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
        let ab = b - a;
        let t = if ab.norm_sq() == 0.0 { 0.0 } else { ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0) };
        (a + ab * t - p).norm()
    }

    /// Line-equation (Cramer) intersection of two closed segments.
    fn intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> Option<Vec2> {
        let (a1, b1) = (b.y - a.y, a.x - b.x);
        let c1 = a1 * a.x + b1 * a.y;
        let (a2, b2) = (d.y - c.y, c.x - d.x);
        let c2 = a2 * c.x + b2 * c.y;
        let det = a1 * b2 - a2 * b1;
        if det.abs() <= 1e-15 * (b - a).norm() * (d - c).norm() {
            return None;
        }
        let p = Vec2::new((b2 * c1 - b1 * c2) / det, (a1 * c2 - a2 * c1) / det);
        let on = |p: Vec2, u: Vec2, v: Vec2| dist_to_segment(p, u, v) < 1e-9;
        (on(p, a, b) && on(p, c, d)).then_some(p)
    }

    pub fn check(paths: &[PolygonalPath], x: Vec2, y: Vec2, tol: f64) -> Verdict {
        let mut gp = [true; 4];
        let verts: Vec<(usize, Vec2)> = paths
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.points.iter().map(move |&q| (i, q)))
            .collect();
        for (i, &(pi, p)) in verts.iter().enumerate() {
            for &(pj, q) in &verts[i + 1..] {
                if p.dist(q) < tol {
                    gp[if pi == pj { 1 } else { 0 }] = false;
                }
            }
        }
        // (segment, touches x, touches y)
        let mut segs = Vec::new();
        for p in paths {
            let nd = nodes(p);
            let last = nd.len() - 2;
            for k in 0..=last {
                segs.push((nd[k], nd[k + 1], k == 0, k == last));
            }
        }
        for i in 0..segs.len() {
            for j in 0..segs.len() {
                for k in 0..segs.len() {
                    if i >= j || k == i || k == j {
                        continue;
                    }
                    let (si, sj) = (segs[i], segs[j]);
                    if (si.2 && sj.2) || (si.3 && sj.3) {
                        continue;
                    }
                    if let Some(p) = intersect(si.0, si.1, sj.0, sj.1) {
                        if p.dist(x) >= tol && p.dist(y) >= tol && dist_to_segment(p, segs[k].0, segs[k].1) < tol {
                            gp[2] = false;
                        }
                    }
                }
            }
        }
        for &(a, b, tx, ty) in &segs {
            if (!tx && dist_to_segment(x, a, b) < tol) || (!ty && dist_to_segment(y, a, b) < tol) {
                gp[3] = false;
            }
        }
        let mut nc = true;
        for (i, &(_, p)) in verts.iter().enumerate() {
            for &(_, q) in &verts[i + 1..] {
                let len = p.dist(q);
                if len > 1e-12 && ((q - p).cross(y - p)).abs() / len < tol * len {
                    nc = false;
                }
            }
        }
        Verdict { gp, nc }
    }
}
