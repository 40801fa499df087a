//! Billiard paths between two interior points: the length-maximizing solver,
//! Newton shooting along reflected pencils, enumeration and certification.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beams::{LineFamily, Seed};
use crate::curve::Table;
use crate::error::{Error, Result};
use crate::geom::{param_dist, wrap01, Vec2};
use crate::ray::{trace, PolygonalPath, RayState, GRAZING_TOL};

/// A path certifies when the reflection-angle residual is below this.
pub const CERT_RESIDUAL_TOL: f64 = 1e-8;
/// Paths with the same bounce count whose vertices differ by less than this are the same path.
pub const PATH_IDENTITY_TOL: f64 = 1e-6;
/// Consecutive nodes closer than this make a configuration degenerate.
const COINCIDENT_TOL: f64 = 1e-12;
/// Largest parameter step taken by any Newton iteration.
const MAX_NEWTON_STEP: f64 = 0.2;
const SHOOT_TOL: f64 = 1e-10;
const SHOOT_MAX_ITER: usize = 50;
const SINGULAR_DET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathCertificate {
    /// Largest `|α_in - α_out|` over the vertices.
    pub residual: f64,
    /// Smallest of `α` and `π - α` over the vertices (`π/2` without vertices).
    pub min_alpha: f64,
    pub length: f64,
}

impl PathCertificate {
    pub fn is_valid(&self) -> bool {
        self.residual < CERT_RESIDUAL_TOL && self.min_alpha > GRAZING_TOL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedPath {
    pub path: PolygonalPath,
    pub certificate: PathCertificate,
}

fn check_nodes(path: &PolygonalPath) -> Result<()> {
    if path.rhos().iter().any(|&r| r < COINCIDENT_TOL) {
        return Err(Error::DegenerateConfiguration);
    }
    Ok(())
}

/// Reflection-law residuals of a path on `table`, recomputed from scratch.
pub fn certify(table: &Table, path: &PolygonalPath) -> Result<PathCertificate> {
    if !path.vertices.is_empty() {
        check_nodes(path)?;
    }
    let mut residual: f64 = 0.0;
    let mut min_alpha = FRAC_PI_2;
    for (a_in, a_out) in path.angles(table) {
        residual = residual.max((a_in - a_out).abs());
        min_alpha = min_alpha.min(a_in.min(PI - a_in)).min(a_out.min(PI - a_out));
    }
    Ok(PathCertificate {
        residual,
        min_alpha,
        length: path.length(),
    })
}

/// Certify, failing with [`Error::InvalidPath`] when the residual is too large.
pub fn certified(table: &Table, path: PolygonalPath) -> Result<CertifiedPath> {
    let certificate = certify(table, &path)?;
    if !certificate.is_valid() {
        return Err(Error::InvalidPath {
            residual: certificate.residual,
            min_alpha: certificate.min_alpha,
        });
    }
    Ok(CertifiedPath { path, certificate })
}

/// Length and gradient with respect to the vertex parameters.
pub fn path_length(table: &Table, x: Vec2, y: Vec2, s: &[f64]) -> Result<(f64, Vec<f64>)> {
    let e = LengthEval::new(table, x, y, s, false)?;
    Ok((e.length, e.grad))
}

/// Length, gradient and the tridiagonal Hessian `(diag, off)` of the length.
struct LengthEval {
    length: f64,
    grad: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl LengthEval {
    fn new(table: &Table, x: Vec2, y: Vec2, s: &[f64], hessian: bool) -> Result<Self> {
        let m = s.len();
        let d: Vec<[Vec2; 3]> = s.iter().map(|&si| table.derivs::<3>(si)).collect();
        let node = |k: usize| -> Vec2 {
            if k == 0 {
                x
            } else if k == m + 1 {
                y
            } else {
                d[k - 1][0]
            }
        };
        let mut out = LengthEval {
            length: 0.0,
            grad: vec![0.0; m],
            diag: vec![0.0; if hessian { m } else { 0 }],
            off: vec![0.0; if hessian { m.saturating_sub(1) } else { 0 }],
        };
        // segment k joins node k and node k+1; vertex i (0-based) is node i+1
        for k in 0..=m {
            let e = node(k + 1) - node(k);
            let len = e.norm();
            if len < COINCIDENT_TOL {
                return Err(Error::DegenerateConfiguration);
            }
            out.length += len;
            let u = e / len;
            // tail endpoint is vertex k-1, head endpoint is vertex k
            let tail = k.checked_sub(1);
            let head = (k < m).then_some(k);
            if let Some(i) = tail {
                out.grad[i] -= u.dot(d[i][1]);
            }
            if let Some(j) = head {
                out.grad[j] += u.dot(d[j][1]);
            }
            if !hessian {
                continue;
            }
            let transverse = |a: Vec2, b: Vec2| (a.dot(b) - u.dot(a) * u.dot(b)) / len;
            if let Some(i) = tail {
                out.diag[i] += -u.dot(d[i][2]) + transverse(d[i][1], d[i][1]);
            }
            if let Some(j) = head {
                out.diag[j] += u.dot(d[j][2]) + transverse(d[j][1], d[j][1]);
            }
            if let (Some(i), Some(j)) = (tail, head) {
                out.off[i] -= transverse(d[i][1], d[j][1]);
            }
        }
        Ok(out)
    }
}

/// Solve the symmetric tridiagonal system; the flag reports whether every
/// pivot was negative (the matrix is negative definite).
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<(Vec<f64>, bool)> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut negative = true;
    for i in 0..n {
        let sub = if i > 0 { off[i - 1] } else { 0.0 };
        let pivot = diag[i] - if i > 0 { sub * c[i - 1] } else { 0.0 };
        if pivot.abs() < 1e-300 || !pivot.is_finite() {
            return None;
        }
        negative &= pivot < 0.0;
        c[i] = if i + 1 < n { off[i] / pivot } else { 0.0 };
        r[i] = (rhs[i] - if i > 0 { sub * r[i - 1] } else { 0.0 }) / pivot;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        r[i] -= c[i] * r[i + 1];
    }
    Some((r, negative))
}

fn clamp_step(step: &mut [f64]) {
    let big = step.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if big > MAX_NEWTON_STEP {
        step.iter_mut().for_each(|v| *v *= MAX_NEWTON_STEP / big);
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Gradient ascent with Armijo backtracking followed by Levenberg–Marquardt
/// shifted Newton steps, each accepted only if the length does not drop.
fn ascend(table: &Table, x: Vec2, y: Vec2, mut s: Vec<f64>) -> Option<Vec<f64>> {
    let mut cur = LengthEval::new(table, x, y, &s, false).ok()?;
    let mut step = 1e-2;
    for _ in 0..30 {
        let g2: f64 = cur.grad.iter().map(|g| g * g).sum();
        if g2.sqrt() < 1e-6 {
            break;
        }
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = s.iter().zip(&cur.grad).map(|(a, g)| a + step * g).collect();
            if let Ok(e) = LengthEval::new(table, x, y, &trial, false) {
                if e.length >= cur.length + 1e-4 * step * g2 {
                    s = trial;
                    cur = e;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let mut mu = 0.0;
    for _ in 0..200 {
        let e = LengthEval::new(table, x, y, &s, true).ok()?;
        let gnorm = inf_norm(&e.grad);
        if gnorm < 1e-14 {
            break;
        }
        let scale = e.diag.iter().fold(1e-12f64, |a, v| a.max(v.abs()));
        let mut improved = false;
        for _ in 0..40 {
            let shifted: Vec<f64> = e.diag.iter().map(|d| d - mu).collect();
            let neg: Vec<f64> = e.grad.iter().map(|g| -g).collect();
            if let Some((mut delta, true)) = solve_tridiagonal(&shifted, &e.off, &neg) {
                clamp_step(&mut delta);
                let trial: Vec<f64> = s.iter().zip(&delta).map(|(a, d)| a + d).collect();
                if let Ok(t) = LengthEval::new(table, x, y, &trial, false) {
                    let tiny = 1e-15 * e.length;
                    if t.length > e.length - tiny && inf_norm(&t.grad) < gnorm.max(1e-300) * 1.0001
                        || t.length > e.length + tiny
                    {
                        s = trial;
                        mu *= 0.25;
                        if mu < 1e-12 * scale {
                            mu = 0.0;
                        }
                        improved = true;
                        break;
                    }
                }
            }
            mu = (mu * 4.0).max(1e-6 * scale);
        }
        if !improved {
            break;
        }
    }
    Some(s.into_iter().map(wrap01).collect())
}

/// Plain damped Newton on the gradient: converges to the nearby critical
/// configuration whatever its index. Used to re-solve known paths after a
/// small change of the table.
pub fn polish_critical(table: &Table, path: &PolygonalPath) -> Result<CertifiedPath> {
    let (x, y) = (path.x, path.y);
    if path.vertices.is_empty() {
        return certified(table, PolygonalPath::segment(x, y));
    }
    let mut s = path.vertices.clone();
    for _ in 0..60 {
        let e = LengthEval::new(table, x, y, &s, true)?;
        let gnorm = inf_norm(&e.grad);
        if gnorm < 1e-14 {
            break;
        }
        let neg: Vec<f64> = e.grad.iter().map(|g| -g).collect();
        let Some((mut delta, _)) = solve_tridiagonal(&e.diag, &e.off, &neg) else {
            break;
        };
        clamp_step(&mut delta);
        let mut lambda = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = s.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            if let Ok(t) = LengthEval::new(table, x, y, &trial, false) {
                if inf_norm(&t.grad) < gnorm {
                    s = trial;
                    moved = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !moved {
            break;
        }
    }
    certified(table, PolygonalPath::new(table, x, y, s))
}

fn initial_vertices(m: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let phase: f64 = rng.gen();
    if k.is_multiple_of(2) {
        // arithmetic progression with a random winding
        let winding = rng.gen_range(1..=m.max(1)) as f64;
        let jitter: f64 = rng.gen_range(-0.25..0.25);
        let step = (winding + jitter) / (m as f64 + 1.0);
        (0..m).map(|i| wrap01(phase + step * i as f64)).collect()
    } else {
        // stratified random tuple in shuffled strata order
        let mut strata: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            strata.swap(i, rng.gen_range(0..=i));
        }
        strata
            .into_iter()
            .map(|j| wrap01(phase + (j as f64 + rng.gen::<f64>()) / m as f64))
            .collect()
    }
}

fn same_path(a: &PolygonalPath, b: &PolygonalPath) -> bool {
    a.vertices.len() == b.vertices.len()
        && a.vertices
            .iter()
            .zip(&b.vertices)
            .all(|(p, q)| param_dist(*p, *q) < PATH_IDENTITY_TOL)
}

/// Canonical order (length descending, then vertex tuple) with near-duplicates removed.
pub fn sort_dedup(mut paths: Vec<CertifiedPath>) -> Vec<CertifiedPath> {
    paths.sort_by(|a, b| {
        b.certificate
            .length
            .total_cmp(&a.certificate.length)
            .then_with(|| a.path.vertices.len().cmp(&b.path.vertices.len()))
            .then_with(|| {
                a.path
                    .vertices
                    .iter()
                    .zip(&b.path.vertices)
                    .map(|(p, q)| p.total_cmp(q))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
    });
    let mut out: Vec<CertifiedPath> = Vec::with_capacity(paths.len());
    for p in paths {
        if !out.iter().any(|q| same_path(&q.path, &p.path)) {
            out.push(p);
        }
    }
    out
}

/// Certified `m`-bounce billiard paths from `x` to `y` found as local maxima of
/// the length from `starts` seeded initial vertex tuples, longest first.
pub fn max_length_path(table: &Table, x: Vec2, y: Vec2, m: usize, starts: usize, seed: u64) -> Vec<CertifiedPath> {
    if m == 0 {
        return certified(table, PolygonalPath::segment(x, y)).into_iter().collect();
    }
    let found: Vec<CertifiedPath> = (0..starts)
        .into_par_iter()
        .filter_map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64 + 1);
            let init = initial_vertices(m, k, &mut rng);
            let s = ascend(table, x, y, init)?;
            certified(table, PolygonalPath::new(table, x, y, s)).ok()
        })
        .collect();
    sort_dedup(found)
}

/// Every certified path with up to `max_bounces` bounces found by the variational solver.
pub fn enumerate_paths(
    table: &Table,
    x: Vec2,
    y: Vec2,
    max_bounces: usize,
    starts_per_m: usize,
    seed: u64,
) -> Vec<CertifiedPath> {
    let mut all = Vec::new();
    for m in 0..=max_bounces {
        all.extend(max_length_path(table, x, y, m, starts_per_m, seed.wrapping_add(m as u64)));
    }
    sort_dedup(all)
}

/// Pencil at `p` aimed at `theta + u`, reflected `m` times.
pub struct Shot {
    family: LineFamily,
    pub p: Vec2,
    pub theta: f64,
    pub trace: crate::ray::Trace,
}

impl Shot {
    /// `ℓ_m(u, t)` and its Jacobian columns `(∂/∂u, ∂/∂t)`.
    pub fn eval(&self, u: f64, t: f64) -> Result<(Vec2, [Vec2; 2])> {
        Ok(self.family.eval(u)?.point_and_jacobian(t))
    }

    pub fn line(&self, u: f64) -> Result<crate::beams::LineJet> {
        self.family.eval(u)
    }
}

pub fn shoot(table: &Table, p: Vec2, theta: f64, m: usize) -> Result<Shot> {
    let shared = Arc::new(table.clone());
    let family = LineFamily::new(Seed::Pencil { p, theta0: theta }, (-PI, PI)).with_reflections(&shared, m);
    let trace = trace(table, &RayState::new(p, Vec2::from_angle(theta)), m)?;
    Ok(Shot { family, p, theta, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootResult {
    pub u_star: f64,
    pub t_star: f64,
    /// Absolute launch angle `theta0 + u_star`.
    pub theta: f64,
    pub path: PolygonalPath,
    pub converged: bool,
    pub iterations: usize,
    /// Jacobian determinant at the solution.
    pub det: f64,
}

/// Newton iteration on `ℓ_m(u, t) = q` for the pencil at `p` launched near `theta0`.
pub fn solve_shooting(table: &Table, p: Vec2, q: Vec2, m: usize, theta0: f64) -> Result<ShootResult> {
    let shot = shoot(table, p, theta0, m)?;
    let mut u = 0.0;
    let line = shot.line(u)?;
    let mut t = (q - line.xi).dot(line.v);
    let residual = |u: f64, t: f64| -> Result<(Vec2, [Vec2; 2])> {
        let (pt, j) = shot.eval(u, t)?;
        Ok((pt - q, j))
    };
    let (mut f, mut j) = residual(u, t)?;
    let mut iterations = 0;
    while f.norm() >= SHOOT_TOL {
        if iterations >= SHOOT_MAX_ITER {
            return Err(Error::NoConvergence {
                iterations,
                residual: f.norm(),
            });
        }
        iterations += 1;
        let det = j[0].cross(j[1]);
        let (mut du, mut dt) = if det.abs() > 1e-12 {
            // Cramer's rule for J [du, dt] = -f
            ((-f).cross(j[1]) / det, j[0].cross(-f) / det)
        } else {
            // regularized Gauss–Newton when the columns are nearly parallel
            let lambda = 1e-6;
            let a = [j[0].dot(j[0]) + lambda, j[0].dot(j[1]), j[1].dot(j[1]) + lambda];
            let r = [-j[0].dot(f), -j[1].dot(f)];
            let dd = a[0] * a[2] - a[1] * a[1];
            ((r[0] * a[2] - a[1] * r[1]) / dd, (a[0] * r[1] - a[1] * r[0]) / dd)
        };
        if du.abs() > MAX_NEWTON_STEP {
            let k = MAX_NEWTON_STEP / du.abs();
            du *= k;
            dt *= k;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            if let Ok((fn_, jn)) = residual(u + lambda * du, t + lambda * dt) {
                if fn_.norm() < f.norm() {
                    u += lambda * du;
                    t += lambda * dt;
                    f = fn_;
                    j = jn;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence {
                iterations,
                residual: f.norm(),
            });
        }
    }
    let det = j[0].cross(j[1]);
    if det.abs() < SINGULAR_DET {
        return Err(Error::SingularJacobian { det });
    }
    if t <= 0.0 {
        return Err(Error::Geometry("shooting solution lies behind the last vertex".into()));
    }
    let theta = theta0 + u;
    let tr = trace(table, &RayState::new(p, Vec2::from_angle(theta)), m)?;
    let vertices = tr.bounces.iter().map(|b| b.s).collect();
    Ok(ShootResult {
        u_star: u,
        t_star: t,
        theta,
        path: PolygonalPath::new(table, p, q, vertices),
        converged: true,
        iterations,
        det,
    })
}

/// Launch angle of a path's first segment.
pub fn launch_angle(path: &PolygonalPath) -> f64 {
    let first = path.points.first().copied().unwrap_or(path.y);
    (first - path.x).angle()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd_gradient(table: &Table, x: Vec2, y: Vec2, s: &[f64], h: f64) -> Vec<f64> {
        (0..s.len())
            .map(|i| {
                let mut a = s.to_vec();
                let mut b = s.to_vec();
                a[i] -= h;
                b[i] += h;
                let la = path_length(table, x, y, &a).unwrap().0;
                let lb = path_length(table, x, y, &b).unwrap().0;
                (lb - la) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn path_length_examples() {
        let c = Table::circle(1.0);
        let (l, g) = path_length(&c, Vec2::ZERO, Vec2::ZERO, &[0.37]).unwrap();
        assert!((l - 2.0).abs() < 1e-14 && g[0].abs() < 1e-12);
        let (_, g) = path_length(&c, Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0), &[0.25]).unwrap();
        assert!(g[0].abs() < 1e-12);
        let fd = fd_gradient(&c, Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0), &[0.25], 1e-6);
        assert!(fd[0].abs() < 1e-6);
        assert_eq!(
            path_length(&c, Vec2::new(1.0, 0.0), Vec2::ZERO, &[0.0]).unwrap_err(),
            Error::DegenerateConfiguration
        );
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let t = Table::noisy_circle(1.0, 0.02, 4, 3);
        let (x, y) = (Vec2::new(-0.2, 0.3), Vec2::new(0.4, -0.1));
        let s = [0.1, 0.45, 0.8];
        let e = LengthEval::new(&t, x, y, &s, true).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut a = s.to_vec();
            let mut b = s.to_vec();
            a[i] -= h;
            b[i] += h;
            let ga = path_length(&t, x, y, &a).unwrap().1;
            let gb = path_length(&t, x, y, &b).unwrap().1;
            for j in 0..3 {
                let fd = (gb[j] - ga[j]) / (2.0 * h);
                let an = match j as i64 - i as i64 {
                    0 => e.diag[i],
                    1 => e.off[i],
                    -1 => e.off[j],
                    _ => 0.0,
                };
                assert!((fd - an).abs() < 1e-5, "({i},{j}) fd {fd} analytic {an}");
            }
        }
    }

    #[test]
    fn circle_one_bounce_maximum() {
        let c = Table::circle(1.0);
        let paths = max_length_path(&c, Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0), 1, 16, 1);
        let best = &paths[0];
        assert!((best.certificate.length - 2.0 * 1.25f64.sqrt()).abs() < 1e-8);
        let p = best.path.points[0];
        assert!(p.dist(Vec2::new(0.0, 1.0)).min(p.dist(Vec2::new(0.0, -1.0))) < 1e-6);
    }

    #[test]
    fn mirrored_two_bounce_path_certifies() {
        let c = Table::circle(1.0);
        let paths = max_length_path(&c, Vec2::new(-0.3, 0.2), Vec2::new(0.3, 0.2), 2, 16, 5);
        assert!(!paths.is_empty());
        assert!(paths.iter().all(|p| p.certificate.residual < 1e-8));
    }

    #[test]
    fn ellipse_focal_paths() {
        let e = Table::ellipse(2.0, 1.0);
        let f = Vec2::new(3f64.sqrt(), 0.0);
        let paths = max_length_path(&e, f, -f, 1, 16, 2);
        assert!(!paths.is_empty());
        for p in &paths {
            // every focal chord has length 2a
            assert!((p.certificate.length - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn enumerate_circle_one_bounce() {
        let c = Table::circle(1.0);
        let all = enumerate_paths(&c, Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0), 1, 24, 9);
        assert!(all.iter().any(|p| p.path.vertices.is_empty()));
        for target in [Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0)] {
            assert!(all
                .iter()
                .any(|p| p.path.points.len() == 1 && p.path.points[0].dist(target) < 1e-6));
        }
        let only = enumerate_paths(&c, Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0), 0, 4, 9);
        assert_eq!(only.len(), 1);
    }

    #[test]
    fn shooting_examples() {
        let c = Table::circle(1.0);
        let (p, q) = (Vec2::new(-0.2, 0.1), Vec2::new(0.3, 0.4));
        let r = solve_shooting(&c, p, q, 0, 0.0).unwrap();
        assert!((r.theta - (q - p).angle()).abs() < 1e-10);
        assert!((r.t_star - p.dist(q)).abs() < 1e-10);
        let r = solve_shooting(&c, Vec2::new(-0.5, 0.0), Vec2::new(0.5, 0.0), 1, 1.2).unwrap();
        assert!(r.path.points[0].dist(Vec2::new(0.0, 1.0)) < 1e-8);
        assert!(matches!(
            solve_shooting(&c, Vec2::ZERO, Vec2::ZERO, 1, 0.3),
            Err(Error::SingularJacobian { .. })
        ));
    }

    #[test]
    fn shot_from_center_returns_through_center() {
        let c = Table::circle(1.0);
        let s = shoot(&c, Vec2::ZERO, 0.7, 1).unwrap();
        let (pt, _) = s.eval(0.0, 1.0).unwrap();
        assert!(pt.norm() < 1e-12);
    }

    #[test]
    fn shot_jacobian_matches_finite_differences() {
        let t = Table::noisy_circle(1.0, 0.02, 4, 11);
        let s = shoot(&t, Vec2::new(0.1, -0.2), 0.9, 3).unwrap();
        let (u, tt, h) = (0.01, 0.4, 1e-6);
        let (_, j) = s.eval(u, tt).unwrap();
        let du = (s.eval(u + h, tt).unwrap().0 - s.eval(u - h, tt).unwrap().0) / (2.0 * h);
        let dt = (s.eval(u, tt + h).unwrap().0 - s.eval(u, tt - h).unwrap().0) / (2.0 * h);
        assert!(j[0].dist(du) < 1e-6 && j[1].dist(dt) < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn gradient_matches_finite_differences(
            seed in 0u64..1000,
            s in proptest::collection::vec(0.0f64..1.0, 1..5),
            xa in -0.4f64..0.4, xb in -0.4f64..0.4,
        ) {
            let t = Table::noisy_circle(1.0, 0.02, 4, seed);
            let (x, y) = (Vec2::new(xa, xb), Vec2::new(xb, -xa));
            if let Ok((_, g)) = path_length(&t, x, y, &s) {
                let fd = fd_gradient(&t, x, y, &s, 1e-6);
                for (a, b) in g.iter().zip(&fd) {
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }
}
