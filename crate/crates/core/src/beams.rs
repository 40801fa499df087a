//! One-parameter families of oriented lines, their envelopes, reflection of
//! families in a table, and the mirror-equation focus chain along a path.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::Table;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::paths::{certify, CERT_RESIDUAL_TOL};
use crate::ray::{first_hit, first_hit_from, reflect, PolygonalPath, RayState, GRAZING_TOL};

/// `|v'|` below this counts as stationary direction (focus at infinity).
pub const DEGENERACY_TOL: f64 = 1e-9;
pub const CONJUGACY_TOL: f64 = 1e-6;

/// A line of the family and its first derivative in the family parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineJet {
    pub xi: Vec2,
    pub v: Vec2,
    pub dxi: Vec2,
    pub dv: Vec2,
}

impl LineJet {
    /// Point `ξ + t v` and the Jacobian columns `(∂/∂u, ∂/∂t)`.
    pub fn point_and_jacobian(&self, t: f64) -> (Vec2, [Vec2; 2]) {
        (self.xi + self.v * t, [self.dxi + self.dv * t, self.v])
    }
}

type SeedFn = dyn Fn(f64) -> LineJet + Send + Sync;

#[derive(Clone)]
pub enum Seed {
    /// Lines through `p` at angle `theta0 + u`.
    Pencil { p: Vec2, theta0: f64 },
    /// Lines with direction angle `theta`, basepoint `origin + u perp(dir)`.
    Parallel { origin: Vec2, theta: f64 },
    Custom(Arc<SeedFn>),
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seed::Pencil { p, theta0 } => write!(f, "Pencil({p:?}, {theta0})"),
            Seed::Parallel { origin, theta } => write!(f, "Parallel({origin:?}, {theta})"),
            Seed::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Seed {
    fn eval(&self, u: f64) -> LineJet {
        match self {
            Seed::Pencil { p, theta0 } => {
                let v = Vec2::from_angle(theta0 + u);
                LineJet {
                    xi: *p,
                    v,
                    dxi: Vec2::ZERO,
                    dv: v.perp(),
                }
            }
            Seed::Parallel { origin, theta } => {
                let v = Vec2::from_angle(*theta);
                LineJet {
                    xi: *origin + v.perp() * u,
                    v,
                    dxi: v.perp(),
                    dv: Vec2::ZERO,
                }
            }
            Seed::Custom(f) => f(u),
        }
    }
}

/// A seed family followed by a sequence of reflections.
#[derive(Debug, Clone)]
pub struct LineFamily {
    seed: Seed,
    domain: (f64, f64),
    reflections: Vec<Arc<Table>>,
}

impl LineFamily {
    pub fn new(seed: Seed, domain: (f64, f64)) -> Self {
        LineFamily {
            seed,
            domain,
            reflections: Vec::new(),
        }
    }

    pub fn custom(f: impl Fn(f64) -> LineJet + Send + Sync + 'static, domain: (f64, f64)) -> Self {
        LineFamily::new(Seed::Custom(Arc::new(f)), domain)
    }

    /// The family reflected `times` more times in `table`, without sampling checks.
    pub(crate) fn with_reflections(mut self, table: &Arc<Table>, times: usize) -> Self {
        self.reflections.extend(std::iter::repeat_with(|| Arc::clone(table)).take(times));
        self
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn reflections(&self) -> usize {
        self.reflections.len()
    }

    /// Line at `u` with derivatives, plus the boundary parameter of the last reflection.
    fn eval_full(&self, u: f64) -> Result<(LineJet, Option<f64>)> {
        let mut line = self.seed.eval(u);
        let mut last: Option<(&Arc<Table>, f64)> = None;
        for (k, table) in self.reflections.iter().enumerate() {
            let hit = match last {
                Some((prev, s)) if Arc::ptr_eq(prev, table) => first_hit_from(table, s, line.v),
                _ => first_hit(table, &RayState { p: line.xi, v: line.v }),
            }
            .map_err(|e| match e {
                Error::Grazing { cos_normal, .. } => Error::Grazing { bounce: k, cos_normal },
                Error::Geometry(_) => Error::Domain(u),
                other => other,
            })?;
            line = reflect_jet(table, &line, hit.s, hit.t);
            last = Some((table, hit.s));
        }
        Ok((line, last.map(|l| l.1)))
    }

    pub fn eval(&self, u: f64) -> Result<LineJet> {
        Ok(self.eval_full(u)?.0)
    }
}

/// Reflect a line jet hitting the boundary at `σ(s) = ξ + t v`, differentiating
/// the hit condition implicitly.
fn reflect_jet(table: &Table, line: &LineJet, s: f64, t: f64) -> LineJet {
    let f = table.frame(s);
    let n = f.normal;
    let vn = n.dot(line.v);
    let dt = -n.dot(line.dxi + line.dv * t) / vn;
    let dxi = line.dxi + line.v * dt + line.dv * t;
    let ds = dxi.dot(f.tangent) / f.speed;
    let dn = f.tangent * (-f.kappa * f.speed * ds);
    let v1 = reflect(line.v, n);
    let dv1 = line.dv - n * (2.0 * (dn.dot(line.v) + n.dot(line.dv))) - dn * (2.0 * vn);
    LineJet {
        xi: f.point,
        v: v1,
        dxi,
        dv: dv1,
    }
}

pub fn pencil(p: Vec2, theta0: f64, domain: (f64, f64)) -> LineFamily {
    LineFamily::new(Seed::Pencil { p, theta0 }, domain)
}

pub fn parallel(origin: Vec2, theta: f64, domain: (f64, f64)) -> LineFamily {
    LineFamily::new(Seed::Parallel { origin, theta }, domain)
}

/// Number of domain samples checked when reflecting a family.
const REFLECT_CHECK_SAMPLES: usize = 17;

/// Family reflected once more in `table`. Every sampled line of the domain
/// must cross the boundary without grazing.
pub fn reflect_family(table: &Arc<Table>, family: &LineFamily) -> Result<LineFamily> {
    let mut out = family.clone();
    out.reflections.push(Arc::clone(table));
    let (a, b) = family.domain;
    for i in 0..REFLECT_CHECK_SAMPLES {
        let u = a + (b - a) * i as f64 / (REFLECT_CHECK_SAMPLES - 1) as f64;
        out.eval(u)?;
    }
    Ok(out)
}

/// Projective focusing distance `a / b`; `b = 0` is the focus at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusRatio {
    pub a: f64,
    pub b: f64,
}

impl FocusRatio {
    pub const INFINITY: FocusRatio = FocusRatio { a: 1.0, b: 0.0 };

    pub fn new(a: f64, b: f64) -> Self {
        let m = a.abs().max(b.abs());
        assert!(m > 0.0 && m.is_finite(), "focus ratio ({a}, {b}) is not a projective point");
        FocusRatio { a: a / m, b: b / m }
    }

    pub fn finite(f: f64) -> Self {
        if f.is_finite() {
            FocusRatio::new(f, 1.0)
        } else {
            FocusRatio::INFINITY
        }
    }

    /// Focusing distance, `±inf` at infinity.
    pub fn value(&self) -> f64 {
        if self.b == 0.0 {
            f64::INFINITY
        } else {
            self.a / self.b
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.b == 0.0
    }

    fn apply(&self, m: &Mobius) -> FocusRatio {
        FocusRatio::new(m.0[0][0] * self.a + m.0[0][1] * self.b, m.0[1][0] * self.a + m.0[1][1] * self.b)
    }
}

/// 2×2 matrix acting on homogeneous focus pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobius(pub [[f64; 2]; 2]);

impl Mobius {
    pub const IDENTITY: Mobius = Mobius([[1.0, 0.0], [0.0, 1.0]]);

    /// Reflection with power `c = 2κz/sin α` followed by a translation by `-rho`.
    pub fn mirror(c: f64, rho: f64) -> Mobius {
        Mobius([[1.0 - rho * c, -rho], [c, 1.0]])
    }

    /// `self` applied after `first`.
    pub fn then_after(&self, first: &Mobius) -> Mobius {
        let (a, b) = (self.0, first.0);
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mobius(r)
    }

    pub fn apply(&self, f: FocusRatio) -> FocusRatio {
        f.apply(self)
    }
}

/// Envelope (first-order focusing distance from `ξ(u0)` along `v(u0)`).
pub fn envelope(family: &LineFamily, u0: f64) -> Result<FocusRatio> {
    Ok(envelope_of(&family.eval(u0)?))
}

pub fn envelope_of(line: &LineJet) -> FocusRatio {
    let dv2 = line.dv.norm_sq();
    if dv2.sqrt() < DEGENERACY_TOL {
        FocusRatio::INFINITY
    } else {
        FocusRatio::finite(-line.dxi.dot(line.dv) / dv2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Degeneracy {
    pub degenerate: bool,
    /// `|v'(u0)|`.
    pub dv_norm: f64,
    /// `|ξ'(u0) × v(u0)|`, the part of `ξ'` transverse to the line.
    pub transverse: f64,
}

pub fn is_degenerate(family: &LineFamily, u0: f64) -> Result<Degeneracy> {
    Ok(degeneracy_of(&family.eval(u0)?))
}

pub fn degeneracy_of(line: &LineJet) -> Degeneracy {
    let dv_norm = line.dv.norm();
    let transverse = line.dxi.cross(line.v).abs();
    Degeneracy {
        degenerate: dv_norm < DEGENERACY_TOL && transverse < DEGENERACY_TOL * line.dxi.norm().max(1.0),
        dv_norm,
        transverse,
    }
}

/// One mirror-equation step: reflection at curvature `kappa·z`, incidence
/// `alpha`, then translation to the next basepoint `rho_next` further on.
pub fn mirror_step(f_in: FocusRatio, kappa: f64, alpha: f64, rho_next: f64, z: f64) -> Result<FocusRatio> {
    let sin = alpha.sin();
    if sin <= GRAZING_TOL {
        return Err(Error::Grazing { bounce: 0, cos_normal: sin });
    }
    Ok(Mobius::mirror(2.0 * kappa * z / sin, rho_next).apply(f_in))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainBounce {
    pub kappa: f64,
    pub alpha: f64,
    /// Distance to the next node of the path.
    pub rho: f64,
}

/// Per-bounce data of a path, ready for the focus recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusChainInput {
    /// Distance from the start point to the first node.
    pub rho0: f64,
    pub bounces: Vec<ChainBounce>,
    pub z: f64,
}

impl FocusChainInput {
    pub fn from_path(table: &Table, path: &PolygonalPath, z: f64) -> Self {
        let rhos = path.rhos();
        let angles = path.angles(table);
        let bounces = path
            .vertices
            .iter()
            .enumerate()
            .map(|(i, &s)| ChainBounce {
                kappa: table.frame(s).kappa,
                alpha: angles[i].0,
                rho: rhos[i + 1],
            })
            .collect();
        FocusChainInput { rho0: rhos[0], bounces, z }
    }

    pub fn with_z(&self, z: f64) -> Self {
        FocusChainInput { z, ..self.clone() }
    }

    fn start(&self) -> FocusRatio {
        FocusRatio::finite(-self.rho0)
    }

    /// Whole chain as a single matrix product.
    pub fn matrix(&self) -> Result<Mobius> {
        let mut m = Mobius::IDENTITY;
        for b in &self.bounces {
            let sin = b.alpha.sin();
            if sin <= GRAZING_TOL {
                return Err(Error::Grazing { bounce: 0, cos_normal: sin });
            }
            m = Mobius::mirror(2.0 * b.kappa * self.z / sin, b.rho).then_after(&m);
        }
        Ok(m)
    }

    /// Focusing distance at the end point, measured from it.
    pub fn evaluate(&self) -> Result<FocusRatio> {
        Ok(self.matrix()?.apply(self.start()))
    }

    /// Step-by-step evaluation with a record per bounce.
    pub fn dump(&self, table: Option<(&Table, &PolygonalPath)>) -> Result<Vec<FocusRecord>> {
        let mut f = self.start();
        let mut out = Vec::with_capacity(self.bounces.len());
        for (i, b) in self.bounces.iter().enumerate() {
            let after = mirror_step(f, b.kappa, b.alpha, 0.0, self.z).map_err(|_| Error::Grazing {
                bounce: i,
                cos_normal: b.alpha.sin(),
            })?;
            out.push(FocusRecord {
                s: table.map(|(_, p)| p.vertices[i]),
                kappa: b.kappa,
                alpha: b.alpha,
                rho: b.rho,
                f_before: f.value(),
                f_after: after.value(),
            });
            f = Mobius::mirror(0.0, b.rho).apply(after);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusRecord {
    pub s: Option<f64>,
    pub kappa: f64,
    pub alpha: f64,
    pub rho: f64,
    /// Incoming focusing distance measured from the vertex.
    pub f_before: f64,
    /// Outgoing focusing distance measured from the vertex.
    pub f_after: f64,
}

fn require_certified(table: &Table, path: &PolygonalPath) -> Result<()> {
    let c = certify(table, path)?;
    if c.residual >= CERT_RESIDUAL_TOL || c.min_alpha <= GRAZING_TOL {
        return Err(Error::InvalidPath {
            residual: c.residual,
            min_alpha: c.min_alpha,
        });
    }
    Ok(())
}

/// Focusing distance of the pencil at `path.x`, carried along the path with
/// all curvatures scaled by `z`, measured from `path.y`.
pub fn propagate_focus(table: &Table, path: &PolygonalPath, z: f64) -> Result<FocusRatio> {
    require_certified(table, path)?;
    FocusChainInput::from_path(table, path, z).evaluate()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjugacyReport {
    pub conjugate: bool,
    /// Signed focusing distance at the end point (infinite if the beam leaves parallel).
    pub margin: f64,
}

pub fn conjugacy_test(table: &Table, path: &PolygonalPath) -> Result<ConjugacyReport> {
    let margin = propagate_focus(table, path, 1.0)?.value();
    Ok(ConjugacyReport {
        conjugate: margin.abs() < CONJUGACY_TOL,
        margin,
    })
}
