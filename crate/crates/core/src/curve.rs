//! Smooth strictly convex closed curves.
//!
//! A [`Table`] boundary is a truncated trigonometric series `σ₀(s)` with
//! period 1, plus a list of compactly supported bumps that push the curve
//! along the base normal: `σ(s) = σ₀(s) + d(s) N₀(s)`. Derivatives are exact
//! (Taylor jets) up to order four.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{param_delta, signed_angle, wrap01, Jet, Vec2, VecJet};

pub const DEFAULT_GRID: usize = 2048;
pub const MAX_ORDER: usize = 4;

/// Below this value of `1 - t^2` the mollifier and all its derivatives are
/// under 1e-250 and are flushed to zero.
const MOLLIFIER_FLUSH: f64 = 1.0 / 600.0;

/// A normal-offset bump `value_coeff Ψ₁(s - c) + slope_coeff Ψ₂(s - c)`.
///
/// `Ψ₁(δ) = exp(1 - 1/(1 - (δ/ν)^2))` has `Ψ₁(0) = 1`, `Ψ₁'(0) = 0`, and
/// `Ψ₂(δ) = δ Ψ₁(δ)` has `Ψ₂(0) = 0`, `Ψ₂'(0) = 1`. Both vanish with all
/// derivatives outside `|δ| < ν`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalBump {
    pub center_s: f64,
    pub half_width: f64,
    pub value_coeff: f64,
    #[serde(default)]
    pub slope_coeff: f64,
}

impl NormalBump {
    pub fn value(center_s: f64, half_width: f64, value_coeff: f64) -> Self {
        NormalBump {
            center_s,
            half_width,
            value_coeff,
            slope_coeff: 0.0,
        }
    }

    pub fn contains(&self, s: f64) -> bool {
        param_delta(s, self.center_s).abs() < self.half_width
    }

    /// Taylor jet of the offset `d(s)` contributed by this bump.
    fn jet<const N: usize>(&self, s: f64) -> Option<Jet<N>> {
        let delta = param_delta(s, self.center_s);
        if delta.abs() >= self.half_width {
            return None;
        }
        let (psi1, psi2) = profiles::<N>(delta, self.half_width)?;
        Some(psi1 * self.value_coeff + psi2 * self.slope_coeff)
    }
}

/// Jets of `Ψ₁` and `Ψ₂` at offset `delta` from the bump center.
fn profiles<const N: usize>(delta: f64, half_width: f64) -> Option<(Jet<N>, Jet<N>)> {
    let t: Jet<N> = Jet::variable(delta / half_width, 1.0 / half_width);
    let q = Jet::constant(1.0) - t * t;
    if q.value() <= MOLLIFIER_FLUSH {
        return None;
    }
    let psi1 = (Jet::constant(1.0) - q.recip()).exp();
    let psi2 = Jet::variable(delta, 1.0) * psi1;
    Some((psi1, psi2))
}

/// The value-type profile `Ψ₁` and its derivatives at `delta`.
pub fn value_profile(delta: f64, half_width: f64) -> [f64; 3] {
    match profiles::<3>(delta, half_width) {
        Some((p, _)) => [p.derivative(0), p.derivative(1), p.derivative(2)],
        None => [0.0; 3],
    }
}

/// The slope-type profile `Ψ₂` and its derivatives at `delta`.
pub fn slope_profile(delta: f64, half_width: f64) -> [f64; 3] {
    match profiles::<3>(delta, half_width) {
        Some((_, p)) => [p.derivative(0), p.derivative(1), p.derivative(2)],
        None => [0.0; 3],
    }
}

/// Serialized form of a table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub fourier_x: Vec<f64>,
    pub fourier_y: Vec<f64>,
    #[serde(default)]
    pub bumps: Vec<NormalBump>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

/// A billiard table boundary. Immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "TableSpec", into = "TableSpec")]
pub struct Table {
    fourier_x: Vec<f64>,
    fourier_y: Vec<f64>,
    bumps: Vec<NormalBump>,
    grid: usize,
    /// `σ(i / grid)` for `i in 0..grid`.
    samples: Vec<Vec2>,
}

impl PartialEq for Table {
    fn eq(&self, o: &Self) -> bool {
        self.fourier_x == o.fourier_x
            && self.fourier_y == o.fourier_y
            && self.bumps == o.bumps
            && self.grid == o.grid
    }
}

impl TryFrom<TableSpec> for Table {
    type Error = Error;
    fn try_from(spec: TableSpec) -> Result<Self> {
        Table::new(spec.fourier_x, spec.fourier_y, spec.bumps, spec.grid)
    }
}

impl From<Table> for TableSpec {
    fn from(t: Table) -> Self {
        TableSpec {
            fourier_x: t.fourier_x,
            fourier_y: t.fourier_y,
            bumps: t.bumps,
            grid: t.grid,
        }
    }
}

/// Orthonormal frame and curvature at a boundary parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub point: Vec2,
    pub tangent: Vec2,
    /// Inward unit normal, `tangent` rotated counterclockwise.
    pub normal: Vec2,
    pub kappa: f64,
    /// `|σ'(s)|`.
    pub speed: f64,
}

/// Nearest-point coordinates `(s, w)` with `p = σ(s) + w N(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubularCoords {
    pub s: f64,
    /// Signed distance, positive inside the table.
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    PositiveCurvature,
    RegularSpeed,
    Simple,
    Counterclockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantFailure {
    pub invariant: Invariant,
    /// Worst sample parameter.
    pub at: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub min_curvature: f64,
    pub min_curvature_at: f64,
    pub max_curvature: f64,
    pub min_speed: f64,
    pub min_speed_at: f64,
    pub simple: bool,
    pub failures: Vec<InvariantFailure>,
}

impl Table {
    pub fn new(
        fourier_x: Vec<f64>,
        fourier_y: Vec<f64>,
        bumps: Vec<NormalBump>,
        grid: usize,
    ) -> Result<Self> {
        for (name, c) in [("fourier_x", &fourier_x), ("fourier_y", &fourier_y)] {
            if c.is_empty() || c.len() % 2 == 0 {
                return Err(Error::MalformedTable(format!(
                    "{name} must hold a constant term followed by cos/sin pairs (got {} entries)",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedTable(format!("{name} has non-finite entries")));
            }
        }
        if grid < 16 {
            return Err(Error::MalformedTable(format!("grid {grid} is below 16")));
        }
        for b in &bumps {
            let ok = b.half_width > 0.0
                && b.half_width < 0.5
                && b.center_s.is_finite()
                && b.value_coeff.is_finite()
                && b.slope_coeff.is_finite();
            if !ok {
                return Err(Error::MalformedTable(format!("invalid bump {b:?}")));
            }
        }
        let bumps = bumps
            .into_iter()
            .map(|b| NormalBump {
                center_s: wrap01(b.center_s),
                ..b
            })
            .collect();
        let mut table = Table {
            fourier_x,
            fourier_y,
            bumps,
            grid,
            samples: Vec::new(),
        };
        table.samples = (0..grid)
            .map(|i| table.point(i as f64 / grid as f64))
            .collect();
        Ok(table)
    }

    pub fn circle(radius: f64) -> Self {
        Table::new(vec![0.0, radius, 0.0], vec![0.0, 0.0, radius], Vec::new(), DEFAULT_GRID)
            .expect("circle preset")
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Table::new(vec![0.0, a, 0.0], vec![0.0, 0.0, b], Vec::new(), DEFAULT_GRID)
            .expect("ellipse preset")
    }

    /// Circle of `radius` with uniform random coefficients in `[-amplitude, amplitude]`
    /// added to harmonics `2..=harmonics` of both coordinates.
    pub fn noisy_circle(radius: f64, amplitude: f64, harmonics: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fx = vec![0.0, radius, 0.0];
        let mut fy = vec![0.0, 0.0, radius];
        for _ in 2..=harmonics {
            for c in [&mut fx, &mut fy] {
                c.push(rng.gen_range(-amplitude..=amplitude));
                c.push(rng.gen_range(-amplitude..=amplitude));
            }
        }
        Table::new(fx, fy, Vec::new(), DEFAULT_GRID).expect("noisy circle preset")
    }

    pub fn fourier_x(&self) -> &[f64] {
        &self.fourier_x
    }

    pub fn fourier_y(&self) -> &[f64] {
        &self.fourier_y
    }

    pub fn bumps(&self) -> &[NormalBump] {
        &self.bumps
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Boundary points at the validation grid parameters `i / grid`.
    pub fn samples(&self) -> &[Vec2] {
        &self.samples
    }

    pub fn with_bumps(&self, extra: impl IntoIterator<Item = NormalBump>) -> Result<Table> {
        let mut bumps = self.bumps.clone();
        bumps.extend(extra);
        Table::new(self.fourier_x.clone(), self.fourier_y.clone(), bumps, self.grid)
    }

    pub fn with_grid(&self, grid: usize) -> Result<Table> {
        Table::new(self.fourier_x.clone(), self.fourier_y.clone(), self.bumps.clone(), grid)
    }

    /// Derivatives `σ₀^(0..len)` of the trigonometric base curve.
    fn base_derivatives(&self, s: f64, out: &mut [Vec2]) {
        fn coordinate(c: &[f64], s: f64, out: &mut [f64]) {
            out.iter_mut().for_each(|v| *v = 0.0);
            out[0] = c[0];
            for k in 1..=(c.len() - 1) / 2 {
                let (a, b) = (c[2 * k - 1], c[2 * k]);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                let w = TAU * k as f64;
                let (sn, cs) = (w * s).sin_cos();
                let mut scale = 1.0;
                for (j, o) in out.iter_mut().enumerate() {
                    // d^j/ds^j of cos and sin, cycling with period 4
                    let (dc, ds) = match j % 4 {
                        0 => (cs, sn),
                        1 => (-sn, cs),
                        2 => (-cs, -sn),
                        _ => (sn, -cs),
                    };
                    *o += scale * (a * dc + b * ds);
                    scale *= w;
                }
            }
        }
        let n = out.len();
        let mut xs = [0.0; MAX_ORDER + 2];
        let mut ys = [0.0; MAX_ORDER + 2];
        coordinate(&self.fourier_x, s, &mut xs[..n]);
        coordinate(&self.fourier_y, s, &mut ys[..n]);
        for j in 0..n {
            out[j] = Vec2::new(xs[j], ys[j]);
        }
    }

    /// Total normal offset jet `d(s)`, or `None` when no bump covers `s`.
    fn offset_jet<const N: usize>(&self, s: f64) -> Option<Jet<N>> {
        let mut total: Option<Jet<N>> = None;
        for b in &self.bumps {
            if let Some(j) = b.jet::<N>(s) {
                total = Some(match total {
                    Some(t) => t + j,
                    None => j,
                });
            }
        }
        total
    }

    /// The first `N` derivatives `σ(s), σ'(s), …`, with `N <= 5`.
    pub fn derivs<const N: usize>(&self, s: f64) -> [Vec2; N] {
        assert!(N >= 1 && N <= MAX_ORDER + 1, "derivative count {N} out of range");
        let s = wrap01(s);
        let mut base = [Vec2::ZERO; MAX_ORDER + 2];
        let offset = self.offset_jet::<N>(s);
        let needed = if offset.is_some() { N + 1 } else { N };
        self.base_derivatives(s, &mut base[..needed]);
        let mut out = [Vec2::ZERO; N];
        let Some(d) = offset else {
            out.copy_from_slice(&base[..N]);
            return out;
        };
        let sigma0: VecJet<N> = VecJet::from_derivatives(&base[..N]);
        let velocity: VecJet<N> = VecJet::from_derivatives(&base[1..N + 1]);
        let inv_speed = velocity.dot(&velocity).sqrt().recip();
        let normal = VecJet {
            x: -velocity.y * inv_speed,
            y: velocity.x * inv_speed,
        };
        let curve = sigma0 + normal.scale_by(d);
        for (k, o) in out.iter_mut().enumerate() {
            *o = curve.derivative(k);
        }
        out
    }

    /// Point and derivatives up to `order` (at most 4).
    pub fn eval(&self, s: f64, order: usize) -> Result<Vec<Vec2>> {
        let v = match order {
            0 => self.derivs::<1>(s).to_vec(),
            1 => self.derivs::<2>(s).to_vec(),
            2 => self.derivs::<3>(s).to_vec(),
            3 => self.derivs::<4>(s).to_vec(),
            4 => self.derivs::<5>(s).to_vec(),
            _ => return Err(Error::UnsupportedDerivative(order)),
        };
        Ok(v)
    }

    pub fn point(&self, s: f64) -> Vec2 {
        self.derivs::<1>(s)[0]
    }

    pub fn frame(&self, s: f64) -> Frame {
        let [p, d1, d2] = self.derivs::<3>(s);
        let speed = d1.norm();
        let tangent = d1 / speed;
        Frame {
            point: p,
            tangent,
            normal: tangent.perp(),
            kappa: d1.cross(d2) / (speed * speed * speed),
            speed,
        }
    }

    /// Unit inward normal of the trigonometric base curve (bump direction).
    pub fn base_normal(&self, s: f64) -> Vec2 {
        let mut d = [Vec2::ZERO; 2];
        self.base_derivatives(wrap01(s), &mut d);
        d[1].normalized().perp()
    }

    /// Base normal `N₀(s)` and its parameter derivative `N₀'(s) = -κ₀ |σ₀'| T₀`.
    pub fn base_normal_derivs(&self, s: f64) -> (Vec2, Vec2) {
        let mut d = [Vec2::ZERO; 3];
        self.base_derivatives(wrap01(s), &mut d);
        let speed = d[1].norm();
        let t = d[1] / speed;
        let kappa = d[1].cross(d[2]) / (speed * speed * speed);
        (t.perp(), t * (-kappa * speed))
    }

    /// Index of the cached sample closest to `p`.
    fn nearest_sample(&self, p: Vec2) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, q) in self.samples.iter().enumerate() {
            let d = (*q - p).norm_sq();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Nearest-point projection onto the boundary.
    pub fn tubular(&self, p: Vec2) -> Result<TubularCoords> {
        let n = self.grid as f64;
        let i = self.nearest_sample(p);
        let mut s = i as f64 / n;
        // φ(s) = <σ(s) - p, σ'(s)>, increasing through the nearest point
        let phi = |s: f64| {
            let [q, d1, d2] = self.derivs::<3>(s);
            let r = q - p;
            (r.dot(d1), d1.norm_sq() + r.dot(d2))
        };
        let (mut lo, mut hi) = (s - 1.0 / n, s + 1.0 / n);
        let bracketed = phi(lo).0 <= 0.0 && phi(hi).0 >= 0.0;
        let mut converged = false;
        for _ in 0..100 {
            let (f, df) = phi(s);
            if f == 0.0 {
                converged = true;
                break;
            }
            if bracketed {
                if f < 0.0 {
                    lo = s;
                } else {
                    hi = s;
                }
            }
            let mut next = if df > 0.0 { s - f / df } else { f64::NAN };
            if bracketed && !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            } else if !next.is_finite() {
                break;
            } else if (next - s).abs() > 0.05 {
                next = s + 0.05 * (next - s).signum();
            }
            let step = (next - s).abs();
            s = next;
            if step < 1e-16 || (bracketed && hi - lo < 1e-16) {
                converged = true;
                break;
            }
        }
        let f = self.frame(s);
        let w = (p - f.point).dot(f.normal);
        let residual = (p - f.point).dot(f.tangent).abs();
        if !converged && residual > 1e-10 {
            return Err(Error::ProjectionFailure { x: p.x, y: p.y });
        }
        Ok(TubularCoords { s: wrap01(s), w })
    }

    /// Signed distance to the boundary, positive inside.
    pub fn signed_distance(&self, p: Vec2) -> Result<f64> {
        Ok(self.tubular(p)?.w)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        matches!(self.signed_distance(p), Ok(w) if w > 0.0)
    }

    /// Sample parameters used for invariant checks: the grid plus a dense
    /// set inside each bump support.
    fn validation_params(&self) -> Vec<f64> {
        let mut params: Vec<f64> = (0..self.grid).map(|i| i as f64 / self.grid as f64).collect();
        for b in &self.bumps {
            let k = 64;
            for j in 0..=2 * k {
                params.push(wrap01(b.center_s + b.half_width * (j as f64 / k as f64 - 1.0)));
            }
        }
        params
    }

    pub fn validate(&self) -> ValidationReport {
        let mut min_k = (f64::INFINITY, 0.0);
        let mut max_k = f64::NEG_INFINITY;
        let mut min_v = (f64::INFINITY, 0.0);
        for s in self.validation_params() {
            let [_, d1, d2] = self.derivs::<3>(s);
            let speed = d1.norm();
            let kappa = d1.cross(d2) / (speed * speed * speed);
            let kappa = if kappa.is_finite() { kappa } else { f64::NEG_INFINITY };
            if kappa < min_k.0 {
                min_k = (kappa, s);
            }
            max_k = max_k.max(kappa);
            if speed < min_v.0 {
                min_v = (speed, s);
            }
        }
        let mut failures = Vec::new();
        if !(min_k.0 > 0.0) {
            failures.push(InvariantFailure {
                invariant: Invariant::PositiveCurvature,
                at: min_k.1,
                value: min_k.0,
            });
        }
        if !(min_v.0 > 0.0) {
            failures.push(InvariantFailure {
                invariant: Invariant::RegularSpeed,
                at: min_v.1,
                value: min_v.0,
            });
        }
        let area = polygon_area(&self.samples);
        if !(area > 0.0) {
            failures.push(InvariantFailure {
                invariant: Invariant::Counterclockwise,
                at: 0.0,
                value: area,
            });
        }
        let crossing = polygon_self_intersection(&self.samples);
        if let Some(i) = crossing {
            failures.push(InvariantFailure {
                invariant: Invariant::Simple,
                at: i as f64 / self.grid as f64,
                value: 0.0,
            });
        }
        ValidationReport {
            valid: failures.is_empty(),
            min_curvature: min_k.0,
            min_curvature_at: min_k.1,
            max_curvature: max_k,
            min_speed: min_v.0,
            min_speed_at: min_v.1,
            simple: crossing.is_none(),
            failures,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validate().valid
    }

    /// Upper bound on the table diameter from the sample bounding box.
    pub fn diameter_bound(&self) -> f64 {
        let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for p in &self.samples {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (hi - lo).norm() * 1.01
    }

    /// Smallest bump half-width, if any.
    pub fn finest_feature(&self) -> Option<f64> {
        self.bumps.iter().map(|b| b.half_width).reduce(f64::min)
    }

    pub fn length(&self) -> f64 {
        ArcLength::new(self, self.grid.max(256)).total
    }
}

fn polygon_area(p: &[Vec2]) -> f64 {
    let n = p.len();
    (0..n).map(|i| p[i].cross(p[(i + 1) % n])).sum::<f64>() * 0.5
}

/// First edge index taking part in a crossing, if the closed polygon is not simple.
fn polygon_self_intersection(p: &[Vec2]) -> Option<usize> {
    let n = p.len();
    let edge = |i: usize| (p[i], p[(i + 1) % n]);
    // A closed polygon turning left at every vertex with total turning 2π is convex.
    let mut turning = 0.0;
    let mut all_left = true;
    for i in 0..n {
        let (a, b) = edge(i);
        let (_, c) = edge((i + 1) % n);
        let ang = signed_angle(b - a, c - b);
        all_left &= ang > 0.0;
        turning += ang;
    }
    if all_left && (turning - TAU).abs() < 1e-6 {
        return None;
    }
    for i in 0..n {
        let (a, b) = edge(i);
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (c, d) = edge(j);
            if segments_cross(a, b, c, d) {
                return Some(i);
            }
        }
    }
    None
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    o1 * o2 <= 0.0 && o3 * o4 <= 0.0
}

/// Cumulative arclength on a uniform parameter grid, 5-point Gauss–Legendre per cell.
struct ArcLength<'a> {
    table: &'a Table,
    cells: usize,
    cumulative: Vec<f64>,
    total: f64,
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

impl<'a> ArcLength<'a> {
    fn new(table: &'a Table, cells: usize) -> Self {
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let h = 1.0 / cells as f64;
        let mut acc = 0.0;
        for i in 0..cells {
            acc += Self::segment(table, i as f64 * h, (i + 1) as f64 * h);
            cumulative.push(acc);
        }
        ArcLength {
            table,
            cells,
            cumulative,
            total: acc,
        }
    }

    fn segment(table: &Table, a: f64, b: f64) -> f64 {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS)
            .map(|(x, w)| w * table.derivs::<2>(mid + half * x)[1].norm())
            .sum::<f64>()
            * half
    }

    /// Parameter `s` with arclength `fraction * total` from `s = 0`.
    fn param_at(&self, fraction: f64) -> f64 {
        let target = fraction * self.total;
        let cell = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(i) => i.min(self.cells - 1),
            Err(i) => (i - 1).min(self.cells - 1),
        };
        let start = cell as f64 / self.cells as f64;
        let mut s = start + (target - self.cumulative[cell]) / (self.cumulative[cell + 1] - self.cumulative[cell])
            / self.cells as f64;
        for _ in 0..4 {
            let len = self.cumulative[cell] + Self::segment(self.table, start, s);
            let speed = self.table.derivs::<2>(s)[1].norm();
            let step = (len - target) / speed;
            s -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        s
    }
}

/// `(f, f', f'')` of the constant-speed parametrization `[0,1] → σ` starting at `σ(0)`.
fn constant_speed_samples(table: &Table, grid: usize) -> Vec<[Vec2; 3]> {
    let arc = ArcLength::new(table, (2 * grid).max(table.grid));
    let len = arc.total;
    (0..grid)
        .map(|i| {
            let s = arc.param_at(i as f64 / grid as f64);
            let f = table.frame(s);
            [f.point, f.tangent * len, f.normal * (len * len * f.kappa)]
        })
        .collect()
}

/// `C^k` distance between two tables (`k <= 2`): the infimum over basepoint
/// shifts of the sampled sup-norm deviation of constant-speed parametrizations.
/// The infimum runs over the `grid` uniform shifts.
pub fn ck_distance(a: &Table, b: &Table, k: usize, grid: usize) -> Result<f64> {
    if k > 2 {
        return Err(Error::UnsupportedDerivative(k));
    }
    if grid == 0 {
        return Err(Error::InvalidArgument("grid must be positive".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = constant_speed_samples(a, grid);
    let fb = constant_speed_samples(b, grid);
    // Branch and bound: try promising shifts first, abandon a shift as soon as
    // its running sup exceeds the best complete one.
    let mut order: Vec<(f64, usize)> = (0..grid).map(|j| (fa[j][0].dist(fb[0][0]), j)).collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut best = f64::INFINITY;
    for (_, shift) in order {
        let mut sup: f64 = 0.0;
        for i in 0..grid {
            let ra = &fa[(i + shift) % grid];
            let rb = &fb[i];
            for o in 0..=k {
                sup = sup.max(ra[o].dist(rb[o]));
            }
            if sup >= best {
                break;
            }
        }
        best = best.min(sup);
    }
    Ok(best)
}

/// Grid for `ck_distance` fine enough to resolve every bump of either table.
pub fn resolving_grid(a: &Table, b: &Table) -> usize {
    let finest = a
        .finest_feature()
        .into_iter()
        .chain(b.finest_feature())
        .fold(f64::INFINITY, f64::min);
    if finest.is_finite() {
        ((24.0 / finest).ceil() as usize).clamp(512, 1 << 16)
    } else {
        512
    }
}
