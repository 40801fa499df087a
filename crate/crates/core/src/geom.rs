//! Planar vectors and truncated Taylor jets.
//!
//! [`Jet`] carries the Taylor coefficients of a scalar function up to a fixed
//! order, so products, quotients, square roots and exponentials of jets give
//! exact derivatives without finite differences.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `theta` from the positive x axis.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2 { x: c, y: s }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        self / self.norm()
    }

    /// Counterclockwise rotation by a right angle.
    pub fn perp(self) -> Vec2 {
        Vec2 {
            x: -self.y,
            y: self.x,
        }
    }

    pub fn rotate(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
        }
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, k: f64) -> Vec2 {
        Vec2::new(self.x / k, self.y / k)
    }
}

/// Signed angle in `(-pi, pi]` rotating `a` onto `b`.
pub fn signed_angle(a: Vec2, b: Vec2) -> f64 {
    a.cross(b).atan2(a.dot(b))
}

/// Reduce a curve parameter to `[0, 1)`.
pub fn wrap01(s: f64) -> f64 {
    let r = s.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed parameter difference `a - b` reduced to `[-0.5, 0.5)`.
pub fn param_delta(a: f64, b: f64) -> f64 {
    let d = wrap01(a - b);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Distance between two points of the parameter circle `R/Z`.
pub fn param_dist(a: f64, b: f64) -> f64 {
    param_delta(a, b).abs()
}

/// Distance from `p` to the closed segment `[a, b]`.
pub fn point_segment_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.norm_sq();
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// Distance from `p` to the infinite line through `a` and `b`.
pub fn point_line_dist(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    (p - a).cross(d).abs() / d.norm()
}

/// Truncated Taylor series `c[0] + c[1] h + ... + c[N-1] h^(N-1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<const N: usize> {
    pub c: [f64; N],
}

impl<const N: usize> Jet<N> {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        Jet { c }
    }

    /// The identity jet `v + h` scaled by `slope`.
    pub fn variable(v: f64, slope: f64) -> Self {
        let mut c = [0.0; N];
        c[0] = v;
        if N > 1 {
            c[1] = slope;
        }
        Jet { c }
    }

    /// Build a jet from derivative values `f, f', f'', ...`.
    pub fn from_derivatives(d: &[f64]) -> Self {
        let mut c = [0.0; N];
        let mut fact = 1.0;
        for k in 0..N.min(d.len()) {
            if k > 0 {
                fact *= k as f64;
            }
            c[k] = d[k] / fact;
        }
        Jet { c }
    }

    /// The `k`-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        let mut fact = 1.0;
        for j in 2..=k {
            fact *= j as f64;
        }
        self.c[k] * fact
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn scale(mut self, k: f64) -> Self {
        for v in &mut self.c {
            *v *= k;
        }
        self
    }

    pub fn recip(&self) -> Self {
        let mut r = [0.0; N];
        r[0] = 1.0 / self.c[0];
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.c[j] * r[k - j];
            }
            r[k] = -acc * r[0];
        }
        Jet { c: r }
    }

    pub fn sqrt(&self) -> Self {
        let mut r = [0.0; N];
        r[0] = self.c[0].sqrt();
        for k in 1..N {
            let mut acc = self.c[k];
            for j in 1..k {
                acc -= r[j] * r[k - j];
            }
            r[k] = acc / (2.0 * r[0]);
        }
        Jet { c: r }
    }

    pub fn exp(&self) -> Self {
        let mut r = [0.0; N];
        r[0] = self.c[0].exp();
        for k in 1..N {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * r[k - j];
            }
            r[k] = acc / k as f64;
        }
        Jet { c: r }
    }
}

impl<const N: usize> Add for Jet<N> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        for k in 0..N {
            self.c[k] += o.c[k];
        }
        self
    }
}

impl<const N: usize> Sub for Jet<N> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        for k in 0..N {
            self.c[k] -= o.c[k];
        }
        self
    }
}

impl<const N: usize> Neg for Jet<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl<const N: usize> Mul for Jet<N> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = [0.0; N];
        for i in 0..N {
            if self.c[i] == 0.0 {
                continue;
            }
            for j in 0..N - i {
                r[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c: r }
    }
}

impl<const N: usize> Mul<f64> for Jet<N> {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        self.scale(k)
    }
}

/// A planar curve jet: Taylor coefficients of both coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VecJet<const N: usize> {
    pub x: Jet<N>,
    pub y: Jet<N>,
}

impl<const N: usize> VecJet<N> {
    pub fn from_derivatives(d: &[Vec2]) -> Self {
        let xs: Vec<f64> = d.iter().map(|v| v.x).collect();
        let ys: Vec<f64> = d.iter().map(|v| v.y).collect();
        VecJet {
            x: Jet::from_derivatives(&xs),
            y: Jet::from_derivatives(&ys),
        }
    }

    pub fn derivative(&self, k: usize) -> Vec2 {
        Vec2::new(self.x.derivative(k), self.y.derivative(k))
    }

    pub fn scale_by(&self, k: Jet<N>) -> Self {
        VecJet {
            x: self.x * k,
            y: self.y * k,
        }
    }

    pub fn dot(&self, o: &Self) -> Jet<N> {
        self.x * o.x + self.y * o.y
    }
}

impl<const N: usize> Add for VecJet<N> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        VecJet {
            x: self.x + o.x,
            y: self.y + o.y,
        }
    }
}
