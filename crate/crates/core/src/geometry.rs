//! Concrete convex domains `Ω = {ρ < 0}` in C² with `ρ = P(z₁) + r(z)`.
//!
//! * `P = F(|z₁|²)` (Modulus shape) or `F(x₁²) + G(y₁²)` (RealPart shape),
//!   where `G(s) = ((s - 1/4)₊ / (1/4))³` vanishes for `|y₁| ≤ 1/2` and only
//!   serves to close the domain off in the `y₁` direction.
//! * `r = |z₂ - 1|² - 1` (Ball) or `r = Re z₂` (HalfSpace, local use only).
//!
//! `F` is the continued profile of [`TypeProfile::f`], so `ρ` is convex on
//! all of C².

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiles::TypeProfile;

pub type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub z1: C64,
    pub z2: C64,
}

impl ComplexPoint {
    pub fn new(z1: C64, z2: C64) -> Self {
        Self { z1, z2 }
    }

    pub fn from_reals(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self::new(C64::new(x1, y1), C64::new(x2, y2))
    }

    pub fn is_finite(&self) -> bool {
        self.z1.is_finite() && self.z2.is_finite()
    }

    pub fn dist(&self, o: &ComplexPoint) -> f64 {
        ((self.z1 - o.z1).norm_sqr() + (self.z2 - o.z2).norm_sqr()).sqrt()
    }

    pub fn add(&self, v: [C64; 2], t: f64) -> ComplexPoint {
        ComplexPoint::new(self.z1 + v[0] * t, self.z2 + v[1] * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Modulus,
    RealPart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RModel {
    Ball,
    HalfSpace,
}

fn default_epsilon() -> f64 {
    0.25
}
fn default_delta() -> f64 {
    0.5
}
fn default_r_model() -> RModel {
    RModel::Ball
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub shape: Shape,
    pub profile: TypeProfile,
    #[serde(default = "default_r_model")]
    pub r_model: RModel,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

/// Complex Hessian entries `ρ_{j k̄}` (the mixed entry vanishes for both
/// shapes and both `r` models).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Levi {
    pub r11: f64,
    pub r22: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub x1: f64,
    pub y1: f64,
    pub theta: f64,
    pub point: ComplexPoint,
    pub surface_density: f64,
}

/// Cap on the imaginary direction of the RealPart shape: zero for
/// `s ≤ 1/4`, smooth and convex, growing like `s` beyond.
fn cap(s: f64) -> f64 {
    let x = s - 0.25;
    if x <= 0.0 {
        return 0.0;
    }
    x * (-1.0 / x).exp()
}
fn dcap(s: f64) -> f64 {
    let x = s - 0.25;
    if x <= 0.0 {
        return 0.0;
    }
    (-1.0 / x).exp() * (1.0 + 1.0 / x)
}
fn d2cap(s: f64) -> f64 {
    let x = s - 0.25;
    if x <= 0.0 {
        return 0.0;
    }
    (-1.0 / x).exp() / (x * x * x)
}

/// `y` with `cap(y²) = 1`.
fn cap_extent() -> f64 {
    let (mut lo, mut hi) = (0.25, 8.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if cap(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.sqrt()
}

impl DomainSpec {
    pub fn new(shape: Shape, profile: TypeProfile) -> Self {
        Self {
            shape,
            profile,
            r_model: RModel::Ball,
            epsilon: default_epsilon(),
            delta: default_delta(),
        }
    }

    pub fn with_r_model(mut self, r: RModel) -> Self {
        self.r_model = r;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let shape = match self.shape {
            Shape::Modulus => "modulus",
            Shape::RealPart => "real_part",
        };
        format!("{shape}/{}", self.profile.label())
    }

    /// `P(z₁)`.
    pub fn p(&self, z1: C64) -> f64 {
        match self.shape {
            Shape::Modulus => self.profile.f(z1.norm_sqr()),
            Shape::RealPart => self.profile.f(z1.re * z1.re) + cap(z1.im * z1.im),
        }
    }

    /// `∂P/∂z₁`.
    pub fn dp(&self, z1: C64) -> C64 {
        match self.shape {
            Shape::Modulus => z1.conj() * self.profile.df(z1.norm_sqr()),
            Shape::RealPart => C64::new(
                z1.re * self.profile.df(z1.re * z1.re),
                -z1.im * dcap(z1.im * z1.im),
            ),
        }
    }

    /// Real gradient `(∂P/∂x₁, ∂P/∂y₁)`.
    pub fn p_real_grad(&self, z1: C64) -> (f64, f64) {
        let d = self.dp(z1);
        (2.0 * d.re, -2.0 * d.im)
    }

    /// `∂²P/∂z₁∂z̄₁`.
    pub fn p_levi(&self, z1: C64) -> f64 {
        match self.shape {
            Shape::Modulus => {
                let u = z1.norm_sqr();
                self.profile.df(u) + self.profile.d2f(u) * u
            }
            Shape::RealPart => {
                let (x2, y2) = (z1.re * z1.re, z1.im * z1.im);
                0.5 * self.profile.df(x2)
                    + x2 * self.profile.d2f(x2)
                    + 0.5 * dcap(y2)
                    + y2 * d2cap(y2)
            }
        }
    }

    pub fn r(&self, z: &ComplexPoint) -> f64 {
        match self.r_model {
            RModel::Ball => (z.z2 - 1.0).norm_sqr() - 1.0,
            RModel::HalfSpace => z.z2.re,
        }
    }

    pub fn dr2(&self, z: &ComplexPoint) -> C64 {
        match self.r_model {
            RModel::Ball => z.z2.conj() - 1.0,
            RModel::HalfSpace => C64::new(0.5, 0.0),
        }
    }

    fn require_ball(&self, what: &str) -> Result<()> {
        match self.r_model {
            RModel::Ball => Ok(()),
            RModel::HalfSpace => Err(Error::Unsupported(format!(
                "{what} needs the bounded Ball model"
            ))),
        }
    }

    /// Bounding box of `{P(z₁) < 1}` as `(x_max, y_max)`.
    pub fn z1_extent(&self) -> (f64, f64) {
        let u = self.profile.fstar(1.0).expect("continued inverse is total");
        let x = u.sqrt();
        match self.shape {
            Shape::Modulus => (x, x),
            Shape::RealPart => (x, cap_extent()),
        }
    }
}

pub fn rho(spec: &DomainSpec, z: &ComplexPoint) -> f64 {
    spec.p(z.z1) + spec.r(z)
}

/// Wirtinger gradient `(∂ρ/∂z₁, ∂ρ/∂z₂)`.
pub fn grad_rho(spec: &DomainSpec, z: &ComplexPoint) -> (C64, C64) {
    (spec.dp(z.z1), spec.dr2(z))
}

pub fn levi_terms(spec: &DomainSpec, z: &ComplexPoint) -> Levi {
    Levi {
        r11: spec.p_levi(z.z1),
        r22: match spec.r_model {
            RModel::Ball => 1.0,
            RModel::HalfSpace => 0.0,
        },
    }
}

/// Euclidean norm of the real gradient of `ρ` in R⁴.
pub fn real_grad_norm(spec: &DomainSpec, z: &ComplexPoint) -> f64 {
    let (a, b) = grad_rho(spec, z);
    2.0 * (a.norm_sqr() + b.norm_sqr()).sqrt()
}

pub fn distance_proxy(spec: &DomainSpec, z: &ComplexPoint) -> Result<f64> {
    let g = real_grad_norm(spec, z);
    if g < 1e-14 {
        return Err(Error::DegenerateGradient);
    }
    Ok(rho(spec, z).abs() / g)
}

pub fn boundary_chart(spec: &DomainSpec, x1: f64, y1: f64, theta: f64) -> Result<BoundaryPoint> {
    spec.require_ball("boundary chart")?;
    let z1 = C64::new(x1, y1);
    let p = spec.p(z1);
    if !(p < 1.0) {
        return Err(Error::Chart(format!("P(z1) = {p} >= 1 at ({x1}, {y1})")));
    }
    let r = (1.0 - p).sqrt();
    let point = ComplexPoint::new(z1, C64::new(1.0 + r * theta.cos(), r * theta.sin()));
    let surface_density = gram_density(spec, x1, y1, theta);
    Ok(BoundaryPoint {
        x1,
        y1,
        theta,
        point,
        surface_density,
    })
}

/// Chart Jacobian `∂X/∂(x₁, y₁, θ)` as three vectors in R⁴.
pub fn chart_jacobian(spec: &DomainSpec, x1: f64, y1: f64, theta: f64) -> [[f64; 4]; 3] {
    let z1 = C64::new(x1, y1);
    let r = (1.0 - spec.p(z1)).sqrt();
    let (px, py) = spec.p_real_grad(z1);
    let (rx, ry) = (-px / (2.0 * r), -py / (2.0 * r));
    let (c, s) = (theta.cos(), theta.sin());
    [
        [1.0, 0.0, rx * c, rx * s],
        [0.0, 1.0, ry * c, ry * s],
        [0.0, 0.0, -r * s, r * c],
    ]
}

fn gram_density(spec: &DomainSpec, x1: f64, y1: f64, theta: f64) -> f64 {
    let j = chart_jacobian(spec, x1, y1, theta);
    let mut g = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            g[a][b] = (0..4).map(|k| j[a][k] * j[b][k]).sum();
        }
    }
    let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
        - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
        + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
    det.max(0.0).sqrt()
}

/// Exit parameter `T > 0` with `ρ(z + T v) = 0` for interior `z`.
pub fn ray_exit(spec: &DomainSpec, z: &ComplexPoint, v: [C64; 2]) -> Result<f64> {
    spec.require_ball("ray exit")?;
    let f = |t: f64| rho(spec, &z.add(v, t));
    if f(0.0) >= 0.0 {
        return Err(Error::Region("ray origin is not interior".into()));
    }
    let mut hi = 0.5;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Region("ray does not leave the domain".into()));
        }
    }
    let mut lo = 0.0;
    let mut t = 0.5 * hi;
    for _ in 0..200 {
        let q = z.add(v, t);
        let val = rho(spec, &q);
        if val.abs() <= 4.0 * f64::EPSILON {
            return Ok(t);
        }
        if val < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 1e-15 * hi {
            return Ok(t);
        }
        let (a, b) = grad_rho(spec, &q);
        let slope = 2.0 * (a * v[0] + b * v[1]).re;
        let newton = t - val / slope;
        t = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(t)
}

fn interior_box(spec: &DomainSpec) -> ([f64; 4], [f64; 4]) {
    match spec.r_model {
        RModel::Ball => {
            let (x, y) = spec.z1_extent();
            ([-x, -y, 0.0, -1.0], [x, y, 2.0, 1.0])
        }
        RModel::HalfSpace => {
            let d = spec.delta;
            ([-d, -d, -d, -d], [d, d, 0.0, d])
        }
    }
}

/// Deterministic rejection sample of interior points (`ρ < 0`; for the
/// HalfSpace model, inside the box of half-width `δ` at the origin).
pub fn sample_interior(spec: &DomainSpec, count: usize, seed: u64) -> Vec<ComplexPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = interior_box(spec);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: [f64; 4] = std::array::from_fn(|k| rng.random_range(lo[k]..hi[k]));
        let z = ComplexPoint::from_reals(v[0], v[1], v[2], v[3]);
        if rho(spec, &z) < 0.0 {
            out.push(z);
        }
    }
    out
}

/// Deterministic sample of boundary points through the chart.
pub fn sample_boundary(spec: &DomainSpec, count: usize, seed: u64) -> Result<Vec<BoundaryPoint>> {
    spec.require_ball("boundary sampling")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (x, y) = spec.z1_extent();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x1 = rng.random_range(-x..x);
        let y1 = rng.random_range(-y..y);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        if spec.p(C64::new(x1, y1)) < 1.0 {
            out.push(boundary_chart(spec, x1, y1, theta)?);
        }
    }
    Ok(out)
}

/// CSV with columns `x1,y1,theta,re_z2,im_z2,density`.
pub fn boundary_csv(points: &[BoundaryPoint]) -> String {
    let mut s = String::from("x1,y1,theta,re_z2,im_z2,density\n");
    for b in points {
        let _ = writeln!(
            s,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            b.x1, b.y1, b.theta, b.point.z2.re, b.point.z2.im, b.surface_density
        );
    }
    s
}
