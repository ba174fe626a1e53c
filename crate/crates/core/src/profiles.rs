//! Type functions `F`, their inverses `F*`, and the moduli `f` built from them.
//!
//! `F` is a function of `u = t²` (so the power profile is `F(u) = u^m`).
//! Closed forms are valid on `[0, t_max]`; beyond `t_max` every kind except
//! `Power` is continued by a convex cubic that keeps `F` of class C² and
//! `F(u)/u` increasing. The continuation is what the domain geometry uses;
//! [`eval_F`] and [`eval_Fstar`] stay strict and reject arguments outside
//! the validity range.
//!
//! Moduli are evaluated in log space. With `λ = -ln d` and `μ = ln λ`,
//! write `w(λ) = -ln √F*(e^{-λ})`; then
//!
//! * CaseI:   `1/f = ∫_Λ^∞ e^{-w} dλ`
//! * CaseII:  `1/f = ∫_Λ^∞ w e^{-w} dλ`
//! * Neumann: `f = e^{w(Λ)}`
//!
//! which stays finite for separations like `d = e^{-10^7}` that no float
//! can hold. [`ModulusSpec`] therefore records its range in `μ`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, escalating_shells, GkOptions, ShellOptions, ShellStage};

/// A user-supplied `u ↦ F(u)` on `[0, t_max]`.
#[derive(Clone)]
pub struct CustomFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn(..)")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileKind {
    /// `F(u) = u^m`, `m ≥ 1`.
    Power { m: f64 },
    /// `F(u) = scale · exp(-u^{-α/2})`.
    Exp {
        alpha: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// `F(t²) = exp(-1/(t |ln t|^α))`, `α > 1`.
    #[serde(rename = "logexp")]
    LogExp { alpha: f64 },
    #[serde(skip)]
    Custom(CustomFn),
}

fn unit_scale() -> f64 {
    1.0
}

/// Cubic continuation `F0 + F1 s + F2 s²/2 + c3 s³` at `s = u - t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Extension {
    f0: f64,
    f1: f64,
    f2: f64,
    c3: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ProfileConfig")]
pub struct TypeProfile {
    #[serde(flatten)]
    kind: ProfileKind,
    t_max: f64,
    #[serde(skip)]
    ext: Option<Extension>,
}

/// Text form of a profile: the kind with its parameters and an optional
/// `t_max` (defaulting to the largest interval on which `F` is convex).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileConfig {
    #[serde(flatten)]
    pub kind: ProfileKind,
    #[serde(default)]
    pub t_max: Option<f64>,
}

impl TryFrom<ProfileConfig> for TypeProfile {
    type Error = Error;
    fn try_from(c: ProfileConfig) -> Result<Self> {
        TypeProfile::new(c.kind, c.t_max)
    }
}

impl TypeProfile {
    pub fn new(kind: ProfileKind, t_max: Option<f64>) -> Result<Self> {
        let limit = match &kind {
            ProfileKind::Power { m } => {
                if !(m.is_finite() && *m >= 1.0) {
                    return Err(Error::InvalidProfile(format!(
                        "power exponent must be >= 1 for convexity, got {m}"
                    )));
                }
                f64::INFINITY
            }
            ProfileKind::Exp { alpha, scale } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::InvalidProfile(format!(
                        "exp profile needs alpha > 0, got {alpha}"
                    )));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::InvalidProfile(format!(
                        "exp profile needs scale > 0, got {scale}"
                    )));
                }
                let a = alpha / 2.0;
                (a / (a + 1.0)).powf(1.0 / a)
            }
            ProfileKind::LogExp { alpha } => {
                if !(alpha.is_finite() && *alpha > 1.0) {
                    return Err(Error::InvalidProfile(format!(
                        "logexp profile needs alpha > 1, got {alpha}"
                    )));
                }
                logexp_limit(*alpha)
            }
            ProfileKind::Custom(_) => match t_max {
                Some(t) => t,
                None => {
                    return Err(Error::InvalidProfile(
                        "custom profile needs an explicit t_max".into(),
                    ))
                }
            },
        };
        // Stay a hair inside the limit so F'' is not rounded negative there.
        let default = if limit.is_finite() {
            limit * (1.0 - 1e-9)
        } else {
            1.0
        };
        let t_max = t_max.unwrap_or(default);
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidProfile(format!(
                "t_max must be positive, got {t_max}"
            )));
        }
        if t_max > limit * (1.0 + 1e-9) {
            return Err(Error::InvalidProfile(format!(
                "t_max = {t_max} exceeds the convexity limit {limit}"
            )));
        }
        let mut p = TypeProfile {
            kind,
            t_max,
            ext: None,
        };
        if let ProfileKind::Custom(_) = p.kind {
            p.validate()?;
        }
        if !matches!(p.kind, ProfileKind::Power { .. }) {
            let u = p.t_max;
            let f0 = p.core_f(u);
            let f1 = p.core_df(u);
            let f2 = p.core_d2f(u).max(0.0);
            p.ext = Some(Extension {
                f0,
                f1,
                f2,
                c3: (f1 + f2) / 6.0,
            });
        }
        Ok(p)
    }

    pub fn power(m: f64) -> Result<Self> {
        Self::new(ProfileKind::Power { m }, None)
    }

    pub fn exp(alpha: f64, scale: f64) -> Result<Self> {
        Self::new(ProfileKind::Exp { alpha, scale }, None)
    }

    pub fn log_exp(alpha: f64) -> Result<Self> {
        Self::new(ProfileKind::LogExp { alpha }, None)
    }

    pub fn custom<F>(f: F, t_max: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(ProfileKind::Custom(CustomFn(Arc::new(f))), Some(t_max))
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// `F(t_max)`, the largest admissible argument of [`eval_Fstar`].
    pub fn f_at_t_max(&self) -> f64 {
        self.core_f(self.t_max)
    }

    /// Short human-readable label, e.g. `exp(alpha=0.5, scale=2)`.
    pub fn label(&self) -> String {
        match &self.kind {
            ProfileKind::Power { m } => format!("power(m={m})"),
            ProfileKind::Exp { alpha, scale } => format!("exp(alpha={alpha}, scale={scale})"),
            ProfileKind::LogExp { alpha } => format!("logexp(alpha={alpha})"),
            ProfileKind::Custom(_) => "custom".into(),
        }
    }

    /// Sampled check of the structural hypotheses on `F` over `(0, t_max]`.
    pub fn validate(&self) -> Result<()> {
        let f0 = self.core_f(0.0);
        if f0.abs() > 1e-12 {
            return Err(Error::InvalidProfile(format!("F(0) = {f0}, expected 0")));
        }
        let n = 200;
        let grid: Vec<f64> = (0..=n)
            .map(|i| self.t_max * (i as f64 / n as f64).powi(2))
            .filter(|&u| u > 0.0)
            .collect();
        let vals: Vec<f64> = grid.iter().map(|&u| self.core_f(u)).collect();
        for k in 1..grid.len() {
            let (u1, u2) = (grid[k - 1], grid[k]);
            let (f1, f2) = (vals[k - 1], vals[k]);
            if !(f1.is_finite() && f2.is_finite()) {
                return Err(Error::InvalidProfile(format!("F not finite near u = {u2}")));
            }
            if f1 > 0.0 && f2 <= f1 {
                return Err(Error::InvalidProfile(format!(
                    "F not strictly increasing on [{u1}, {u2}]"
                )));
            }
            if f1 / u1 > f2 / u2 + 1e-12 {
                return Err(Error::InvalidProfile(format!(
                    "F(u)/u decreasing on [{u1}, {u2}]"
                )));
            }
            let mid = self.core_f(0.5 * (u1 + u2));
            if mid > 0.5 * (f1 + f2) + 1e-12 {
                return Err(Error::InvalidProfile(format!(
                    "F not convex on [{u1}, {u2}]"
                )));
            }
        }
        Ok(())
    }

    // ----- closed forms on [0, t_max] -----

    fn core_f(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return match &self.kind {
                ProfileKind::Custom(c) => (c.0)(0.0),
                _ => 0.0,
            };
        }
        match &self.kind {
            ProfileKind::Power { m } => u.powf(*m),
            ProfileKind::Custom(c) => (c.0)(u),
            _ => self.core_ln_f(u).exp(),
        }
    }

    fn core_ln_f(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        match &self.kind {
            ProfileKind::Power { m } => m * u.ln(),
            ProfileKind::Exp { alpha, scale } => scale.ln() - u.powf(-alpha / 2.0),
            ProfileKind::LogExp { alpha } => {
                let l = -0.5 * u.ln();
                -1.0 / (u.sqrt() * l.powf(*alpha))
            }
            ProfileKind::Custom(c) => (c.0)(u).ln(),
        }
    }

    fn core_df(&self, u: f64) -> f64 {
        match &self.kind {
            ProfileKind::Power { m } => {
                if u <= 0.0 {
                    if *m == 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    m * u.powf(m - 1.0)
                }
            }
            ProfileKind::Exp { alpha, .. } => {
                if u <= 0.0 {
                    return 0.0;
                }
                let a = alpha / 2.0;
                let f = self.core_f(u);
                if f == 0.0 {
                    0.0
                } else {
                    f * a * u.powf(-a - 1.0)
                }
            }
            ProfileKind::LogExp { alpha } => {
                if u <= 0.0 {
                    return 0.0;
                }
                let f = self.core_f(u);
                if f == 0.0 {
                    return 0.0;
                }
                let l = -0.5 * u.ln();
                let h = l.powf(-alpha) - alpha * l.powf(-alpha - 1.0);
                f * 0.5 * u.powf(-1.5) * h
            }
            ProfileKind::Custom(c) => {
                let h = (1e-6 * u).max(1e-8);
                custom_first_derivative(c.0.as_ref(), u, h, self.t_max)
            }
        }
    }

    fn core_d2f(&self, u: f64) -> f64 {
        match &self.kind {
            ProfileKind::Power { m } => {
                if u <= 0.0 {
                    if *m == 2.0 {
                        2.0
                    } else if *m < 2.0 && *m > 1.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    m * (m - 1.0) * u.powf(m - 2.0)
                }
            }
            ProfileKind::Exp { alpha, .. } => {
                if u <= 0.0 {
                    return 0.0;
                }
                let a = alpha / 2.0;
                let f = self.core_f(u);
                if f == 0.0 {
                    return 0.0;
                }
                let g1 = -a * u.powf(-a - 1.0);
                let g2 = a * (a + 1.0) * u.powf(-a - 2.0);
                f * (g1 * g1 - g2)
            }
            ProfileKind::LogExp { alpha } => {
                if u <= 0.0 {
                    return 0.0;
                }
                let f = self.core_f(u);
                if f == 0.0 {
                    return 0.0;
                }
                let (g1, g2) = logexp_g_derivatives(*alpha, u);
                f * (g1 * g1 - g2)
            }
            ProfileKind::Custom(c) => {
                let h = 1e-3 * u.max(1e-3 * self.t_max);
                custom_second_derivative(c.0.as_ref(), u, h, self.t_max)
            }
        }
    }

    // ----- continued F on [0, ∞) -----

    /// `F(u)` for any `u ≥ 0`, continued convexly beyond `t_max`.
    pub fn f(&self, u: f64) -> f64 {
        match self.ext {
            Some(e) if u > self.t_max => {
                let s = u - self.t_max;
                e.f0 + s * (e.f1 + s * (0.5 * e.f2 + s * e.c3))
            }
            _ => self.core_f(u),
        }
    }

    /// `ln F(u)`, accurate where `F` itself underflows.
    pub fn ln_f(&self, u: f64) -> f64 {
        match self.ext {
            Some(_) if u > self.t_max => self.f(u).ln(),
            _ => self.core_ln_f(u),
        }
    }

    /// `F'(u)` of the continued profile.
    pub fn df(&self, u: f64) -> f64 {
        match self.ext {
            Some(e) if u > self.t_max => {
                let s = u - self.t_max;
                e.f1 + s * (e.f2 + 3.0 * e.c3 * s)
            }
            _ => self.core_df(u),
        }
    }

    /// `F''(u)` of the continued profile.
    pub fn d2f(&self, u: f64) -> f64 {
        match self.ext {
            Some(e) if u > self.t_max => e.f2 + 6.0 * e.c3 * (u - self.t_max),
            _ => self.core_d2f(u),
        }
    }

    /// Inverse of the continued profile, defined for every `ρ ≥ 0`.
    pub fn fstar(&self, rho: f64) -> Result<f64> {
        if rho <= 0.0 {
            return Ok(0.0);
        }
        match (&self.kind, self.ext) {
            (ProfileKind::Power { m }, _) => Ok(rho.powf(1.0 / m)),
            (_, Some(e)) if rho > e.f0 => Ok(self.t_max + self.ext_inverse(e, rho)),
            _ => self.core_fstar(rho),
        }
    }

    fn ext_inverse(&self, e: Extension, rho: f64) -> f64 {
        let target = rho - e.f0;
        let poly = |s: f64| s * (e.f1 + s * (0.5 * e.f2 + s * e.c3));
        let mut hi = 1.0f64.max(self.t_max);
        while poly(hi) < target {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if poly(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn core_fstar(&self, rho: f64) -> Result<f64> {
        match &self.kind {
            ProfileKind::Power { m } => Ok(rho.powf(1.0 / m)),
            ProfileKind::Exp { alpha, scale } => {
                let a = alpha / 2.0;
                Ok((scale.ln() - rho.ln()).powf(-1.0 / a))
            }
            ProfileKind::LogExp { alpha } => {
                let s = logexp_solve(*alpha, (-rho.ln()).ln());
                Ok((-2.0 * s).exp())
            }
            ProfileKind::Custom(_) => self.bisect_inverse(rho),
        }
    }

    /// Bisection for `F(u) = ρ` on `[0, t_max]`, comparing logarithms.
    fn bisect_inverse(&self, rho: f64) -> Result<f64> {
        // Bisect in ln u so tiny arguments cost no more than large ones.
        let target = rho.ln();
        let (mut lo, mut hi) = (f64::MIN_POSITIVE.ln(), self.t_max.ln());
        if self.core_ln_f(lo.exp()) >= target {
            return Ok(lo.exp());
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.core_ln_f(mid.exp()) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * lo.abs().max(1.0) {
                return Ok((0.5 * (lo + hi)).exp());
            }
        }
        Err(Error::Convergence("bisection for F* did not converge"))
    }

    /// `λ₀ = -ln F(t_max)`: closed forms of `w` hold for `λ ≥ λ₀`.
    fn lambda_closed(&self) -> f64 {
        match self.ext {
            Some(_) => -self.core_ln_f(self.t_max),
            None => f64::NEG_INFINITY,
        }
    }

    /// `w(λ) = -ln √F*(e^{-λ})`.
    pub fn neg_ln_sqrt_fstar(&self, lambda: f64) -> f64 {
        match &self.kind {
            ProfileKind::Power { m } => lambda / (2.0 * m),
            ProfileKind::Exp { alpha, scale } if lambda >= self.lambda_closed() => {
                (lambda + scale.ln()).ln() / alpha
            }
            ProfileKind::LogExp { alpha } if lambda >= self.lambda_closed() => {
                logexp_solve(*alpha, lambda.ln())
            }
            _ => {
                let u = self
                    .fstar((-lambda).exp())
                    .expect("continued inverse is total");
                -0.5 * u.ln()
            }
        }
    }

    /// `w` as a function of `μ = ln λ`, usable for `μ` far beyond 709.
    pub fn neg_ln_sqrt_fstar_mu(&self, mu: f64) -> f64 {
        match &self.kind {
            ProfileKind::Exp { alpha, scale } if mu.exp() >= self.lambda_closed() => {
                (mu + (scale.ln() * (-mu).exp()).ln_1p()) / alpha
            }
            ProfileKind::LogExp { alpha } if mu.exp() >= self.lambda_closed() => {
                logexp_solve(*alpha, mu)
            }
            _ => self.neg_ln_sqrt_fstar(mu.exp()),
        }
    }

    /// `w(e^{μ+Δ}) − w(e^μ) − Δ`, the growth of `w` in excess of `μ`,
    /// computed without cancelling numbers of size `μ` or `Δ`.
    pub fn neg_ln_sqrt_fstar_mu_excess(&self, mu: f64, dm: f64) -> f64 {
        let closed = |m: f64| m.exp() >= self.lambda_closed();
        match &self.kind {
            ProfileKind::Power { m } => mu.exp() * dm.exp_m1() / (2.0 * m) - dm,
            ProfileKind::Exp { alpha, scale } if closed(mu) && closed(mu + dm) => {
                let c = scale.ln();
                let tail = (c * (-mu - dm).exp()).ln_1p() - (c * (-mu).exp()).ln_1p();
                dm * (1.0 / alpha - 1.0) + tail / alpha
            }
            ProfileKind::LogExp { alpha } if closed(mu) && closed(mu + dm) => {
                let s0 = logexp_solve(*alpha, mu);
                let s1 = logexp_solve(*alpha, mu + dm);
                alpha * (s1 / s0).ln()
            }
            _ => self.neg_ln_sqrt_fstar_mu(mu + dm) - self.neg_ln_sqrt_fstar_mu(mu) - dm,
        }
    }

    /// `ln(-ln F(t²))` at `t = e^{-λ}`, for the integrands near `t = 0`.
    pub fn ln_neg_ln_f_sq(&self, lambda: f64) -> f64 {
        match &self.kind {
            ProfileKind::Power { m } => (2.0 * m * lambda).ln(),
            ProfileKind::Exp { alpha, scale } => {
                alpha * lambda + (-scale.ln() * (-alpha * lambda).exp()).ln_1p()
            }
            ProfileKind::LogExp { alpha } => lambda - alpha * lambda.ln(),
            ProfileKind::Custom(_) => (-self.ln_f((-2.0 * lambda).exp())).ln(),
        }
    }
}

fn logexp_g_derivatives(alpha: f64, u: f64) -> (f64, f64) {
    let l = -0.5 * u.ln();
    let la = l.powf(-alpha);
    let la1 = alpha * l.powf(-alpha - 1.0);
    let la2 = alpha * (alpha + 1.0) * l.powf(-alpha - 2.0);
    let h = la - la1;
    let g1 = -0.5 * u.powf(-1.5) * h;
    let g2 = 0.75 * u.powf(-2.5) * h - 0.25 * u.powf(-2.5) * (la1 - la2);
    (g1, g2)
}

/// Largest `u ≤ 0.01` up to which the log-exp profile is convex and
/// `F(u)/u` is increasing.
fn logexp_limit(alpha: f64) -> f64 {
    let convex = |u: f64| {
        let (g1, g2) = logexp_g_derivatives(alpha, u);
        g1 * g1 - g2 >= 0.0
    };
    let star = |u: f64| {
        let (g1, _) = logexp_g_derivatives(alpha, u);
        -g1 - 1.0 / u >= 0.0
    };
    let ok = |u: f64| convex(u) && star(u) && -0.5 * u.ln() > alpha;
    let cap = 0.01;
    if ok(cap) {
        return cap;
    }
    // Work in ln u: the sign change spans many decades.
    let (mut lo, mut hi) = (-150.0f64, cap.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid.exp()) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    lo.exp()
}

/// Solves `S - α ln S = μ` on the branch `S > α`.
fn logexp_solve(alpha: f64, mu: f64) -> f64 {
    let mut s = mu + alpha * mu.max(1.0).ln();
    if s <= alpha {
        s = alpha + 1.0;
    }
    for _ in 0..100 {
        let phi = s - alpha * s.ln() - mu;
        let dphi = 1.0 - alpha / s;
        let mut next = s - phi / dphi;
        if next <= alpha {
            next = 0.5 * (s + alpha);
        }
        let done = (next - s).abs() <= 1e-15 * s;
        s = next;
        if done {
            break;
        }
    }
    s
}

fn custom_first_derivative(f: &dyn Fn(f64) -> f64, u: f64, h: f64, t_max: f64) -> f64 {
    if u - h >= 0.0 && u + h <= t_max {
        (f(u + h) - f(u - h)) / (2.0 * h)
    } else if u - 2.0 * h >= 0.0 {
        (3.0 * f(u) - 4.0 * f(u - h) + f(u - 2.0 * h)) / (2.0 * h)
    } else {
        (-3.0 * f(u) + 4.0 * f(u + h) - f(u + 2.0 * h)) / (2.0 * h)
    }
}

fn custom_second_derivative(f: &dyn Fn(f64) -> f64, u: f64, h: f64, t_max: f64) -> f64 {
    if u - h >= 0.0 && u + h <= t_max {
        (f(u + h) - 2.0 * f(u) + f(u - h)) / (h * h)
    } else if u - 3.0 * h >= 0.0 {
        (2.0 * f(u) - 5.0 * f(u - h) + 4.0 * f(u - 2.0 * h) - f(u - 3.0 * h)) / (h * h)
    } else {
        (2.0 * f(u) - 5.0 * f(u + h) + 4.0 * f(u + 2.0 * h) - f(u + 3.0 * h)) / (h * h)
    }
}

/// `F(t)` on `[0, t_max]`.
#[allow(non_snake_case)]
pub fn eval_F(profile: &TypeProfile, t: f64) -> Result<f64> {
    if !(0.0..=profile.t_max).contains(&t) {
        return Err(Error::Domain {
            what: "F",
            value: t,
            lo: 0.0,
            hi: profile.t_max,
        });
    }
    Ok(profile.core_f(t))
}

/// `F*(ρ)` on `(0, F(t_max)]`.
#[allow(non_snake_case)]
pub fn eval_Fstar(profile: &TypeProfile, rho: f64) -> Result<f64> {
    let max = profile.f_at_t_max();
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::Domain {
            what: "F*",
            value: rho,
            lo: 0.0,
            hi: max,
        });
    }
    if rho > max * (1.0 + 1e-14) {
        return Err(Error::Range {
            what: "F*",
            value: rho,
            max,
        });
    }
    profile.core_fstar(rho.min(max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub t: f64,
    pub f: f64,
    pub back: f64,
    pub rel_err: f64,
}

/// `F*(F(t))` on `n` log-spaced points from the smallest `t` with `F(t)`
/// a normal float (or `t_max·1e−12`) up to `t_max`.
pub fn inverse_round_trip(profile: &TypeProfile, n: usize) -> Result<Vec<RoundTrip>> {
    let tm = profile.t_max;
    let lo = profile.fstar(1e-290)?.max(tm * 1e-12);
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let t = (lo * (tm / lo).powf(i as f64 / (n - 1) as f64)).min(tm);
            let f = eval_F(profile, t)?;
            let back = eval_Fstar(profile, f)?;
            Ok(RoundTrip {
                t,
                f,
                back,
                rel_err: (back - t).abs() / t,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Domains `{|z₂|... + F(|z₁|²) < 0}`: `∫₀^d √F*(t)/t dt`.
    CaseI,
    /// Domains built on `F(x₁²)`: extra factor `|ln √F*(t)|`.
    CaseII,
    /// `f(1/d) = 1/√F*(d)`.
    Neumann,
}

/// Range of separations on which a modulus is tabulated, as
/// `μ = ln(-ln d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusSpec {
    pub variant: Variant,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl ModulusSpec {
    pub fn from_d_range(variant: Variant, d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_min <= d_max && d_max < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < d_min <= d_max < 1, got [{d_min}, {d_max}]"
            )));
        }
        Ok(Self {
            variant,
            mu_min: d_to_mu(d_max),
            mu_max: d_to_mu(d_min),
        })
    }

    /// Range wide enough to separate the three growth models.
    pub fn default_for(profile: &TypeProfile, variant: Variant) -> Self {
        let (mu_min, mu_max) = match profile.kind {
            ProfileKind::Power { .. } => (10f64.ln(), 700f64.ln()),
            ProfileKind::Exp { .. } => (10f64.ln(), 1e12f64.ln()),
            ProfileKind::LogExp { .. } => (300.0, 1e7),
            ProfileKind::Custom(_) => (10f64.ln(), 300f64.ln()),
        };
        Self {
            variant,
            mu_min,
            mu_max,
        }
    }

    pub fn grid(&self, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![self.mu_min];
        }
        (0..n)
            .map(|i| self.mu_min + (self.mu_max - self.mu_min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

pub fn d_to_mu(d: f64) -> f64 {
    (-d.ln()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    pub value: f64,
    pub converged: bool,
    pub stage: ShellStage,
}

fn shell_options() -> ShellOptions {
    ShellOptions::default()
}

fn hypothesis_unchecked(
    profile: &TypeProfile,
    variant: Variant,
    delta: f64,
) -> HypothesisOutcome {
    let log_factor = matches!(variant, Variant::CaseII);
    let f_t = |t: f64| {
        let v = profile.ln_f(t * t).abs();
        if log_factor {
            v * t.ln().abs()
        } else {
            v
        }
    };
    let f_lam = |lam: f64| {
        let mut e = profile.ln_neg_ln_f_sq(lam) - lam;
        if log_factor {
            e += lam.ln();
        }
        e.exp()
    };
    let out = escalating_shells(&f_t, Some(&f_lam), delta, shell_options());
    HypothesisOutcome {
        value: out.value,
        converged: out.converged,
        stage: out.stage,
    }
}

/// `∫₀^δ |ln F(t²)| dt` (CaseI) or `∫₀^δ |ln t · ln F(t²)| dt` (CaseII).
pub fn hypothesis_integral(
    profile: &TypeProfile,
    variant: Variant,
    delta: f64,
) -> Result<HypothesisOutcome> {
    let hi = profile.t_max.sqrt();
    if !(delta > 0.0 && delta <= hi * (1.0 + 1e-8)) {
        return Err(Error::Domain {
            what: "hypothesis delta",
            value: delta,
            lo: 0.0,
            hi,
        });
    }
    if variant == Variant::Neumann {
        return Err(Error::Unsupported(
            "the Neumann modulus has no integrability hypothesis; use levi::classify_superlog"
                .into(),
        ));
    }
    Ok(hypothesis_unchecked(profile, variant, delta))
}

/// `ln f` at `μ = ln(-ln d)`.
pub fn ln_modulus(profile: &TypeProfile, variant: Variant, mu: f64) -> Result<f64> {
    if !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("mu must be finite, got {mu}")));
    }
    let w = |m: f64| profile.neg_ln_sqrt_fstar_mu(m);
    if variant == Variant::Neumann {
        return Ok(w(mu));
    }
    let log_h = |m: f64| {
        let wm = w(m);
        match variant {
            Variant::CaseI => m - wm,
            _ => m - wm + wm.ln(),
        }
    };
    if variant == Variant::CaseII && w(mu) <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "CaseII modulus needs F*(d) < 1 (mu = {mu})"
        )));
    }
    let w0 = w(mu);
    let h0 = log_h(mu);
    // Exponent relative to μ, formed from increments of w to avoid
    // cancelling two numbers of size μ.
    let rel = |dm: f64| {
        let excess = profile.neg_ln_sqrt_fstar_mu_excess(mu, dm);
        let mut e = -excess;
        if variant == Variant::CaseII {
            e += ((dm + excess) / w0).ln_1p();
        }
        e
    };
    let step = 1e-6 * mu.abs().max(1.0);
    let slope = (rel(step) - rel(-step)) / (2.0 * step);
    let scale = (1.0 / slope.abs()).clamp(1e-9, 1e9);
    let integrand = |y: f64| {
        let one = 1.0 - y;
        let v = rel(scale * y / one).exp() * scale / (one * one);
        if v.is_nan() {
            0.0
        } else {
            v
        }
    };
    let out = quad::adaptive_gk(
        integrand,
        0.0,
        1.0,
        GkOptions {
            abs_tol: 0.0,
            rel_tol: 1e-11,
            max_intervals: 2000,
        },
    );
    if !out.converged || !(out.value > 0.0) {
        return Err(Error::Divergence(format!(
            "modulus integral for {} does not converge at mu = {mu}",
            profile.label()
        )));
    }
    Ok(-(h0 + out.value.ln()))
}

/// `f(d⁻¹)` for `d` inside `spec`'s range.
pub fn eval_modulus(profile: &TypeProfile, spec: &ModulusSpec, d: f64) -> Result<f64> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::Domain {
            what: "modulus d",
            value: d,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mu = d_to_mu(d);
    let slack = 1e-12 * mu.abs().max(1.0);
    if mu < spec.mu_min - slack || mu > spec.mu_max + slack {
        return Err(Error::Domain {
            what: "modulus mu = ln(-ln d)",
            value: mu,
            lo: spec.mu_min,
            hi: spec.mu_max,
        });
    }
    Ok(ln_modulus(profile, spec.variant, mu)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusSample {
    pub mu: f64,
    pub ln_f: f64,
}

pub fn tabulate_modulus(
    profile: &TypeProfile,
    spec: &ModulusSpec,
    n: usize,
) -> Result<Vec<ModulusSample>> {
    spec.grid(n)
        .into_iter()
        .map(|mu| Ok(ModulusSample {
            mu,
            ln_f: ln_modulus(profile, spec.variant, mu)?,
        }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthModel {
    /// `f ~ (1/d)^e`
    PowerOfD,
    /// `f ~ (-ln d)^e`
    PowerOfLog,
    /// `f ~ (ln(-ln d))^e`
    PowerOfLogLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub model: GrowthModel,
    pub exponent: f64,
    /// RMS residual divided by the spread of `ln f`.
    pub residual: f64,
    /// Free exponent of the next iterated logarithm, when it can be fitted.
    pub secondary: Option<f64>,
}

const FIT_POINTS: usize = 24;
const FIT_THRESHOLD: f64 = 0.02;

fn regressor(model: GrowthModel, mu: f64) -> f64 {
    match model {
        GrowthModel::PowerOfD => mu.exp(),
        GrowthModel::PowerOfLog => mu,
        GrowthModel::PowerOfLogLog => mu.ln(),
    }
}

fn next_log(model: GrowthModel, mu: f64) -> Option<f64> {
    match model {
        GrowthModel::PowerOfD => Some(mu),
        GrowthModel::PowerOfLog => Some(mu.ln()),
        GrowthModel::PowerOfLogLog => None,
    }
}

fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    (slope, icpt, (rss / n).sqrt())
}

fn two_regressor_fit(x1: &[f64], x2: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = y.len() as f64;
    let m1 = x1.iter().sum::<f64>() / n;
    let m2 = x2.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..y.len() {
        let a = x1[i] - m1;
        let b = x2[i] - m2;
        let c = y[i] - my;
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * c;
        s2y += b * c;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return None;
    }
    Some(((s22 * s1y - s12 * s2y) / det, (s11 * s2y - s12 * s1y) / det))
}

/// Least-squares growth model of `f` over `spec`'s range.
pub fn asymptotic_exponent(profile: &TypeProfile, spec: &ModulusSpec) -> Result<AsymptoticFit> {
    let table = tabulate_modulus(profile, spec, FIT_POINTS)?;
    fit_growth(&table, spec.variant)
}

/// Fits the three growth models to a modulus table. For CaseII the
/// exponent of the next iterated logarithm is pinned at `-1`.
pub fn fit_growth(table: &[ModulusSample], variant: Variant) -> Result<AsymptoticFit> {
    if table.len() < 3 {
        return Err(Error::InvalidParameter("fit needs at least 3 samples".into()));
    }
    let y: Vec<f64> = table.iter().map(|s| s.ln_f).collect();
    let spread = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - y.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if spread > 0.0 { spread } else { 1.0 };
    let mut best: Option<AsymptoticFit> = None;
    for model in [
        GrowthModel::PowerOfD,
        GrowthModel::PowerOfLog,
        GrowthModel::PowerOfLogLog,
    ] {
        let x: Vec<f64> = table.iter().map(|s| regressor(model, s.mu)).collect();
        if x.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let nx: Option<Vec<f64>> = table.iter().map(|s| next_log(model, s.mu)).collect();
        let pinned = variant == Variant::CaseII && nx.is_some();
        let yy: Vec<f64> = match (&nx, pinned) {
            (Some(n), true) => y.iter().zip(n).map(|(a, b)| a + b.ln()).collect(),
            _ => y.clone(),
        };
        let (slope, _, rms) = linear_fit(&x, &yy);
        let secondary = nx.and_then(|n| {
            let ln_next: Vec<f64> = n.iter().map(|v| v.ln()).collect();
            if ln_next.iter().all(|v| v.is_finite()) {
                two_regressor_fit(&x, &ln_next, &y).map(|(_, c)| c)
            } else {
                None
            }
        });
        let fit = AsymptoticFit {
            model,
            exponent: slope,
            residual: rms / spread,
            secondary,
        };
        if best.is_none_or(|b| fit.residual < b.residual) {
            best = Some(fit);
        }
    }
    match best {
        Some(b) if b.residual <= FIT_THRESHOLD => Ok(b),
        Some(b) => Err(Error::Fit(b.residual)),
        None => Err(Error::Fit(f64::INFINITY)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// `∫₀^d √F*(t)/t dt`
    pub lhs: f64,
    /// `√F*(d) ln d − ∫₀^{√F*(d)} ln F(y²) dy`
    pub rhs: f64,
    pub rel_err: f64,
}

/// Integration-by-parts identity tying the CaseI modulus integral to the
/// integrability hypothesis.
pub fn modulus_identity(profile: &TypeProfile, d: f64) -> Result<IdentityCheck> {
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::Domain {
            what: "identity d",
            value: d,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let lhs = (-ln_modulus(profile, Variant::CaseI, d_to_mu(d))?).exp();
    let y0 = profile.fstar(d)?.sqrt();
    let h = hypothesis_unchecked(profile, Variant::CaseI, y0);
    if !h.converged {
        return Err(Error::Divergence(format!(
            "hypothesis integral diverges for {}",
            profile.label()
        )));
    }
    // ln F(y²) ≤ ln d < 0 on (0, y0], so the integral is -h.
    let rhs = y0 * d.ln() + h.value;
    Ok(IdentityCheck {
        lhs,
        rhs,
        rel_err: (lhs - rhs).abs() / lhs.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_limits() {
        let p = TypeProfile::exp(0.5, 2.0).unwrap();
        assert!((p.t_max() - (0.2f64).powi(4)).abs() < 1e-11);
        let p = TypeProfile::log_exp(3.0).unwrap();
        assert!(p.t_max() > 1e-8 && p.t_max() < 1e-6, "{}", p.t_max());
        p.validate().unwrap();
        assert!(TypeProfile::power(0.5).is_err());
        assert!(TypeProfile::new(ProfileKind::Exp { alpha: 0.5, scale: 1.0 }, Some(0.5)).is_err());
    }

    #[test]
    fn extension_is_c2_and_convex() {
        let p = TypeProfile::exp(0.5, 2.0).unwrap();
        let u0 = p.t_max();
        let eps = 1e-10;
        let jump = p.f(u0 + eps) - 2.0 * p.f(u0) + p.f(u0 - eps);
        assert!(jump.abs() < 1e-12, "{jump}");
        let djump = p.df(u0 + eps) - 2.0 * p.df(u0) + p.df(u0 - eps);
        assert!(djump.abs() < 1e-6 * p.df(u0), "{djump}");
        for k in 0..50 {
            let u = u0 * (1.0 + k as f64);
            assert!(p.d2f(u) >= 0.0);
            assert!(u * p.df(u) >= p.f(u) * (1.0 - 1e-12));
        }
        let r = p.f(3.0 * u0);
        assert!((p.fstar(r).unwrap() - 3.0 * u0).abs() < 1e-14);
    }

    #[test]
    fn w_agrees_with_direct_inverse() {
        for p in [
            TypeProfile::power(2.0).unwrap(),
            TypeProfile::exp(0.5, 2.0).unwrap(),
            TypeProfile::log_exp(3.0).unwrap(),
        ] {
            for lam in [5.0f64, 20.0, 100.0, 600.0] {
                let direct = -0.5 * p.fstar((-lam).exp()).unwrap().ln();
                let w = p.neg_ln_sqrt_fstar(lam);
                assert!((w - direct).abs() < 1e-10 * direct.abs().max(1.0), "{}", p.label());
                let wm = p.neg_ln_sqrt_fstar_mu((lam as f64).ln());
                assert!((wm - w).abs() < 1e-10 * w.abs().max(1.0));
            }
        }
    }
}
