//! Scalar lemma verifiers: convexity gap, the `∫ dr/(ϱ + F(r²))` bound with
//! its `1 + π/4` constant, the log-weighted variant, and the quadratic lower
//! bounds on `Re Φ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{rho, DomainSpec, Shape};
use crate::kernel::{sample_pairs, support_phi, PairSample};
use crate::profiles::TypeProfile;
use crate::quad::{adaptive_gk, GkOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Report {
    pub samples: usize,
    pub min_value: f64,
    pub worst: (f64, f64),
    pub pass: bool,
}

/// `F(p) − F(q) − F'(q)(p − q)` for `p, q ∈ [0, t_max]`.
pub fn convexity_gap(profile: &TypeProfile, p: f64, q: f64) -> f64 {
    profile.f(p) - profile.f(q) - profile.df(q) * (p - q)
}

pub fn verify_l1(profile: &TypeProfile, n_samples: usize, seed: u64) -> L1Report {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tm = profile.t_max();
    let mut min = f64::INFINITY;
    let mut worst = (0.0, 0.0);
    for k in 0..n_samples {
        // Alternate uniform and log-uniform draws so the flat end is visited.
        let draw = |rng: &mut ChaCha8Rng| {
            if k % 2 == 0 {
                rng.random_range(0.0..=tm)
            } else {
                tm * 10f64.powf(-12.0 * rng.random::<f64>())
            }
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let g = convexity_gap(profile, p, q);
        if g < min {
            min = g;
            worst = (p, q);
        }
    }
    L1Report {
        samples: n_samples,
        min_value: min,
        worst,
        pass: min >= -1e-12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub rho: f64,
    pub integral: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub rows: Vec<RatioRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Pass threshold on every ratio (may depend on `ϱ` for the log variant).
    pub bound: f64,
    pub pass: bool,
}

/// `1 + π/4` plus the stated slack.
pub const L2_BOUND: f64 = 1.0 + std::f64::consts::FRAC_PI_4 + 0.05;

fn gk() -> GkOptions {
    GkOptions {
        abs_tol: 0.0,
        rel_tol: 1e-10,
        max_intervals: 4000,
    }
}

/// Integral over `[0, δ]` split at `r₀` and then geometrically, so each
/// panel sees one scale of the integrand.
fn split_integral(f: &dyn Fn(f64) -> f64, r0: f64, delta: f64) -> Result<f64> {
    let mut total = 0.0;
    let mut a = 0.0;
    let mut b = r0.min(delta);
    loop {
        let q = adaptive_gk(f, a, b, gk());
        if !q.converged || !q.value.is_finite() {
            return Err(Error::Convergence("lemma integral"));
        }
        total += q.value;
        if b >= delta {
            return Ok(total);
        }
        a = b;
        b = (2.0 * b).min(delta);
    }
}

fn check_rho(profile: &TypeProfile, rho: f64, delta: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho = {rho}")));
    }
    let r0 = profile.fstar(rho)?.sqrt();
    if r0 > delta {
        return Err(Error::Domain {
            what: "sqrt(F*(rho))",
            value: r0,
            lo: 0.0,
            hi: delta,
        });
    }
    Ok(r0)
}

pub fn l2_row(profile: &TypeProfile, rho: f64, delta: f64) -> Result<RatioRow> {
    let r0 = check_rho(profile, rho, delta)?;
    let f = |r: f64| 1.0 / (rho + profile.f(r * r));
    let integral = split_integral(&f, r0, delta)?;
    let rhs = r0 / rho;
    Ok(RatioRow {
        rho,
        integral,
        rhs,
        ratio: integral / rhs,
    })
}

fn summarize(rows: Vec<RatioRow>, bound: f64, ok: bool) -> RatioReport {
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    RatioReport {
        pass: ok && !rows.is_empty() && max.is_finite(),
        rows,
        max_ratio: max,
        min_ratio: min,
        bound,
    }
}

/// Ratio of `∫₀^δ dr/(ϱ + F(r²))` to `√F*(ϱ)/ϱ` for each `ϱ`; passes iff all
/// ratios are at most `1 + π/4 + 0.05`.
pub fn verify_l2(profile: &TypeProfile, rho_list: &[f64], delta: f64) -> Result<RatioReport> {
    let rows = rho_list
        .iter()
        .map(|&r| l2_row(profile, r, delta))
        .collect::<Result<Vec<_>>>()?;
    let ok = rows.iter().all(|r| r.ratio <= L2_BOUND);
    Ok(summarize(rows, L2_BOUND, ok))
}

/// `∫₀^s |ln t| dt = s(1 + |ln s|)` for `0 < s ≤ 1`.
pub fn log_antiderivative(s: f64) -> f64 {
    s * (1.0 - s.ln())
}

/// Bound on the log-weighted ratio from the same two-piece split: the inner
/// piece gives `1 + 1/|ln r₀|`, the outer one `π/4`.
pub fn l3_bound(r0: f64) -> f64 {
    1.0 + std::f64::consts::FRAC_PI_4 + 1.0 / r0.ln().abs() + 0.05
}

pub fn l3_row(profile: &TypeProfile, rho: f64, delta: f64) -> Result<RatioRow> {
    if delta >= 1.0 {
        return Err(Error::InvalidParameter(format!("delta = {delta} must be < 1")));
    }
    let r0 = check_rho(profile, rho, delta)?;
    let f = |t: f64| if t > 0.0 { -t.ln() / (rho + profile.f(t * t)) } else { 0.0 };
    let integral = split_integral(&f, r0, delta)?;
    let rhs = r0 * r0.ln().abs() / rho;
    Ok(RatioRow {
        rho,
        integral,
        rhs,
        ratio: integral / rhs,
    })
}

/// Log-weighted analogue; passes iff every ratio stays under [`l3_bound`]
/// at its own `r₀`. `bound` in the report is the largest of those.
pub fn verify_l3(profile: &TypeProfile, rho_list: &[f64], delta: f64) -> Result<RatioReport> {
    let mut rows = Vec::with_capacity(rho_list.len());
    let mut ok = true;
    let mut bound = 0.0f64;
    for &r in rho_list {
        let row = l3_row(profile, r, delta)?;
        let b = l3_bound(profile.fstar(r)?.sqrt());
        ok &= row.ratio <= b;
        bound = bound.max(b);
        rows.push(row);
    }
    Ok(summarize(rows, bound, ok))
}

/// Geometric `ϱ` grid, `n` points from `lo` to `hi` inclusive.
pub fn rho_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorReport {
    pub samples: usize,
    pub violations: usize,
    pub worst_violation: f64,
    pub worst_pair: Option<PairSample>,
    pub pass: bool,
}

/// Quadratic part of the lower bound: `F'(|ζ₁|²)|z₁ − ζ₁|²` (Modulus) or
/// `F'(ξ₁²)(x₁ − ξ₁)²` (RealPart).
pub fn taylor_term(spec: &DomainSpec, p: &PairSample) -> f64 {
    let f = &spec.profile;
    match spec.shape {
        Shape::Modulus => f.df(p.zeta.z1.norm_sqr()) * (p.z.z1 - p.zeta.z1).norm_sqr(),
        Shape::RealPart => {
            let xi = p.zeta.z1.re;
            f.df(xi * xi) * (p.z.z1.re - xi).powi(2)
        }
    }
}

pub fn verify_taylor_lower_bound(spec: &DomainSpec, n_samples: usize, seed: u64) -> TaylorReport {
    let origin = crate::geometry::ComplexPoint::from_reals(0.0, 0.0, 0.0, 0.0);
    let mut pairs = sample_pairs(spec, 2 * n_samples, spec.epsilon, seed);
    pairs.retain(|p| p.zeta.dist(&origin) <= spec.delta);
    pairs.truncate(n_samples);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pair = None;
    for p in &pairs {
        let re_phi = support_phi(spec, &p.z, &p.zeta).re;
        let short = -rho(spec, &p.z) + taylor_term(spec, p) - re_phi;
        if short > 1e-10f64.max(1e-13 * re_phi.abs()) {
            violations += 1;
        }
        if short > worst {
            worst = short;
            worst_pair = Some(*p);
        }
    }
    TaylorReport {
        samples: pairs.len(),
        violations,
        worst_violation: worst.max(0.0),
        worst_pair,
        pass: violations == 0 && !pairs.is_empty(),
    }
}
