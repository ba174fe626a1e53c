//! Support function `Φ`, the cut-off Leray section `(Φ₁, Φ₂)` and `Φ#`.
//!
//! For the Ball model, `ρ(ζ) = 0` gives the exact decomposition
//!
//! `Re Φ(z, ζ) = −ρ(z) + [P(z₁) − P(ζ₁) − 2 Re ∂P(ζ₁)(z₁ − ζ₁)] + |z₂ − ζ₂|²`,
//!
//! and the bracket is nonnegative by convexity of `P`, so the flat branch of
//! the lower bound holds for every pair, not only near the origin.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{boundary_chart, grad_rho, rho, sample_boundary, ComplexPoint, DomainSpec};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBundle {
    pub phi: C64,
    pub phi1: C64,
    pub phi2: C64,
    pub phi_sharp: C64,
    pub chi: f64,
}

/// `1 − smoothstep`, with the quintic smoothstep `6s⁵ − 15s⁴ + 10s³`.
pub fn chi(dist: f64, epsilon: f64) -> f64 {
    let half = 0.5 * epsilon;
    let s = ((dist - half) / half).clamp(0.0, 1.0);
    1.0 - s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
}

/// `Φ(z, ζ) = 2 Σ ∂ρ/∂ζ_j (ζ) (ζ_j − z_j)`.
pub fn support_phi(spec: &DomainSpec, z: &ComplexPoint, zeta: &ComplexPoint) -> C64 {
    let (a, b) = grad_rho(spec, zeta);
    2.0 * (a * (zeta.z1 - z.z1) + b * (zeta.z2 - z.z2))
}

pub fn eval_kernel(spec: &DomainSpec, z: &ComplexPoint, zeta: &ComplexPoint) -> KernelBundle {
    let (a, b) = grad_rho(spec, zeta);
    let d1 = zeta.z1 - z.z1;
    let d2 = zeta.z2 - z.z2;
    let phi = 2.0 * (a * d1 + b * d2);
    let c = chi(z.dist(zeta), spec.epsilon);
    let phi1 = a * c + d1.conj() * (1.0 - c);
    let phi2 = b * c + d2.conj() * (1.0 - c);
    KernelBundle {
        phi,
        phi1,
        phi2,
        phi_sharp: phi1 * d1 + phi2 * d2,
        chi: c,
    }
}

/// Bracket `P(z₁) − P(ζ₁) − 2 Re ∂P(ζ₁)(z₁ − ζ₁)` of the flat branch.
pub fn flat_bracket(spec: &DomainSpec, z: &ComplexPoint, zeta: &ComplexPoint) -> f64 {
    spec.p(z.z1) - spec.p(zeta.z1) - 2.0 * (spec.dp(zeta.z1) * (z.z1 - zeta.z1)).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub z: ComplexPoint,
    pub zeta: ComplexPoint,
}

/// Pairs `(z, ζ)` with `ζ ∈ bΩ`, `z ∈ Ω̄`, `|z − ζ| ≤ radius`. Half of the
/// boundary points are drawn from `B(0, δ)` near the origin.
pub fn sample_pairs(spec: &DomainSpec, n: usize, radius: f64, seed: u64) -> Vec<PairSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let far = sample_boundary(spec, n.div_ceil(2).max(1), rng.random()).unwrap_or_default();
    let (xe, ye) = spec.z1_extent();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut attempts = 0usize;
    while out.len() < n && attempts < 1000 * n.max(1) {
        attempts += 1;
        let zeta = if k % 2 == 0 || far.is_empty() {
            let r = spec.delta.min(1.0);
            let x1 = rng.random_range(-r.min(xe)..r.min(xe));
            let y1 = rng.random_range(-r.min(ye)..r.min(ye));
            let th = std::f64::consts::PI + rng.random_range(-r..r);
            match boundary_chart(spec, x1, y1, th) {
                Ok(b) if b.point.dist(&origin()) <= spec.delta => b.point,
                _ => continue,
            }
        } else {
            far[(k / 2) % far.len()].point
        };
        // Uniform direction in R⁴, radius with density ∝ r³ but biased to
        // small separations by a log-uniform factor.
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv == 0.0 || nv > 1.0 {
            continue;
        }
        let scale = radius * 10f64.powf(-4.0 * rng.random::<f64>());
        let z = ComplexPoint::from_reals(
            zeta.z1.re + scale * v[0] / nv,
            zeta.z1.im + scale * v[1] / nv,
            zeta.z2.re + scale * v[2] / nv,
            zeta.z2.im + scale * v[3] / nv,
        );
        if rho(spec, &z) <= 0.0 {
            out.push(PairSample { z, zeta });
            k += 1;
        }
    }
    out
}

fn origin() -> ComplexPoint {
    ComplexPoint::from_reals(0.0, 0.0, 0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma21Report {
    pub samples: usize,
    pub epsilon: f64,
    pub epsilon_halvings: u32,
    /// Largest amount by which `Re Φ` falls short of the flat-branch bound.
    pub worst_violation: f64,
    pub violations: usize,
    /// Smallest `(Re Φ + ρ(z)) / |z − ζ|²` over pairs with `ζ ∉ B(0, δ)`.
    pub c_best: f64,
    /// Largest shortfall of `Re Φ ≥ |ρ(z)|` over pairs with `ζ ∈ B(0, δ)`.
    pub consequence_worst: f64,
    pub worst_pair: Option<PairSample>,
    pub pass: bool,
}

const LEMMA_TOL: f64 = 1e-10;

fn lemma21_once(spec: &DomainSpec, n: usize, seed: u64) -> Lemma21Report {
    let pairs = sample_pairs(spec, n, spec.epsilon, seed);
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut c_best = f64::INFINITY;
    let mut cons = 0.0f64;
    let mut worst_pair = None;
    for p in &pairs {
        let re_phi = support_phi(spec, &p.z, &p.zeta).re;
        let rz = rho(spec, &p.z);
        let bound = -rz + flat_bracket(spec, &p.z, &p.zeta);
        // Scale-aware slack: terms of size |Φ| carry relative rounding.
        let slack = LEMMA_TOL.max(1e-13 * re_phi.abs());
        let short = bound - re_phi;
        if short > slack {
            violations += 1;
        }
        if worst_pair.is_none() || short > worst {
            worst = short;
            worst_pair = Some(*p);
        }
        let near = p.zeta.dist(&origin()) <= spec.delta;
        if near {
            cons = cons.max(rz.abs() - re_phi);
        }
        let d2 = p.z.dist(&p.zeta).powi(2);
        if !near && d2 > 0.0 {
            c_best = c_best.min((re_phi + rz) / d2);
        }
    }
    Lemma21Report {
        samples: pairs.len(),
        epsilon: spec.epsilon,
        epsilon_halvings: 0,
        worst_violation: worst.max(0.0),
        violations,
        c_best: if c_best.is_finite() { c_best } else { 0.0 },
        consequence_worst: cons,
        worst_pair,
        pass: violations == 0 && cons <= LEMMA_TOL,
    }
}

/// Samples the lower bound on `Re Φ`; on failure `ε` is halved (up to four
/// times) and the check repeated.
pub fn verify_lemma21(spec: &DomainSpec, n_samples: usize, seed: u64) -> Lemma21Report {
    let mut s = spec.clone();
    let mut report = lemma21_once(&s, n_samples, seed);
    let mut halvings = 0;
    while !report.pass && halvings < 4 {
        halvings += 1;
        s.epsilon *= 0.5;
        report = lemma21_once(&s, n_samples, seed);
    }
    report.epsilon_halvings = halvings;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolomorphyReport {
    pub samples: usize,
    /// Largest finite-difference `|∂̄_z|` of `Φ#`, `Φ₁`, `Φ₂` with `|z − ζ| < ε/2`.
    pub max_dbar_inner: f64,
    /// Same quantity in the transition shell, reported for reference.
    pub max_dbar_shell: f64,
    /// Largest `|Φ₁(ζ̄₂ − z̄₂) − Φ₂(ζ̄₁ − z̄₁)|` with `|z − ζ| ≥ ε`.
    pub max_numerator_far: f64,
    pub pass: bool,
}

/// `∂/∂z̄_j` of a complex function of `z` by central differences.
pub fn dbar_fd(f: &dyn Fn(&ComplexPoint) -> C64, z: &ComplexPoint, j: usize, h: f64) -> C64 {
    let shift = |d: C64| {
        if j == 0 {
            ComplexPoint::new(z.z1 + d, z.z2)
        } else {
            ComplexPoint::new(z.z1, z.z2 + d)
        }
    };
    let dx = (f(&shift(C64::new(h, 0.0))) - f(&shift(C64::new(-h, 0.0)))) / (2.0 * h);
    let dy = (f(&shift(C64::new(0.0, h))) - f(&shift(C64::new(0.0, -h)))) / (2.0 * h);
    0.5 * (dx + C64::i() * dy)
}

pub fn verify_holomorphy(spec: &DomainSpec, n_samples: usize, seed: u64) -> HolomorphyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zetas = sample_boundary(spec, n_samples.max(1), rng.random()).unwrap_or_default();
    let eps = spec.epsilon;
    let mut inner = 0.0f64;
    let mut shell = 0.0f64;
    let mut far = 0.0f64;
    let mut count = 0;
    for b in &zetas {
        let zeta = b.point;
        for band in 0..3 {
            let (lo, hi) = match band {
                0 => (0.05 * eps, 0.45 * eps),
                1 => (0.55 * eps, 0.95 * eps),
                _ => (eps, 2.0 * eps),
            };
            let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            let r = rng.random_range(lo..hi);
            let z = ComplexPoint::from_reals(
                zeta.z1.re + r * v[0] / nv,
                zeta.z1.im + r * v[1] / nv,
                zeta.z2.re + r * v[2] / nv,
                zeta.z2.im + r * v[3] / nv,
            );
            count += 1;
            if band == 2 {
                let k = eval_kernel(spec, &z, &zeta);
                let num = k.phi1 * (zeta.z2 - z.z2).conj() - k.phi2 * (zeta.z1 - z.z1).conj();
                far = far.max(num.norm());
                continue;
            }
            let h = 1e-5 * eps;
            let mut m = 0.0f64;
            for j in 0..2 {
                let fs: [&dyn Fn(&ComplexPoint) -> C64; 3] = [
                    &|q| eval_kernel(spec, q, &zeta).phi_sharp,
                    &|q| eval_kernel(spec, q, &zeta).phi1,
                    &|q| eval_kernel(spec, q, &zeta).phi2,
                ];
                for f in fs {
                    m = m.max(dbar_fd(f, &z, j, h).norm());
                }
            }
            if band == 0 {
                inner = inner.max(m);
            } else {
                shell = shell.max(m);
            }
        }
    }
    HolomorphyReport {
        samples: count,
        max_dbar_inner: inner,
        max_dbar_shell: shell,
        max_numerator_far: far,
        pass: inner <= 1e-6 && far <= 1e-14,
    }
}
