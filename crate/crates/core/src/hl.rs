//! Hardy–Littlewood: a gradient bound `|∇u| ≲ G(δ)/δ` yields the modulus
//! `f(d⁻¹) = (∫₀^d G(t)/t dt)⁻¹`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::profiles::TypeProfile;
use crate::quad::{escalating_shells, ShellOptions};
use crate::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct GrowthFunction {
    g: ScalarFn,
    /// `λ ↦ ln G(e^{−λ})`, accurate far below the underflow of `t`.
    ln_g_lam: Option<ScalarFn>,
    pub d_max: f64,
    pub label: String,
}

impl std::fmt::Debug for GrowthFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GrowthFunction({}, d_max = {})", self.label, self.d_max)
    }
}

impl GrowthFunction {
    pub fn new<F>(g: F, d_max: f64, label: impl Into<String>) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(d_max > 0.0 && d_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("d_max = {d_max}")));
        }
        let out = Self {
            g: Arc::new(g),
            ln_g_lam: None,
            d_max,
            label: label.into(),
        };
        out.validate()?;
        Ok(out)
    }

    pub fn with_log_form<F>(mut self, ln_g_lam: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.ln_g_lam = Some(Arc::new(ln_g_lam));
        self
    }

    /// `G(t) = t^a`, `0 < a ≤ 1`.
    pub fn power(a: f64, d_max: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter(format!("exponent {a} not in (0, 1]")));
        }
        Ok(Self::new(move |t: f64| t.powf(a), d_max, format!("t^{a}"))?
            .with_log_form(move |lam| -a * lam))
    }

    /// `G(t) = √F*(t)`, the growth behind the first modulus case.
    pub fn sqrt_fstar(profile: &TypeProfile, d_max: f64) -> Result<Self> {
        let p = profile.clone();
        let q = profile.clone();
        Ok(Self::new(
            move |t: f64| p.fstar(t).map(f64::sqrt).unwrap_or(f64::NAN),
            d_max,
            format!("sqrt(F*) [{}]", profile.label()),
        )?
        .with_log_form(move |lam| -q.neg_ln_sqrt_fstar(lam)))
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.g)(t)
    }

    /// Sampled check: `G` increasing and `G(t)/t` decreasing on a log grid.
    pub fn validate(&self) -> Result<()> {
        let n = 400;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=n {
            let t = self.d_max * 10f64.powf(-12.0 * (n - k) as f64 / n as f64);
            let g = self.eval(t);
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::Hypothesis(format!("{}: G({t}) = {g}", self.label)));
            }
            if let Some((t0, g0)) = prev {
                let slack = 1e-12 * g0;
                if g < g0 - slack {
                    return Err(Error::Hypothesis(format!("{}: G decreases at {t}", self.label)));
                }
                if g / t > g0 / t0 * (1.0 + 1e-12) {
                    return Err(Error::Hypothesis(format!(
                        "{}: G(t)/t increases at {t}",
                        self.label
                    )));
                }
            }
            prev = Some((t, g));
        }
        Ok(())
    }

    /// `∫₀^d G(t)/t dt`.
    pub fn integral(&self, d: f64) -> Result<f64> {
        if !(d > 0.0 && d <= self.d_max * (1.0 + 1e-12)) {
            return Err(Error::Domain {
                what: "d",
                value: d,
                lo: 0.0,
                hi: self.d_max,
            });
        }
        let f_t = |t: f64| if t > 0.0 { self.eval(t) / t } else { 0.0 };
        let lam_form = self.ln_g_lam.as_ref().map(|l| {
            let l = l.clone();
            move |lam: f64| l(lam).exp()
        });
        let f_lam: Box<dyn Fn(f64) -> f64> = match lam_form {
            Some(f) => Box::new(f),
            None => Box::new(|lam: f64| self.eval((-lam).exp())),
        };
        let out = escalating_shells(&f_t, Some(f_lam.as_ref()), d, ShellOptions::default());
        if !out.converged || !out.value.is_finite() {
            return Err(Error::Divergence(format!(
                "integral of G(t)/t near 0 for {} (ratio {:.3})",
                self.label, out.ratio
            )));
        }
        Ok(out.value)
    }
}

/// `f(d⁻¹) = (∫₀^d G(t)/t dt)⁻¹`.
pub fn modulus_from_g(g: &GrowthFunction, d: f64) -> Result<f64> {
    Ok(1.0 / g.integral(d)?)
}

#[derive(Clone)]
pub enum DomainKind {
    /// `{|x| < radius}`.
    Ball,
    /// `{x : x_N > φ(x'), |x| < radius}`, distance proxy `x_N − φ(x')`.
    Graph(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

#[derive(Clone)]
pub struct LipschitzDomain {
    pub dim: usize,
    pub lipschitz: f64,
    pub radius: f64,
    pub kind: DomainKind,
}

impl std::fmt::Debug for LipschitzDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let k = match self.kind {
            DomainKind::Ball => "ball",
            DomainKind::Graph(_) => "graph",
        };
        write!(f, "LipschitzDomain({k}, N = {}, M = {}, r = {})", self.dim, self.lipschitz, self.radius)
    }
}

impl LipschitzDomain {
    pub fn ball(dim: usize, radius: f64) -> Self {
        Self {
            dim,
            lipschitz: 1.0,
            radius,
            kind: DomainKind::Ball,
        }
    }

    pub fn unit_disc() -> Self {
        Self::ball(2, 1.0)
    }

    pub fn graph<F>(dim: usize, phi: F, lipschitz: f64, radius: f64) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            lipschitz,
            radius,
            kind: DomainKind::Graph(Arc::new(phi)),
        }
    }

    /// Distance proxy: exact for the ball, vertical gap for graphs.
    pub fn delta(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::Ball => self.radius - norm(x),
            DomainKind::Graph(phi) => {
                let n = self.dim;
                (x[n - 1] - phi(&x[..n - 1])).min(self.radius - norm(x))
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && self.delta(x) > 0.0
    }

    /// Sampled Lipschitz check of the graph map.
    pub fn check_lipschitz(&self, n: usize, seed: u64) -> Result<f64> {
        let DomainKind::Graph(phi) = &self.kind else {
            return Ok(0.0);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.dim - 1;
        let mut worst = 0.0f64;
        for _ in 0..n {
            let a: Vec<f64> = (0..m).map(|_| rng.random_range(-self.radius..self.radius)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(-self.radius..self.radius)).collect();
            let d = dist(&a, &b);
            if d > 0.0 {
                worst = worst.max((phi(&a) - phi(&b)).abs() / d);
            }
        }
        if worst > self.lipschitz * (1.0 + 1e-12) {
            return Err(Error::Hypothesis(format!(
                "graph is not {}-Lipschitz (sampled {worst})",
                self.lipschitz
            )));
        }
        Ok(worst)
    }

    /// Interior points; half of them at log-uniform depth down to `1e−8·r`.
    pub fn sample(&self, rng: &mut ChaCha8Rng, near_boundary: bool) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-self.radius..self.radius)).collect();
            if !self.contains(&x) {
                continue;
            }
            if !near_boundary {
                return x;
            }
            let depth = self.radius * 10f64.powf(-8.0 * rng.random::<f64>());
            let y = match &self.kind {
                DomainKind::Ball => {
                    let s = (self.radius - depth) / norm(&x);
                    x.iter().map(|v| v * s).collect::<Vec<_>>()
                }
                DomainKind::Graph(phi) => {
                    let mut y = x.clone();
                    y[self.dim - 1] = phi(&x[..self.dim - 1]) + depth;
                    y
                }
            };
            if self.contains(&y) {
                return y;
            }
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationBin {
    pub sep_lo: f64,
    pub sep_hi: f64,
    pub pairs: usize,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HlReport {
    pub pairs: usize,
    /// Measured `sup |∇u| δ / G(δ)`.
    pub c_grad: f64,
    /// `sup |u(x) − u(y)| / ∫₀^{|x−y|} G(t)/t dt`.
    pub ratio: f64,
    /// `ratio / c_grad` (zero when `u` is constant).
    pub normalized_ratio: f64,
    /// Same supremum over twice as many pairs.
    pub ratio_doubled: f64,
    pub bins: Vec<SeparationBin>,
    pub worst_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub pass: bool,
}

/// Largest `|∇u(x)| δ(x) / G(δ(x))` over `n` samples, by central differences.
pub fn measure_c_grad(
    domain: &LipschitzDomain,
    g: &GrowthFunction,
    u: &dyn Fn(&[f64]) -> f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Maxima per depth decade, from shallow to deep.
    let mut by_decade = vec![0.0f64; 9];
    for k in 0..n {
        let x = domain.sample(&mut rng, k % 2 == 1);
        let d = domain.delta(&x);
        let h = 1e-4 * d;
        let mut g2 = 0.0;
        let mut xp = x.clone();
        for i in 0..domain.dim {
            xp[i] = x[i] + h;
            let up = u(&xp);
            xp[i] = x[i] - h;
            let um = u(&xp);
            xp[i] = x[i];
            g2 += ((up - um) / (2.0 * h)).powi(2);
        }
        let c = g2.sqrt() * d / g.eval(d.min(g.d_max));
        if !c.is_finite() {
            return Err(Error::Hypothesis(format!("non-finite gradient ratio at depth {d}")));
        }
        let dec = ((-(d / domain.radius).log10()).floor().max(0.0) as usize).min(8);
        by_decade[dec] = by_decade[dec].max(c);
    }
    let shallow = by_decade[..3].iter().cloned().fold(0.0, f64::max);
    let deep = by_decade[6..].iter().cloned().fold(0.0, f64::max);
    if deep > 2.0 * shallow.max(1e-300) && deep > 1e-12 {
        return Err(Error::Hypothesis(format!(
            "gradient ratio grows toward the boundary ({shallow:.3e} -> {deep:.3e})"
        )));
    }
    Ok(by_decade.into_iter().fold(0.0, f64::max))
}

fn sample_pair(domain: &LipschitzDomain, rng: &mut ChaCha8Rng, k: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let x = domain.sample(rng, k % 2 == 0);
        let sep = domain.radius * 10f64.powf(-4.0 + 3.0 * rng.random::<f64>());
        let dir: Vec<f64> = (0..domain.dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nd = norm(&dir);
        if nd == 0.0 || nd > 1.0 {
            continue;
        }
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + sep * b / nd).collect();
        if domain.contains(&y) {
            return (x, y);
        }
    }
}

/// Samples pairs at separations in `[1e−4, 1e−1]·r` and compares
/// `|u(x) − u(y)|` with `∫₀^{|x−y|} G(t)/t dt`.
pub fn check_hl(
    domain: &LipschitzDomain,
    g: &GrowthFunction,
    u: &dyn Fn(&[f64]) -> f64,
    pairs: usize,
    seed: u64,
) -> Result<HlReport> {
    domain.check_lipschitz(1000, seed)?;
    let c_grad = measure_c_grad(domain, g, u, 2000, seed ^ 0x9e37)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bins: Vec<SeparationBin> = (0..3)
        .map(|k| SeparationBin {
            sep_lo: domain.radius * 10f64.powi(k - 4),
            sep_hi: domain.radius * 10f64.powi(k - 3),
            pairs: 0,
            max_ratio: 0.0,
        })
        .collect();
    let mut ratio = 0.0f64;
    let mut ratio_n = 0.0f64;
    let mut worst = None;
    for k in 0..2 * pairs {
        let (x, y) = sample_pair(domain, &mut rng, k);
        let s = dist(&x, &y);
        let r = (u(&x) - u(&y)).abs() / g.integral(s.min(g.d_max))?;
        if r > ratio {
            ratio = r;
            worst = Some((x.clone(), y.clone()));
        }
        if k + 1 == pairs {
            ratio_n = ratio;
        }
        if k < pairs {
            let b = (((s / domain.radius).log10() + 4.0).floor().clamp(0.0, 2.0)) as usize;
            bins[b].pairs += 1;
            bins[b].max_ratio = bins[b].max_ratio.max(r);
        }
    }
    let stable = ratio <= 1.2 * ratio_n || ratio <= 1e-14;
    Ok(HlReport {
        pairs,
        c_grad,
        ratio: ratio_n,
        normalized_ratio: if c_grad > 0.0 { ratio_n / c_grad } else { 0.0 },
        ratio_doubled: ratio,
        bins,
        worst_pair: worst,
        pass: ratio.is_finite() && stable,
    })
}
