//! Henkin solution `u = Hφ + Kφ` of `∂̄u = φ`.
//!
//! Both integrals are written in ray-star coordinates about `z`: a unit
//! direction `ω(η, ξ₁, ξ₂) = (cos η e^{iξ₁}, sin η e^{iξ₂})` and the exit
//! distance `T(ω)`, so the boundary is `ζ(ω) = z + T(ω) ω`.
//!
//! * `Kφ(z) = −π⁻² ∫_Ω Σ φ_j(ζ)(ζ̄_j − z̄_j) |ζ − z|⁻⁴ dV`; with
//!   `dV = r³ dr dσ(ω)` the radial integrand is `Σ φ_j(z + rω) ω̄_j`, which
//!   is smooth.
//! * `Hφ(z) = σ (4π²)⁻¹ ∫_{bΩ} (Φ₁(ζ̄₂ − z̄₂) − Φ₂(ζ̄₁ − z̄₁)) / (Φ#|ζ − z|²) φ∧ω(ζ)`,
//!   with `φ∧ω(ζ)` pulled back through `ζ(ω)` as two 3×3 determinants.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{distance_proxy, grad_rho, ray_exit, rho, ComplexPoint, DomainSpec, Shape};
use crate::kernel::eval_kernel;
use crate::par::{self, ExecMode};
use crate::profiles::{hypothesis_integral, Variant};
use crate::quad::{adaptive_gk, cubature3, gauss_legendre, CubatureOptions, GkOptions, Pair};
use crate::{Error, Result};

type C64 = Complex64;
type FormFn = Arc<dyn Fn(&ComplexPoint) -> C64 + Send + Sync>;

const PI: f64 = std::f64::consts::PI;

/// Orientation of the boundary integral relative to the outward normal,
/// fixed by the ∂̄-residual test.
pub const H_ORIENTATION: f64 = -1.0;

#[derive(Clone)]
pub struct OneForm {
    pub phi1: FormFn,
    pub phi2: FormFn,
    pub sup_norm: f64,
    pub label: String,
}

impl std::fmt::Debug for OneForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OneForm({}, sup = {})", self.label, self.sup_norm)
    }
}

impl OneForm {
    pub fn new<A, B>(phi1: A, phi2: B, sup_norm: f64, label: impl Into<String>) -> Self
    where
        A: Fn(&ComplexPoint) -> C64 + Send + Sync + 'static,
        B: Fn(&ComplexPoint) -> C64 + Send + Sync + 'static,
    {
        Self {
            phi1: Arc::new(phi1),
            phi2: Arc::new(phi2),
            sup_norm,
            label: label.into(),
        }
    }

    pub fn zero() -> Self {
        Self::new(|_| C64::new(0.0, 0.0), |_| C64::new(0.0, 0.0), 0.0, "0")
    }

    /// `dz̄₂`.
    pub fn dzbar2() -> Self {
        Self::new(|_| C64::new(0.0, 0.0), |_| C64::new(1.0, 0.0), 1.0, "dzbar2")
    }

    /// `z₂ dz̄₁`; `|z₂| ≤ 2` on the Ball model.
    pub fn z2_dzbar1() -> Self {
        Self::new(|z| z.z2, |_| C64::new(0.0, 0.0), 2.0, "z2_dzbar1")
    }

    /// `a·f + b·g`.
    pub fn combine(a: C64, f: &OneForm, b: C64, g: &OneForm) -> Self {
        let (f1, f2, g1, g2) = (f.phi1.clone(), f.phi2.clone(), g.phi1.clone(), g.phi2.clone());
        Self::new(
            move |z| a * f1(z) + b * g1(z),
            move |z| a * f2(z) + b * g2(z),
            a.norm() * f.sup_norm + b.norm() * g.sup_norm,
            format!("({a})*{} + ({b})*{}", f.label, g.label),
        )
    }

    pub fn eval(&self, z: &ComplexPoint) -> (C64, C64) {
        ((self.phi1)(z), (self.phi2)(z))
    }

    /// Sampled checks of `∂φ₁/∂z̄₂ = ∂φ₂/∂z̄₁` and `|φ_j| ≤ sup_norm`.
    pub fn validate(&self, spec: &DomainSpec, n: usize, seed: u64) -> Result<()> {
        for z in crate::geometry::sample_interior(spec, n, seed) {
            let h = 1e-5;
            let a = crate::kernel::dbar_fd(self.phi1.as_ref(), &z, 1, h);
            let b = crate::kernel::dbar_fd(self.phi2.as_ref(), &z, 0, h);
            if (a - b).norm() > 1e-6 {
                return Err(Error::InvalidParameter(format!(
                    "{} is not dbar-closed at {z:?}",
                    self.label
                )));
            }
            let (p1, p2) = self.eval(&z);
            if p1.norm().max(p2.norm()) > self.sup_norm * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!(
                    "{} exceeds its declared sup norm",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeraySection {
    /// `Φ_j = ∂ρ/∂ζ_j`, `Φ# = Φ/2` everywhere; holomorphic in `z`.
    #[default]
    Global,
    /// The `χ`-patched section, supported in `|z − ζ| ≤ ε`.
    CutOff,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub section: LeraySection,
    pub exec: ExecMode,
    pub radial_nodes: usize,
    pub max_panels: usize,
    pub initial: [usize; 3],
    /// Start of the `(ξ₁, ξ₂)` periods; shifts rotate the mesh.
    #[serde(default)]
    pub xi_offset: [f64; 2],
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            section: LeraySection::Global,
            exec: ExecMode::Parallel,
            radial_nodes: 16,
            max_panels: 400_000,
            initial: [2, 4, 4],
            xi_offset: [0.0, 0.0],
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    /// One global refinement: every initial panel split in each direction.
    pub fn refined(&self) -> Self {
        Self {
            initial: self.initial.map(|n| 2 * n),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: C64,
    pub err_estimate: f64,
    pub panels: usize,
    /// Smallest `|ζ − z|` met on the boundary.
    pub min_separation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub value: C64,
    pub h: QuadratureResult,
    pub k: QuadratureResult,
    pub err_estimate: f64,
}

fn direction(q: [f64; 3]) -> ([C64; 2], [[C64; 2]; 3], f64) {
    let (s, c) = q[0].sin_cos();
    let e1 = C64::from_polar(1.0, q[1]);
    let e2 = C64::from_polar(1.0, q[2]);
    let w = [c * e1, s * e2];
    let i = C64::i();
    let dw = [
        [-s * e1, c * e2],
        [i * c * e1, C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), i * s * e2],
    ];
    (w, dw, c * s)
}

fn det3(m: [[C64; 3]; 3]) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn det4(m: [[f64; 4]; 4]) -> f64 {
    let mut a = m;
    let mut det = 1.0;
    for col in 0..4 {
        let piv = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for k in col..4 {
                a[r][k] -= f * a[col][k];
            }
        }
    }
    det
}

fn real4(v: [C64; 2]) -> [f64; 4] {
    [v[0].re, v[0].im, v[1].re, v[1].im]
}

/// Boundary point and tangent vectors `∂ζ/∂q_k` of the ray-star map.
struct StarNode {
    t: f64,
    zeta: ComplexPoint,
    tangents: [[C64; 2]; 3],
    w: [C64; 2],
    jac: f64,
}

fn star_node(spec: &DomainSpec, z: &ComplexPoint, q: [f64; 3]) -> Result<StarNode> {
    let (w, dw, jac) = direction(q);
    let t = ray_exit(spec, z, w)?;
    let zeta = z.add(w, t);
    let (g1, g2) = grad_rho(spec, &zeta);
    let dn = (g1 * w[0] + g2 * w[1]).re;
    if !(dn > 0.0) {
        return Err(Error::DegenerateGradient);
    }
    let mut tangents = [[C64::new(0.0, 0.0); 2]; 3];
    for k in 0..3 {
        let dt = -t * (g1 * dw[k][0] + g2 * dw[k][1]).re / dn;
        tangents[k] = [w[0] * dt + dw[k][0] * t, w[1] * dt + dw[k][1] * t];
    }
    Ok(StarNode {
        t,
        zeta,
        tangents,
        w,
        jac,
    })
}

/// `+1` when `(ν, ∂_η ζ, ∂_ξ₁ ζ, ∂_ξ₂ ζ)` is positively oriented in `R⁴`.
fn chart_orientation(spec: &DomainSpec, z: &ComplexPoint) -> Result<f64> {
    let n = star_node(spec, z, [0.7, 0.4, 1.9])?;
    let (g1, g2) = grad_rho(spec, &n.zeta);
    // Real gradient: ∂_x ρ = 2 Re ρ_j, ∂_y ρ = −2 Im ρ_j.
    let nu = [2.0 * g1.re, -2.0 * g1.im, 2.0 * g2.re, -2.0 * g2.im];
    let m = [nu, real4(n.tangents[0]), real4(n.tangents[1]), real4(n.tangents[2])];
    let d = det4(m);
    if d == 0.0 {
        return Err(Error::DegenerateGradient);
    }
    Ok(d.signum())
}

/// `φ∧dζ₁∧dζ₂` evaluated on the three tangents.
fn pullback(phi: (C64, C64), v: &[[C64; 2]; 3]) -> C64 {
    let row = |j: usize, conj: bool| {
        [0, 1, 2].map(|k| if conj { v[k][j].conj() } else { v[k][j] })
    };
    let base1 = row(0, false);
    let base2 = row(1, false);
    phi.0 * det3([row(0, true), base1, base2]) + phi.1 * det3([row(1, true), base1, base2])
}

/// Leray data `(Φ₁, Φ₂, Φ#)` at `(z, ζ)`.
fn section(spec: &DomainSpec, s: LeraySection, z: &ComplexPoint, zeta: &ComplexPoint) -> (C64, C64, C64) {
    match s {
        LeraySection::Global => {
            let (g1, g2) = grad_rho(spec, zeta);
            let sharp = g1 * (zeta.z1 - z.z1) + g2 * (zeta.z2 - z.z2);
            (g1, g2, sharp)
        }
        LeraySection::CutOff => {
            let k = eval_kernel(spec, z, zeta);
            (k.phi1, k.phi2, k.phi_sharp)
        }
    }
}

fn check_interior(spec: &DomainSpec, z: &ComplexPoint) -> Result<()> {
    if matches!(spec.r_model, crate::geometry::RModel::HalfSpace) {
        return Err(Error::Unsupported("solver needs a bounded (Ball) model".into()));
    }
    let r = rho(spec, z);
    if !(r < 0.0) || !z.is_finite() {
        return Err(Error::Region(format!("z is not interior (rho = {r:e})")));
    }
    Ok(())
}

struct NodeRule<'a> {
    spec: &'a DomainSpec,
    form: &'a OneForm,
    z: &'a ComplexPoint,
    section: LeraySection,
    ck: f64,
    ch: f64,
    xs: Vec<f64>,
    ws: Vec<f64>,
}

impl<'a> NodeRule<'a> {
    fn new(spec: &'a DomainSpec, form: &'a OneForm, z: &'a ComplexPoint, opts: &SolverOptions) -> Result<Self> {
        check_interior(spec, z)?;
        let orient = chart_orientation(spec, z)? * H_ORIENTATION;
        let (xs, ws) = gauss_legendre(opts.radial_nodes);
        Ok(Self {
            spec,
            form,
            z,
            section: opts.section,
            ck: -1.0 / (PI * PI),
            ch: orient / (4.0 * PI * PI),
            xs,
            ws,
        })
    }

    /// `(K density, H density, T)` at angles `q`, prefactors included.
    fn eval(&self, q: [f64; 3]) -> Result<(C64, C64, f64)> {
        let z = self.z;
        let zero = C64::new(0.0, 0.0);
        let StarNode { t, zeta, tangents, w, jac } = star_node(self.spec, z, q)?;
        let mut kr = zero;
        for (&x, &wt) in self.xs.iter().zip(&self.ws) {
            let p = z.add(w, 0.5 * t * (x + 1.0));
            let (p1, p2) = self.form.eval(&p);
            kr += (p1 * w[0].conj() + p2 * w[1].conj()) * wt;
        }
        let k = kr * (0.5 * t * jac * self.ck);
        let (f1, f2, sharp) = section(self.spec, self.section, z, &zeta);
        let num = f1 * (zeta.z2 - z.z2).conj() - f2 * (zeta.z1 - z.z1).conj();
        let h = if num == zero {
            zero
        } else {
            num / (sharp * (t * t)) * pullback(self.form.eval(&zeta), &tangents) * self.ch
        };
        Ok((k, h, t))
    }
}

/// Integrand of the joint cubature at angles `q = (η, ξ₁, ξ₂)`: the K and
/// H densities with their prefactors, and the exit distance `T(ω)`.
pub fn ray_star_integrand(spec: &DomainSpec, form: &OneForm, z: &ComplexPoint, q: [f64; 3], opts: &SolverOptions) -> Result<(C64, C64, f64)> {
    NodeRule::new(spec, form, z, opts)?.eval(q)
}

/// Joint cubature of `(Kφ, Hφ)`; both kernels share the ray exit per node.
fn eval_pair(spec: &DomainSpec, form: &OneForm, z: &ComplexPoint, opts: &SolverOptions) -> Result<(QuadratureResult, QuadratureResult)> {
    let rule = NodeRule::new(spec, form, z, opts)?;
    let f = |q: [f64; 3]| -> (Pair, f64) {
        match rule.eval(q) {
            Ok((k, h, t)) => (Pair(k, h), t),
            Err(_) => (Pair(C64::new(f64::NAN, 0.0), C64::new(0.0, 0.0)), 0.0),
        }
    };
    let copts = CubatureOptions {
        abs_tol: opts.tol,
        max_panels: opts.max_panels,
        max_depth: 24,
        initial: opts.initial,
        exec: opts.exec,
    };
    let [a, b] = opts.xi_offset;
    let out = cubature3(f, [0.0, a, b], [0.5 * PI, a + 2.0 * PI, b + 2.0 * PI], copts)?;
    if !(out.value.0.is_finite() && out.value.1.is_finite()) {
        return Err(Error::Convergence("ray exit failed inside the cubature"));
    }
    let mk = |v: C64| QuadratureResult {
        value: v,
        err_estimate: out.error,
        panels: out.panels,
        min_separation: out.aux_min,
    };
    Ok((mk(out.value.0), mk(out.value.1)))
}

pub fn eval_k(spec: &DomainSpec, form: &OneForm, z: &ComplexPoint, opts: &SolverOptions) -> Result<QuadratureResult> {
    Ok(eval_pair(spec, form, z, opts)?.0)
}

pub fn eval_h(spec: &DomainSpec, form: &OneForm, z: &ComplexPoint, opts: &SolverOptions) -> Result<QuadratureResult> {
    Ok(eval_pair(spec, form, z, opts)?.1)
}

/// `u(z) = Hφ(z) + Kφ(z)`.
pub fn solve(spec: &DomainSpec, form: &OneForm, z: &ComplexPoint, opts: &SolverOptions) -> Result<Solution> {
    let (k, h) = eval_pair(spec, form, z, opts)?;
    Ok(Solution {
        value: h.value + k.value,
        h,
        k,
        err_estimate: h.err_estimate,
    })
}

/// `(∂u/∂z̄₁ − φ₁(z), ∂u/∂z̄₂ − φ₂(z))` by central differences of step `h`.
pub fn dbar_residual(spec: &DomainSpec, form: &OneForm, z: &ComplexPoint, h: f64, opts: &SolverOptions) -> Result<(C64, C64)> {
    check_interior(spec, z)?;
    let d = distance_proxy(spec, z)?;
    if d <= 4.0 * h {
        return Err(Error::Region(format!("distance {d:e} <= 4h")));
    }
    let shifts: Vec<(usize, C64)> = (0..2)
        .flat_map(|j| {
            [C64::new(h, 0.0), C64::new(-h, 0.0), C64::new(0.0, h), C64::new(0.0, -h)].map(|s| (j, s))
        })
        .collect();
    let mut points = Vec::with_capacity(8);
    for &(j, s) in &shifts {
        let p = if j == 0 {
            ComplexPoint::new(z.z1 + s, z.z2)
        } else {
            ComplexPoint::new(z.z1, z.z2 + s)
        };
        if rho(spec, &p) >= 0.0 {
            return Err(Error::Region("stencil point outside the domain".into()));
        }
        points.push(p);
    }
    // Stencil points run one after another; each cubature is parallel inside.
    let mut u = Vec::with_capacity(8);
    for p in &points {
        u.push(solve(spec, form, p, opts)?.value);
    }
    let (p1, p2) = form.eval(z);
    let db = |b: usize| {
        let dx = (u[b] - u[b + 1]) / (2.0 * h);
        let dy = (u[b + 2] - u[b + 3]) / (2.0 * h);
        0.5 * (dx + C64::i() * dy)
    };
    Ok((db(0) - p1, db(4) - p2))
}

/// Interior points with distance proxy at least `min_dist`.
pub fn interior_points(spec: &DomainSpec, n: usize, min_dist: f64, seed: u64) -> Vec<ComplexPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut round = 0u64;
    while out.len() < n && round < 1000 {
        for z in crate::geometry::sample_interior(spec, 4 * n, rng.random()) {
            if out.len() < n && distance_proxy(spec, &z).map_or(false, |d| d >= min_dist) {
                out.push(z);
            }
        }
        round += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupnormReport {
    pub points: usize,
    pub max_abs_u: f64,
    pub constant: f64,
    pub constant_refined: f64,
    pub relative_change: f64,
    pub pass: bool,
}

/// `max |u| / ‖φ‖_∞` over `n` interior points, and the same after one
/// global refinement of the cubature mesh.
pub fn supnorm_constant(spec: &DomainSpec, form: &OneForm, n: usize, min_dist: f64, seed: u64, opts: &SolverOptions) -> Result<SupnormReport> {
    let pts = interior_points(spec, n, min_dist, seed);
    let run = |o: SolverOptions| -> Result<f64> {
        let inner = SolverOptions {
            exec: ExecMode::Sequential,
            ..o
        };
        let vals = par::map(opts.exec, &pts, |z| solve(spec, form, z, &inner).map(|s| s.value.norm()));
        let mut m = 0.0f64;
        for v in vals {
            m = m.max(v?);
        }
        Ok(m)
    };
    let a = run(*opts)?;
    let b = run(opts.refined())?;
    let c = a / form.sup_norm;
    let cr = b / form.sup_norm;
    let rel = (cr - c).abs() / c.max(f64::MIN_POSITIVE);
    Ok(SupnormReport {
        points: pts.len(),
        max_abs_u: a,
        constant: c,
        constant_refined: cr,
        relative_change: rel,
        pass: c.is_finite() && cr.is_finite() && rel <= 0.2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecadeSup {
    pub sep_lo: f64,
    pub sep_hi: f64,
    pub pairs: usize,
    pub sup: f64,
    /// Supremum over this and all larger separations.
    pub cumulative_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub pairs: usize,
    pub variant: Variant,
    pub sup: f64,
    pub decades: Vec<DecadeSup>,
    /// Largest ratio between cumulative suprema of successive decades.
    pub cumulative_growth: f64,
    pub pass: bool,
}

/// Modulus variant matching the domain shape.
pub fn holder_variant(spec: &DomainSpec) -> Variant {
    match spec.shape {
        Shape::Modulus => Variant::CaseI,
        Shape::RealPart => Variant::CaseII,
    }
}

/// `f(|h|⁻¹)|u(z + h) − u(z)| / ‖φ‖_∞` over pairs with `|h|` log-uniform
/// in `[1e−4, 1e−1]`; `bases` base points each get `per_base` offsets.
pub fn holder_sweep(
    spec: &DomainSpec,
    form: &OneForm,
    bases: usize,
    per_base: usize,
    min_dist: f64,
    seed: u64,
    opts: &SolverOptions,
) -> Result<HolderReport> {
    let variant = holder_variant(spec);
    let mspec = crate::profiles::ModulusSpec::from_d_range(variant, 1e-5, 0.5)?;
    let base = interior_points(spec, bases, min_dist, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let mut pairs: Vec<(usize, ComplexPoint, f64)> = Vec::new();
    for (i, z) in base.iter().enumerate() {
        let mut got = 0;
        let mut tries = 0;
        while got < per_base && tries < 1000 {
            tries += 1;
            let sep = 10f64.powf(-4.0 + 3.0 * rng.random::<f64>());
            let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nv < 1e-3 || nv > 1.0 {
                continue;
            }
            let y = ComplexPoint::from_reals(
                z.z1.re + sep * v[0] / nv,
                z.z1.im + sep * v[1] / nv,
                z.z2.re + sep * v[2] / nv,
                z.z2.im + sep * v[3] / nv,
            );
            if distance_proxy(spec, &y).map_or(false, |d| d >= min_dist) {
                pairs.push((i, y, sep));
                got += 1;
            }
        }
    }
    let inner = SolverOptions {
        exec: ExecMode::Sequential,
        ..*opts
    };
    let ub: Vec<Result<C64>> = par::map(opts.exec, &base, |z| solve(spec, form, z, &inner).map(|s| s.value));
    let ub = ub.into_iter().collect::<Result<Vec<_>>>()?;
    let up: Vec<Result<C64>> = par::map(opts.exec, &pairs, |(_, y, _)| solve(spec, form, y, &inner).map(|s| s.value));
    let up = up.into_iter().collect::<Result<Vec<_>>>()?;
    let mut decades: Vec<DecadeSup> = (0..3)
        .map(|k| DecadeSup {
            sep_lo: 10f64.powi(-4 + k),
            sep_hi: 10f64.powi(-3 + k),
            pairs: 0,
            sup: 0.0,
            cumulative_sup: 0.0,
        })
        .collect();
    let mut sup = 0.0f64;
    for ((i, _, sep), u) in pairs.iter().zip(&up) {
        let f = crate::profiles::eval_modulus(&spec.profile, &mspec, *sep)?;
        let r = f * (u - ub[*i]).norm() / form.sup_norm;
        sup = sup.max(r);
        let b = ((sep.log10() + 4.0).floor().clamp(0.0, 2.0)) as usize;
        decades[b].pairs += 1;
        decades[b].sup = decades[b].sup.max(r);
    }
    let mut acc = 0.0f64;
    for d in decades.iter_mut().rev() {
        acc = acc.max(d.sup);
        d.cumulative_sup = acc;
    }
    let growth = decades
        .windows(2)
        .map(|w| w[0].cumulative_sup / w[1].cumulative_sup.max(f64::MIN_POSITIVE))
        .fold(1.0, f64::max);
    Ok(HolderReport {
        pairs: pairs.len(),
        variant,
        sup,
        decades,
        cumulative_growth: growth,
        pass: sup.is_finite() && growth <= 1.2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub z: ComplexPoint,
    pub varrho: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub panels: usize,
}

/// `z = (0, 1 − √(1 − ϱ))`, the point on the `z₂`-axis with `ρ(z) = −ϱ`.
pub fn probe_point(varrho: f64) -> ComplexPoint {
    ComplexPoint::from_reals(0.0, 0.0, 1.0 - (1.0 - varrho).sqrt(), 0.0)
}

/// Lower bound for `|Re Φ|` used by the probes.
fn taylor_lower(spec: &DomainSpec, varrho: f64, z1: C64, zeta1: C64) -> f64 {
    let f = &spec.profile;
    match spec.shape {
        Shape::Modulus => varrho + f.df(zeta1.norm_sqr()) * (z1 - zeta1).norm_sqr(),
        Shape::RealPart => varrho + f.df(zeta1.re * zeta1.re) * (z1.re - zeta1.re).powi(2),
    }
}

/// Polar integral `∫ g(ζ₁) dA/|ζ₁ − z₁|` over `|ζ₁| < δ`, `|ζ₁ − z₁| < ε`.
fn polar_disc(spec: &DomainSpec, z1: C64, scale: f64, g: &dyn Fn(C64) -> f64) -> Result<(f64, usize)> {
    let eps = spec.epsilon;
    let delta = spec.delta;
    let gk = GkOptions {
        abs_tol: 0.0,
        rel_tol: 1e-9,
        max_intervals: 2000,
    };
    let panels = std::cell::Cell::new(0usize);
    let failed = std::cell::Cell::new(false);
    let radial = |th: f64| {
        let e = C64::from_polar(1.0, th);
        // Exit of |z₁ + s e| < δ.
        let b = (z1.conj() * e).re;
        let c = z1.norm_sqr() - delta * delta;
        let disc = b * b - c;
        let s_max = if disc <= 0.0 { 0.0 } else { (-b + disc.sqrt()).max(0.0) }.min(eps);
        let mut total = 0.0;
        let mut a = 0.0;
        let mut hi = scale.min(s_max);
        while a < s_max {
            let q = adaptive_gk(|s: f64| g(z1 + e * s), a, hi, gk);
            panels.set(panels.get() + q.intervals);
            failed.set(failed.get() || !q.converged);
            total += q.value;
            a = hi;
            hi = (2.0 * hi).min(s_max);
        }
        total
    };
    let mut total = 0.0;
    // Breakpoints where the RealPart bound degenerates (cos θ = 0).
    let cuts = [0.0, 0.5 * PI, PI, 1.5 * PI, 2.0 * PI];
    for w in cuts.windows(2) {
        let q = adaptive_gk(&radial, w[0], w[1], gk);
        panels.set(panels.get() + q.intervals);
        failed.set(failed.get() || !q.converged);
        total += q.value;
    }
    if failed.get() || !total.is_finite() {
        return Err(Error::Divergence("probe integral did not converge".into()));
    }
    Ok((total, panels.get()))
}

/// `M(z) = ∫ dA/(|Re Φ|·|ζ₁ − z₁|)` with `|Re Φ|` replaced by its quadratic
/// lower bound, against `√F*(ϱ)/ϱ` (Modulus) or `√F*(ϱ)|ln √F*(ϱ)|/ϱ`.
pub fn gradient_bound_probe(spec: &DomainSpec, z: &ComplexPoint) -> Result<ProbeResult> {
    let varrho = -rho(spec, z);
    if !(varrho > 0.0) {
        return Err(Error::Region("probe point must be interior".into()));
    }
    let s0 = spec.profile.fstar(varrho)?.sqrt();
    let g = |zeta1: C64| 1.0 / taylor_lower(spec, varrho, z.z1, zeta1);
    let (lhs, panels) = polar_disc(spec, z.z1, s0, &g)?;
    let rhs = match spec.shape {
        Shape::Modulus => s0 / varrho,
        Shape::RealPart => s0 * s0.ln().abs() / varrho,
    };
    Ok(ProbeResult {
        z: *z,
        varrho,
        lhs,
        rhs,
        ratio: lhs / rhs,
        panels,
    })
}

/// `1 + ∫ |ln |Re Φ|| dA/|ζ₁ − z₁|` (same lower bound) against the
/// integrability constant of the matching modulus case.
pub fn supnorm_probe(spec: &DomainSpec, z: &ComplexPoint) -> Result<ProbeResult> {
    let varrho = -rho(spec, z);
    if !(varrho > 0.0) {
        return Err(Error::Region("probe point must be interior".into()));
    }
    let s0 = spec.profile.fstar(varrho)?.sqrt();
    let g = |zeta1: C64| taylor_lower(spec, varrho, z.z1, zeta1).ln().abs();
    let (int, panels) = polar_disc(spec, z.z1, s0, &g)?;
    let lhs = 1.0 + int;
    let d = spec.profile.t_max().sqrt().min(spec.epsilon);
    let h = hypothesis_integral(&spec.profile, holder_variant(spec), d)?;
    if !h.converged {
        return Err(Error::Divergence("integrability hypothesis fails".into()));
    }
    Ok(ProbeResult {
        z: *z,
        varrho,
        lhs,
        rhs: h.value,
        ratio: lhs / h.value,
        panels,
    })
}
