//! Weights `Φ^δ = exp(ρ/δ + 1) − exp(−x₁²/(4F*(δ)))` on the collar
//! `S_δ = {−δ ≤ ρ ≤ 0}`, their Levi form, and the superlogarithmic test.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{grad_rho, levi_terms, rho, ComplexPoint, DomainSpec, RModel};
use crate::profiles::TypeProfile;
use crate::{Error, Result};

type C64 = Complex64;

#[derive(Debug, Clone)]
pub struct WeightFamily {
    pub spec: DomainSpec,
    pub delta: f64,
    /// `F*(δ)`, cached.
    pub fstar_delta: f64,
}

/// Radius of the neighbourhood `U` of the origin.
pub fn u_radius(spec: &DomainSpec) -> f64 {
    spec.delta.min(0.1)
}

impl WeightFamily {
    pub fn new(spec: DomainSpec, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("collar width {delta}")));
        }
        let fstar_delta = spec.profile.fstar(delta)?;
        Ok(Self {
            spec,
            delta,
            fstar_delta,
        })
    }

    fn check(&self, z: &ComplexPoint) -> Result<f64> {
        let r = rho(&self.spec, z);
        // Relative slack for points placed on the collar edges by construction.
        let slack = 1e-12 * self.delta;
        if !(r >= -self.delta - slack && r <= slack) {
            return Err(Error::Region(format!(
                "rho = {r:e} outside [-{:e}, 0]",
                self.delta
            )));
        }
        Ok(r)
    }
}

pub fn eval_weight(w: &WeightFamily, z: &ComplexPoint) -> Result<f64> {
    let r = w.check(z)?;
    let x1 = z.z1.re;
    Ok((r / w.delta + 1.0).exp() - (-x1 * x1 / (4.0 * w.fstar_delta)).exp())
}

/// Complex Hessian `[∂²Φ^δ/∂z_i∂z̄_j]` in closed form.
pub fn levi_matrix(w: &WeightFamily, z: &ComplexPoint) -> Result<[[C64; 2]; 2]> {
    let r = w.check(z)?;
    let d = w.delta;
    let c = w.fstar_delta;
    let e = (r / d + 1.0).exp();
    let l = levi_terms(&w.spec, z);
    let (g1, g2) = grad_rho(&w.spec, z);
    let g = [g1, g2];
    let diag = [l.r11, l.r22];
    let x1 = z.z1.re;
    let y = x1 * x1 / (4.0 * c);
    let gauss = (-y).exp() * (1.0 - 2.0 * y) / (8.0 * c);
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let hess = if i == j { diag[i] / d } else { 0.0 };
            m[i][j] = e * (hess + g[i] * g[j].conj() / (d * d));
        }
    }
    m[0][0] += gauss;
    Ok(m)
}

fn form(m: &[[C64; 2]; 2], u: (C64, C64)) -> C64 {
    let v = [u.0, u.1];
    let mut s = C64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            s += m[i][j] * v[i] * v[j].conj();
        }
    }
    s
}

/// `Σ ∂²Φ^δ/∂z_i∂z̄_j u_i ū_j`.
pub fn levi_form(w: &WeightFamily, z: &ComplexPoint, u: (C64, C64)) -> Result<f64> {
    Ok(form(&levi_matrix(w, z)?, u).re)
}

/// Same form with the imaginary residue, for the Hermitian check.
pub fn levi_form_complex(w: &WeightFamily, z: &ComplexPoint, u: (C64, C64)) -> Result<C64> {
    Ok(form(&levi_matrix(w, z)?, u))
}

/// The weight extended off the collar, for finite differences.
fn weight_unchecked(w: &WeightFamily, x: [f64; 4]) -> f64 {
    let z = ComplexPoint::from_reals(x[0], x[1], x[2], x[3]);
    let r = rho(&w.spec, &z);
    (r / w.delta + 1.0).exp() - (-x[0] * x[0] / (4.0 * w.fstar_delta)).exp()
}

/// Complex Hessian by fourth-order finite differences of real second
/// derivatives with step `h`.
pub fn levi_matrix_fd(w: &WeightFamily, z: &ComplexPoint, h: f64) -> [[C64; 2]; 2] {
    let x0 = [z.z1.re, z.z1.im, z.z2.re, z.z2.im];
    let f = |a: usize, sa: f64, b: usize, sb: f64| {
        let mut x = x0;
        x[a] += sa;
        x[b] += sb;
        weight_unchecked(w, x)
    };
    let d2 = |a: usize, b: usize| -> f64 {
        if a == b {
            let v = |s: f64| f(a, s, a, 0.0);
            (-v(2.0 * h) + 16.0 * v(h) - 30.0 * v(0.0) + 16.0 * v(-h) - v(-2.0 * h))
                / (12.0 * h * h)
        } else {
            // Fourth-order mixed stencil from the one-dimensional weights.
            let c = [(1.0, 8.0), (2.0, -1.0)];
            let mut s = 0.0;
            for &(i, wi) in &c {
                for &(j, wj) in &c {
                    let (ii, jj) = (i * h, j * h);
                    s += wi * wj * (f(a, ii, b, jj) - f(a, ii, b, -jj) - f(a, -ii, b, jj) + f(a, -ii, b, -jj));
                }
            }
            s / (144.0 * h * h)
        }
    };
    let mut hr = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in a..4 {
            hr[a][b] = d2(a, b);
            hr[b][a] = hr[a][b];
        }
    }
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            m[i][j] = 0.25
                * C64::new(
                    hr[xi][xj] + hr[yi][yj],
                    hr[xi][yj] - hr[yi][xj],
                );
        }
    }
    m
}

/// Samples of `S_δ ∩ U`; `|x₁|` is drawn log-uniformly around `√F*(δ)` so
/// both sides of the case split are populated.
pub fn sample_collar(w: &WeightFamily, n: usize, seed: u64) -> Vec<ComplexPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ur = u_radius(&w.spec);
    let s = w.fstar_delta.sqrt();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n && attempts < 200 * n.max(1) {
        attempts += 1;
        let x1 = {
            let mag = (s * 10f64.powf(rng.random_range(-3.0..1.5))).min(ur);
            if rng.random::<bool>() { mag } else { -mag }
        };
        let y1 = rng.random_range(-ur..ur);
        let z1 = C64::new(x1, y1);
        let target = -w.delta * rng.random::<f64>();
        let need = target - w.spec.p(z1);
        let z2 = match w.spec.r_model {
            RModel::Ball => {
                let r2 = 1.0 + need;
                if r2 <= 0.0 {
                    continue;
                }
                let th = std::f64::consts::PI + rng.random_range(-ur..ur);
                C64::new(1.0, 0.0) + r2.sqrt() * C64::from_polar(1.0, th)
            }
            RModel::HalfSpace => C64::new(need, rng.random_range(-ur..ur)),
        };
        let z = ComplexPoint::new(z1, z2);
        if z.dist(&ComplexPoint::from_reals(0.0, 0.0, 0.0, 0.0)) > ur {
            continue;
        }
        if w.check(&z).is_ok() {
            out.push(z);
        }
    }
    out
}

fn unit_vector(rng: &mut ChaCha8Rng) -> (C64, C64) {
    loop {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return (C64::new(v[0] / n, v[1] / n), C64::new(v[2] / n, v[3] / n));
        }
    }
}

/// `A = F(x₁²)/(δ x₁²)`.
pub fn term_a(w: &WeightFamily, x1: f64) -> f64 {
    let s = x1 * x1;
    if s == 0.0 {
        return w.spec.profile.df(0.0) / w.delta;
    }
    w.spec.profile.f(s) / (w.delta * s)
}

/// `B = (1 − x₁²/(2F*)) e^{−x₁²/(4F*)} / (4F*)`; the exact
/// Gaussian coefficient of the Levi form is `B/2`.
pub fn term_b(w: &WeightFamily, x1: f64) -> f64 {
    let c = w.fstar_delta;
    let s = x1 * x1;
    (1.0 - s / (2.0 * c)) * (-s / (4.0 * c)).exp() / (4.0 * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollarRow {
    pub delta: f64,
    pub fstar_delta: f64,
    pub samples: usize,
    /// `min levi_form · F*(δ)` over unit `u`.
    pub min_scaled: f64,
    pub case1_samples: usize,
    /// `min B·F*(δ)` on `x₁² ≤ F*(δ)`; bound `e^{−1/4}/8`.
    pub case1_b_min: f64,
    pub case2_samples: usize,
    /// `min A·F*(δ)` on `x₁² ≥ F*(δ)`; bound `1`.
    pub case2_a_min: f64,
    /// `min B·F*(δ)` on `x₁² ≥ F*(δ)`; bound `−e^{−3/2}/2`.
    pub case2_b_min: f64,
    pub max_weight: f64,
    /// Largest `|Im|` of the form relative to its matrix scale.
    pub hermitian_residue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verify58Report {
    pub rows: Vec<CollarRow>,
    /// Recorded constant: smallest `min_scaled` over the `δ` list.
    pub c0: f64,
    pub cases_hold: bool,
    pub bounded: bool,
    pub pass: bool,
}

/// `e^{−1/4}/8`
pub fn case1_b_bound() -> f64 {
    (-0.25f64).exp() / 8.0
}

/// `−e^{−3/2}/2`
pub fn case2_b_bound() -> f64 {
    -(-1.5f64).exp() / 2.0
}

pub fn verify_58(spec: &DomainSpec, delta_list: &[f64], n_samples: usize, seed: u64) -> Result<Verify58Report> {
    let mut rows = Vec::with_capacity(delta_list.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d);
    for (k, &delta) in delta_list.iter().enumerate() {
        let w = WeightFamily::new(spec.clone(), delta)?;
        let pts = sample_collar(&w, n_samples, seed.wrapping_add(k as u64));
        let c = w.fstar_delta;
        let mut row = CollarRow {
            delta,
            fstar_delta: c,
            samples: pts.len(),
            min_scaled: f64::INFINITY,
            case1_samples: 0,
            case1_b_min: f64::INFINITY,
            case2_samples: 0,
            case2_a_min: f64::INFINITY,
            case2_b_min: f64::INFINITY,
            max_weight: 0.0,
            hermitian_residue: 0.0,
        };
        for z in &pts {
            let m = levi_matrix(&w, z)?;
            let u = unit_vector(&mut rng);
            let q = form(&m, u);
            let scale = m.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
            row.hermitian_residue = row.hermitian_residue.max(q.im.abs() / scale);
            // Smallest eigenvalue of the Hermitian 2×2 bounds every unit direction.
            let (a, d, b) = (m[0][0].re, m[1][1].re, m[0][1]);
            let lam_min = 0.5 * (a + d) - (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
            row.min_scaled = row.min_scaled.min(lam_min.min(q.re) * c);
            row.max_weight = row.max_weight.max(eval_weight(&w, z)?.abs());
            let x1 = z.z1.re;
            if x1 * x1 <= c {
                row.case1_samples += 1;
                row.case1_b_min = row.case1_b_min.min(term_b(&w, x1) * c);
            } else {
                row.case2_samples += 1;
                row.case2_a_min = row.case2_a_min.min(term_a(&w, x1) * c);
                row.case2_b_min = row.case2_b_min.min(term_b(&w, x1) * c);
            }
        }
        rows.push(row);
    }
    let c0 = rows.iter().map(|r| r.min_scaled).fold(f64::INFINITY, f64::min);
    let tol = 1e-12;
    // A case region may be empty inside U (x₁² ≥ F*(δ) needs |x₁| ≥ √F*(δ));
    // the scalar sweep covers both regions for every δ regardless.
    let sampled_ok = rows.iter().all(|r| {
        r.case1_b_min >= case1_b_bound() - tol
            && r.case2_a_min >= 1.0 - 1e-9
            && r.case2_b_min >= case2_b_bound() - tol
    });
    let mut sweep_ok = true;
    for &delta in delta_list {
        sweep_ok &= case_sweep(&WeightFamily::new(spec.clone(), delta)?, 400);
    }
    let cases_hold = sampled_ok && sweep_ok;
    let bounded = rows.iter().all(|r| r.max_weight <= std::f64::consts::E + 1.0);
    Ok(Verify58Report {
        pass: c0 > 0.0 && c0.is_finite() && cases_hold && bounded,
        rows,
        c0,
        cases_hold,
        bounded,
    })
}

/// Checks the case inequalities on `x₁² = F*(δ)·10^k`, `k ∈ [−6, 3]`.
pub fn case_sweep(w: &WeightFamily, n: usize) -> bool {
    let c = w.fstar_delta;
    (0..=n).all(|k| {
        let x1 = (c * 10f64.powf(-6.0 + 9.0 * k as f64 / n as f64)).sqrt();
        let b = term_b(w, x1) * c;
        if x1 * x1 <= c {
            b >= case1_b_bound() - 1e-12
        } else {
            term_a(w, x1) * c >= 1.0 - 1e-9 && b >= case2_b_bound() - 1e-12
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperlogReport {
    pub superlog: bool,
    /// `(t, t·|ln F(t²)|)` from `t = 1e−2` downward.
    pub witness: Vec<(f64, f64)>,
}

/// Smallest `t` on the witness grid (`λ = −ln t` up to 700).
pub const SUPERLOG_LAMBDA_MAX: f64 = 700.0;

/// `t·|ln F(t²)| → 0`, judged on a grid uniform in `λ = −ln t` from
/// `t = 1e−2` to `e^{−700}`: decreasing, and ending below `1e−3` of its
/// value at `1e−2`.
pub fn classify_superlog(profile: &TypeProfile) -> SuperlogReport {
    let lam0 = 100f64.ln();
    let n = 96;
    let witness: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let lam = lam0 + (SUPERLOG_LAMBDA_MAX - lam0) * k as f64 / (n - 1) as f64;
            (
                (-lam).exp(),
                (profile.ln_neg_ln_f_sq(lam) - lam).exp(),
            )
        })
        .collect();
    let first = witness[0].1;
    let monotone = witness.windows(2).all(|p| p[1].1 <= p[0].1 * (1.0 + 1e-12));
    let last = witness[n - 1].1;
    SuperlogReport {
        superlog: monotone && last < 1e-3 * first,
        witness,
    }
}
