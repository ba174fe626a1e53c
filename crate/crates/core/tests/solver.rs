use dbar_core::geometry::{rho, ComplexPoint, DomainSpec, Shape};
use dbar_core::profiles::TypeProfile;
use dbar_core::solver::*;
use dbar_core::{Error, ExecMode};
use num_complex::Complex64;
use proptest::prelude::*;

type C = Complex64;

const PI: f64 = std::f64::consts::PI;

fn ball() -> DomainSpec {
    DomainSpec::new(Shape::Modulus, TypeProfile::power(1.0).unwrap())
}

fn exp_spec(shape: Shape) -> DomainSpec {
    DomainSpec::new(shape, TypeProfile::exp(0.5, 1.0).unwrap())
}

fn opts(tol: f64) -> SolverOptions {
    SolverOptions::with_tol(tol)
}

fn center() -> ComplexPoint {
    ComplexPoint::from_reals(0.0, 0.0, 0.5, 0.0)
}

#[test]
fn zero_form_gives_zero() {
    let spec = ball();
    let z = ComplexPoint::from_reals(0.1, -0.05, 0.6, 0.2);
    let o = opts(1e-6);
    let s = solve(&spec, &OneForm::zero(), &z, &o).unwrap();
    assert_eq!(s.value, C::new(0.0, 0.0));
    assert_eq!(eval_k(&spec, &OneForm::zero(), &z, &o).unwrap().value, C::new(0.0, 0.0));
    assert_eq!(eval_h(&spec, &OneForm::zero(), &z, &o).unwrap().value, C::new(0.0, 0.0));
    let (a, b) = dbar_residual(&spec, &OneForm::zero(), &z, 1e-3, &o).unwrap();
    assert_eq!((a, b), (C::new(0.0, 0.0), C::new(0.0, 0.0)));
}

/// On the unit ball centred at `(0, 1)` the Newton potential of the ball
/// is `|z − c|²/8 + const`, so `K dz̄₂ = 4 ∂N/∂z₂ = (z̄₂ − 1)/2`.
#[test]
fn k_matches_newton_potential_of_the_ball() {
    let spec = ball();
    for z in [center(), ComplexPoint::from_reals(0.2, 0.1, 0.7, -0.3), ComplexPoint::from_reals(-0.4, 0.3, 1.2, 0.5)] {
        let k = eval_k(&spec, &OneForm::dzbar2(), &z, &opts(1e-8)).unwrap();
        let want = (z.z2.conj() - 1.0) / 2.0;
        assert!((k.value - want).norm() < 1e-7, "{} vs {want}", k.value);
        assert!(k.err_estimate.is_finite() && k.panels >= 1);
        assert!(k.min_separation > 0.0 && k.min_separation <= -rho(&spec, &z) + 1.0);
    }
}

/// `u = z̄₂ − 1` solves `∂̄u = dz̄₂` on the ball; with the holomorphic
/// correction fixed by the kernel the solver reproduces it exactly.
#[test]
fn ball_solution_of_dzbar2() {
    let spec = ball();
    let z = ComplexPoint::from_reals(0.05, -0.02, 0.5, 0.1);
    let s = solve(&spec, &OneForm::dzbar2(), &z, &opts(1e-8)).unwrap();
    assert!((s.value - (z.z2.conj() - 1.0)).norm() < 1e-7);
}

#[test]
fn dbar_residual_within_budget() {
    let o = opts(1e-7);
    for spec in [ball(), exp_spec(Shape::Modulus)] {
        for form in [OneForm::dzbar2(), OneForm::z2_dzbar1()] {
            let (a, b) = dbar_residual(&spec, &form, &center(), 1e-3, &o).unwrap();
            assert!(a.norm() <= 1e-2 && b.norm() <= 1e-2, "{} {}: {a} {b}", spec.label(), form.label);
            // The actual error is far inside the budget.
            assert!(a.norm().max(b.norm()) < 1e-5);
        }
    }
}

#[test]
fn real_part_residual() {
    let spec = DomainSpec::new(Shape::RealPart, TypeProfile::power(1.0).unwrap());
    let z = ComplexPoint::from_reals(0.1, 0.2, 0.6, -0.1);
    let (a, b) = dbar_residual(&spec, &OneForm::z2_dzbar1(), &z, 1e-3, &opts(1e-5)).unwrap();
    assert!(a.norm().max(b.norm()) < 1e-3, "{a} {b}");
}

#[test]
fn self_convergence_under_refinement() {
    let spec = ball();
    let tol = 1e-6;
    let o = opts(tol);
    let k0 = eval_k(&spec, &OneForm::dzbar2(), &center(), &o).unwrap();
    let k1 = eval_k(&spec, &OneForm::dzbar2(), &center(), &o.refined()).unwrap();
    let k2 = eval_k(&spec, &OneForm::dzbar2(), &center(), &o.refined().refined()).unwrap();
    assert!((k0.value - k1.value).norm() <= tol);
    assert!((k1.value - k2.value).norm() <= tol);
    let h0 = eval_h(&spec, &OneForm::dzbar2(), &center(), &o).unwrap();
    let h1 = eval_h(&spec, &OneForm::dzbar2(), &center(), &o.refined()).unwrap();
    assert!((h0.value - h1.value).norm() <= tol);
}

#[test]
fn rotated_meshes_agree_on_the_axis() {
    let tol = 1e-6;
    for spec in [ball(), exp_spec(Shape::Modulus)] {
        let z = ComplexPoint::from_reals(0.0, 0.0, 0.4, 0.0);
        let base = eval_k(&spec, &OneForm::dzbar2(), &z, &opts(tol)).unwrap().value;
        for th in [0.3, 1.1, 2.9] {
            let o = SolverOptions {
                xi_offset: [th, 0.0],
                ..opts(tol)
            };
            let v = eval_k(&spec, &OneForm::dzbar2(), &z, &o).unwrap().value;
            assert!((v - base).norm() <= tol, "theta {th}: {v} vs {base}");
        }
    }
}

#[test]
fn cutoff_section_vanishes_beyond_epsilon() {
    let spec = ball();
    let z = center();
    let o = SolverOptions {
        section: LeraySection::CutOff,
        ..opts(1e-6)
    };
    let mut far = 0;
    for i in 0..20 {
        for j in 0..20 {
            let q = [0.05 + 1.47 * i as f64 / 20.0, 0.3 * j as f64, 1.0 + 0.2 * j as f64];
            let (_, h, t) = ray_star_integrand(&spec, &OneForm::z2_dzbar1(), &z, q, &o).unwrap();
            if t >= spec.epsilon {
                far += 1;
                assert_eq!(h, C::new(0.0, 0.0));
            }
        }
    }
    assert!(far > 100);
}

#[test]
fn global_section_is_the_default() {
    assert_eq!(SolverOptions::default().section, LeraySection::Global);
}

#[test]
fn region_and_budget_errors() {
    let spec = ball();
    let outside = ComplexPoint::from_reals(0.0, 0.0, 2.5, 0.0);
    assert!(matches!(solve(&spec, &OneForm::dzbar2(), &outside, &opts(1e-6)), Err(Error::Region(_))));
    let near = ComplexPoint::from_reals(0.0, 0.0, 1e-3, 0.0);
    assert!(matches!(
        dbar_residual(&spec, &OneForm::dzbar2(), &near, 1e-3, &opts(1e-6)),
        Err(Error::Region(_))
    ));
    let tight = SolverOptions {
        max_panels: 40,
        ..opts(1e-12)
    };
    assert!(matches!(solve(&spec, &OneForm::dzbar2(), &center(), &tight), Err(Error::Budget(_))));
    let half = ball().with_r_model(dbar_core::geometry::RModel::HalfSpace);
    assert!(solve(&half, &OneForm::dzbar2(), &center(), &opts(1e-6)).is_err());
}

#[test]
fn one_form_validation() {
    let spec = ball();
    OneForm::dzbar2().validate(&spec, 50, 1).unwrap();
    OneForm::z2_dzbar1().validate(&spec, 50, 1).unwrap();
    let open = OneForm::new(|z| z.z2.conj(), |_| C::new(0.0, 0.0), 2.0, "zbar2_dzbar1");
    assert!(open.validate(&spec, 50, 1).is_err());
    let loud = OneForm::new(|_| C::new(0.0, 0.0), |_| C::new(3.0, 0.0), 1.0, "3 dzbar2");
    assert!(loud.validate(&spec, 50, 1).is_err());
}

#[test]
fn sequential_and_parallel_agree() {
    let spec = ball();
    let z = ComplexPoint::from_reals(0.1, 0.1, 0.6, 0.1);
    let p = solve(&spec, &OneForm::z2_dzbar1(), &z, &opts(1e-6)).unwrap();
    let s = solve(
        &spec,
        &OneForm::z2_dzbar1(),
        &z,
        &SolverOptions {
            exec: ExecMode::Sequential,
            ..opts(1e-6)
        },
    )
    .unwrap();
    assert_eq!(p.value, s.value);
}

#[test]
fn supnorm_constant_is_stable() {
    let spec = exp_spec(Shape::Modulus);
    let r = supnorm_constant(&spec, &OneForm::dzbar2(), 12, 0.05, 3, &opts(1e-4)).unwrap();
    assert_eq!(r.points, 12);
    assert!(r.pass, "{r:?}");
    assert!(r.constant > 0.0 && r.constant < 10.0);
}

#[test]
fn holder_sweep_small() {
    let spec = ball();
    let r = holder_sweep(&spec, &OneForm::z2_dzbar1(), 6, 6, 0.05, 5, &opts(1e-6)).unwrap();
    assert_eq!(r.pairs, 36);
    assert!(r.sup.is_finite() && r.sup > 0.0);
    assert_eq!(r.decades.iter().map(|d| d.pairs).sum::<usize>(), 36);
    assert!(r.pass, "{r:?}");
}

/// `2π arctan(a/√ϱ)/√ϱ` with `a = min(ε, δ)`: the probe integral on the
/// axis for `F(u) = u`.
#[test]
fn gradient_probe_closed_form() {
    let spec = ball();
    let a = spec.epsilon.min(spec.delta);
    for v in [1e-2, 1e-3, 1e-4] {
        let p = gradient_bound_probe(&spec, &probe_point(v)).unwrap();
        assert!((p.varrho - v).abs() < 1e-15);
        let want = 2.0 * PI * (a / v.sqrt()).atan() / v.sqrt();
        assert!((p.lhs - want).abs() < 1e-7 * want, "{} vs {want}", p.lhs);
        assert!((p.rhs - 1.0 / v.sqrt()).abs() < 1e-9 * p.rhs);
    }
}

#[test]
fn gradient_probe_ratio_bounded_and_monotone() {
    for spec in [ball(), exp_spec(Shape::Modulus), exp_spec(Shape::RealPart)] {
        let rows: Vec<_> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&v| gradient_bound_probe(&spec, &probe_point(v)).unwrap())
            .collect();
        for r in &rows {
            assert!(r.ratio <= 10.0, "{}: {r:?}", spec.label());
        }
        assert!(rows.windows(2).all(|w| w[1].lhs > w[0].lhs));
    }
}

/// Midpoint rule on a fine grid: `1 + 2π ∫₀^a |ln(ϱ + s²)| ds`.
#[test]
fn supnorm_probe_against_direct_sum() {
    let spec = ball();
    let a = spec.epsilon.min(spec.delta);
    let v = 1e-3;
    let n = 2_000_000;
    let h = a / n as f64;
    let sum: f64 = (0..n)
        .map(|k| {
            let s = (k as f64 + 0.5) * h;
            (v + s * s).ln().abs()
        })
        .sum();
    let want = 1.0 + 2.0 * PI * sum * h;
    let p = supnorm_probe(&spec, &probe_point(v)).unwrap();
    assert!((p.lhs - want).abs() < 1e-6 * want, "{} vs {want}", p.lhs);
}

#[test]
fn supnorm_probe_ratio_converges() {
    for spec in [ball(), exp_spec(Shape::Modulus), exp_spec(Shape::RealPart)] {
        let rows: Vec<_> = [1e-2, 1e-3, 1e-4, 1e-6]
            .iter()
            .map(|&v| supnorm_probe(&spec, &probe_point(v)).unwrap())
            .collect();
        assert!(rows.windows(2).all(|w| w[1].lhs > w[0].lhs));
        assert!(rows.iter().all(|r| r.rhs == rows[0].rhs && r.rhs.is_finite()));
        // Bounded: the last two decades move the ratio by under 10%.
        let (a, b) = (rows[2].ratio, rows[3].ratio);
        assert!((b - a) / a < 0.1, "{}: {a} -> {b}", spec.label());
    }
}

#[test]
fn probes_reject_exterior_points() {
    let spec = ball();
    let z = ComplexPoint::from_reals(0.0, 0.0, -0.1, 0.0);
    assert!(gradient_bound_probe(&spec, &z).is_err());
    assert!(supnorm_probe(&spec, &z).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]
    #[test]
    fn solve_is_linear(ar in -1.0f64..1.0, ai in -1.0f64..1.0, br in -1.0f64..1.0, bi in -1.0f64..1.0) {
        let spec = ball();
        let tol = 1e-6;
        let o = opts(tol);
        let z = ComplexPoint::from_reals(0.1, -0.1, 0.7, 0.2);
        let (a, b) = (C::new(ar, ai), C::new(br, bi));
        let f = OneForm::dzbar2();
        let g = OneForm::z2_dzbar1();
        let lhs = solve(&spec, &OneForm::combine(a, &f, b, &g), &z, &o).unwrap().value;
        let rhs = a * solve(&spec, &f, &z, &o).unwrap().value + b * solve(&spec, &g, &z, &o).unwrap().value;
        prop_assert!((lhs - rhs).norm() <= 2.0 * tol);
    }
}
