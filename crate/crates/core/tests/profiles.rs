use dbar_core::profiles::{
    asymptotic_exponent, eval_F, eval_Fstar, eval_modulus, hypothesis_integral, ln_modulus,
    modulus_identity, tabulate_modulus, GrowthModel, ModulusSpec, ProfileConfig, TypeProfile,
    Variant,
};
use dbar_core::Error;
use proptest::prelude::*;

fn profiles() -> Vec<TypeProfile> {
    vec![
        TypeProfile::power(1.0).unwrap(),
        TypeProfile::power(2.0).unwrap(),
        TypeProfile::power(4.0).unwrap(),
        TypeProfile::exp(0.25, 2.0).unwrap(),
        TypeProfile::exp(0.5, 2.0).unwrap(),
        TypeProfile::exp(0.5, 1.0).unwrap(),
        TypeProfile::exp(0.75, 2.0).unwrap(),
        TypeProfile::log_exp(3.0).unwrap(),
        TypeProfile::custom(|u| u * u * (1.0 + u), 0.5).unwrap(),
    ]
}

/// Plain bisection on F, independent of the library's inverses.
fn bisect(f: impl Fn(f64) -> f64, rho: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, hi);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < rho {
            lo = mid
        } else {
            hi = mid
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn eval_f_examples() {
    let p = TypeProfile::power(1.0).unwrap();
    assert_eq!(eval_F(&p, 0.25).unwrap(), 0.25);
    let e = TypeProfile::exp(0.5, 2.0).unwrap();
    let want = 2.0 * (-10.0f64).exp();
    assert!((eval_F(&e, 1e-4).unwrap() - want).abs() < 1e-15 * want.max(1.0));
    assert!((eval_F(&e, 1e-4).unwrap() - 9.0800e-5).abs() < 1e-8);
    for p in profiles() {
        assert_eq!(eval_F(&p, 0.0).unwrap(), 0.0);
        assert!(matches!(eval_F(&p, -1e-3), Err(Error::Domain { .. })));
        assert!(matches!(eval_F(&p, 2.0 * p.t_max()), Err(Error::Domain { .. })));
    }
}

#[test]
fn eval_fstar_examples() {
    let p = TypeProfile::power(2.0).unwrap();
    assert!((eval_Fstar(&p, 0.04).unwrap() - 0.2).abs() < 1e-15);
    let e = TypeProfile::exp(0.5, 2.0).unwrap();
    let rho = 2.0 * (-10.0f64).exp();
    let got = eval_Fstar(&e, rho).unwrap();
    assert!((got - 1e-4).abs() < 1e-10 * 1e-4);
    let oracle = bisect(|u| 2.0 * (-u.powf(-0.25)).exp(), rho, e.t_max());
    assert!((got - oracle).abs() < 1e-12 * oracle);
    assert!(matches!(
        eval_Fstar(&e, 2.0 * e.f_at_t_max()),
        Err(Error::Range { .. })
    ));
}

#[test]
fn inverse_round_trip_on_log_grid() {
    for p in profiles() {
        // Lower end where F is still a normal float.
        let t_lo = p.fstar(1e-290).unwrap().max(p.t_max() * 1e-12);
        for i in 0..100 {
            let s = i as f64 / 99.0;
            let t = t_lo * (p.t_max() / t_lo).powf(s);
            let t = t.min(p.t_max());
            let rho = eval_F(&p, t).unwrap();
            let back = eval_Fstar(&p, rho).unwrap();
            assert!(
                (back - t).abs() / t <= 1e-10,
                "{} t={t} back={back}",
                p.label()
            );
            assert!((eval_F(&p, back.min(p.t_max())).unwrap() - rho).abs() <= 1e-12 * rho.max(1e-300) * 1e3);
        }
    }
}

#[test]
fn structural_hypotheses_hold_on_samples() {
    for p in profiles() {
        p.validate().unwrap();
        for i in 1..=200 {
            let u = p.t_max() * (i as f64 / 200.0).powi(3);
            let f = p.f(u);
            // t F'(t) >= F(t), checked with a finite-difference derivative.
            let h = 1e-6 * u;
            let fd = (p.f(u + h) - p.f(u - h)) / (2.0 * h);
            assert!(u * fd >= f * (1.0 - 1e-6) - 1e-300, "{} u={u}", p.label());
        }
    }
}

#[test]
fn custom_profiles_are_validated() {
    assert!(TypeProfile::custom(|u| u.sqrt(), 1.0).is_err());
    assert!(TypeProfile::custom(|u| u * u + 0.1, 1.0).is_err());
    let c = TypeProfile::custom(|u| u * u, 1.0).unwrap();
    assert!((c.df(0.5) - 1.0).abs() < 1e-6);
    assert!((c.d2f(0.5) - 2.0).abs() < 1e-5);
    assert!((eval_Fstar(&c, 0.25).unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn profiles_round_trip_through_text_config() {
    let json = r#"{"kind":"exp","alpha":0.5,"scale":2.0}"#;
    let p: TypeProfile = serde_json::from_str(json).unwrap();
    assert!((p.t_max() - 0.0016).abs() < 1e-11);
    let back = serde_json::to_string(&p).unwrap();
    let q: TypeProfile = serde_json::from_str(&back).unwrap();
    assert_eq!(p.t_max(), q.t_max());
    let cfg: ProfileConfig = serde_json::from_str(r#"{"kind":"logexp","alpha":3.0}"#).unwrap();
    assert!(cfg.t_max.is_none());
    assert!(serde_json::from_str::<TypeProfile>(r#"{"kind":"power","m":0.5}"#).is_err());
    let c = TypeProfile::custom(|u| u * u, 1.0).unwrap();
    assert!(serde_json::to_string(&c).is_err());
}

#[test]
fn hypothesis_integral_examples() {
    let p = TypeProfile::power(1.0).unwrap();
    let h = hypothesis_integral(&p, Variant::CaseI, 0.1).unwrap();
    let want = 2.0 * (0.1 - 0.1 * 0.1f64.ln());
    assert!(h.converged);
    assert!((h.value - want).abs() < 1e-9, "{} vs {want}", h.value);
    assert!((h.value - 0.66052).abs() < 1e-5);

    let e = TypeProfile::exp(0.5, 2.0).unwrap();
    let delta = 0.04;
    let h = hypothesis_integral(&e, Variant::CaseI, delta).unwrap();
    // ∫₀^δ (t^{-α} - ln scale) dt
    let want = delta.powf(0.5) / 0.5 - delta * 2.0f64.ln();
    assert!(h.converged);
    assert!((h.value - want).abs() < 1e-9, "{} vs {want}", h.value);

    let e1 = TypeProfile::exp(1.0, 1.0).unwrap();
    let h = hypothesis_integral(&e1, Variant::CaseI, 0.1).unwrap();
    assert!(!h.converged);

    // |ln t| |ln F(t²)| = 1/(t |ln t|^{α-1}): integrable iff α > 2.
    let l3 = TypeProfile::log_exp(3.0).unwrap();
    let d = l3.t_max().sqrt();
    assert!(hypothesis_integral(&l3, Variant::CaseII, d).unwrap().converged);
    let l2 = TypeProfile::log_exp(2.0).unwrap();
    let d2 = l2.t_max().sqrt();
    assert!(hypothesis_integral(&l2, Variant::CaseI, d2).unwrap().converged);
    assert!(!hypothesis_integral(&l2, Variant::CaseII, d2).unwrap().converged);

    // CaseII for the power profile: ∫₀^δ 2|ln t|² dt = 2δ(ln²δ − 2 ln δ + 2).
    let h = hypothesis_integral(&p, Variant::CaseII, 0.1).unwrap();
    let l = 0.1f64.ln();
    let want = 2.0 * 0.1 * (l * l - 2.0 * l + 2.0);
    assert!((h.value - want).abs() < 1e-9 * want);

    assert!(hypothesis_integral(&p, Variant::CaseI, 2.0).is_err());
}

#[test]
fn modulus_examples() {
    let p = TypeProfile::power(1.0).unwrap();
    let spec = ModulusSpec::from_d_range(Variant::CaseI, 1e-300, 0.5).unwrap();
    let f = eval_modulus(&p, &spec, 0.01).unwrap();
    assert!((f - 5.0).abs() < 1e-8 * 5.0, "{f}");

    // Power m: f = d^{-1/(2m)}/(2m).
    for m in [1.0, 2.0, 4.0] {
        let p = TypeProfile::power(m).unwrap();
        for d in [1e-2f64, 1e-8, 1e-40, 1e-200] {
            let want = d.powf(-1.0 / (2.0 * m)) / (2.0 * m);
            let got = eval_modulus(&p, &spec, d).unwrap();
            assert!((got - want).abs() < 1e-8 * want, "m={m} d={d}");
        }
    }

    // CaseII power: 1/f = d^a (ln(1/d) + 1/a), a = 1/(2m).
    let spec2 = ModulusSpec::from_d_range(Variant::CaseII, 1e-300, 0.5).unwrap();
    for m in [1.0, 2.0] {
        let p = TypeProfile::power(m).unwrap();
        let a = 0.5 / m;
        for d in [1e-3f64, 1e-30] {
            let want = 1.0 / (d.powf(a) * (-d.ln() + 1.0 / a));
            let got = eval_modulus(&p, &spec2, d).unwrap();
            assert!((got - want).abs() < 1e-8 * want);
        }
    }

    // Neumann, m = 2, d = 0.0016: 1/√(d^{1/2}) = 5.
    let p2 = TypeProfile::power(2.0).unwrap();
    let specn = ModulusSpec::from_d_range(Variant::Neumann, 1e-10, 0.5).unwrap();
    assert!((eval_modulus(&p2, &specn, 0.0016).unwrap() - 5.0).abs() < 1e-12);

    assert!(matches!(
        eval_modulus(&p2, &specn, 1e-20),
        Err(Error::Domain { .. })
    ));
}

#[test]
fn exp_modulus_tracks_log_power() {
    let e = TypeProfile::exp(0.5, 2.0).unwrap();
    let spec = ModulusSpec::from_d_range(Variant::CaseI, 1e-12, 1e-4).unwrap();
    let mut ratios = Vec::new();
    for i in 0..=16 {
        let d = 10f64.powf(-4.0 - 8.0 * i as f64 / 16.0);
        let f = eval_modulus(&e, &spec, d).unwrap();
        // Oracle: e^{-w} = (λ + ln 2)^{-2}, so f = Λ + ln 2.
        let lam = -d.ln();
        assert!((f - (lam + 2.0f64.ln())).abs() < 1e-8 * f);
        ratios.push(f / lam.powf(1.0 / 0.5 - 1.0));
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 1.05, "{}", max / min);
}

#[test]
fn divergent_moduli_are_reported() {
    let e1 = TypeProfile::exp(1.0, 1.0).unwrap();
    assert!(matches!(
        ln_modulus(&e1, Variant::CaseI, 3.0),
        Err(Error::Divergence(_))
    ));
    let l2 = TypeProfile::log_exp(2.0).unwrap();
    assert!(matches!(
        ln_modulus(&l2, Variant::CaseII, 400.0),
        Err(Error::Divergence(_))
    ));
}

#[test]
fn moduli_increase_with_separation_inverse() {
    for p in profiles() {
        for v in [Variant::CaseI, Variant::CaseII, Variant::Neumann] {
            let spec = ModulusSpec::default_for(&p, v);
            let table = tabulate_modulus(&p, &spec, 30).unwrap();
            for w in table.windows(2) {
                assert!(w[1].ln_f >= w[0].ln_f - 1e-12, "{} {v:?}", p.label());
            }
            assert!(table.last().unwrap().ln_f > table[0].ln_f);
        }
    }
}

#[test]
fn asymptotic_exponents_match_examples() {
    let p = TypeProfile::power(1.0).unwrap();
    let fit = asymptotic_exponent(&p, &ModulusSpec::default_for(&p, Variant::CaseI)).unwrap();
    assert_eq!(fit.model, GrowthModel::PowerOfD);
    assert!((fit.exponent - 0.5).abs() < 0.02);

    for alpha in [0.25, 0.5, 0.75] {
        let e = TypeProfile::exp(alpha, 2.0).unwrap();
        let fit = asymptotic_exponent(&e, &ModulusSpec::default_for(&e, Variant::CaseI)).unwrap();
        assert_eq!(fit.model, GrowthModel::PowerOfLog);
        let want = 1.0 / alpha - 1.0;
        assert!((fit.exponent - want).abs() < 0.05 * want.max(1.0), "{alpha} {fit:?}");
    }

    let l = TypeProfile::log_exp(3.0).unwrap();
    let fit = asymptotic_exponent(&l, &ModulusSpec::default_for(&l, Variant::CaseII)).unwrap();
    assert_eq!(fit.model, GrowthModel::PowerOfLogLog);
    assert!((fit.exponent - 1.0).abs() < 0.1, "{fit:?}");
    let fit = asymptotic_exponent(&l, &ModulusSpec::default_for(&l, Variant::CaseI)).unwrap();
    assert_eq!(fit.model, GrowthModel::PowerOfLogLog);
    assert!((fit.exponent - 2.0).abs() < 0.1, "{fit:?}");

    // Scale does not change the exponent.
    let e1 = TypeProfile::exp(0.5, 1.0).unwrap();
    let a = asymptotic_exponent(&e1, &ModulusSpec::default_for(&e1, Variant::CaseI)).unwrap();
    let e2 = TypeProfile::exp(0.5, 2.0).unwrap();
    let b = asymptotic_exponent(&e2, &ModulusSpec::default_for(&e2, Variant::CaseI)).unwrap();
    assert!((a.exponent - b.exponent).abs() < 1e-3);
}

#[test]
fn case_two_fit_pins_the_log_correction() {
    let p = TypeProfile::power(1.0).unwrap();
    let fit = asymptotic_exponent(&p, &ModulusSpec::default_for(&p, Variant::CaseII)).unwrap();
    assert_eq!(fit.model, GrowthModel::PowerOfD);
    assert!((fit.exponent - 0.5).abs() < 0.02);
    let e = TypeProfile::exp(0.5, 2.0).unwrap();
    let fit = asymptotic_exponent(&e, &ModulusSpec::default_for(&e, Variant::CaseII)).unwrap();
    assert_eq!(fit.model, GrowthModel::PowerOfLog);
    assert!((fit.exponent - 1.0).abs() < 0.05, "{fit:?}");
}

#[test]
fn integration_by_parts_identity() {
    for p in [
        TypeProfile::power(1.0).unwrap(),
        TypeProfile::power(2.0).unwrap(),
        TypeProfile::exp(0.5, 2.0).unwrap(),
        TypeProfile::exp(0.75, 2.0).unwrap(),
        TypeProfile::log_exp(3.0).unwrap(),
    ] {
        for d in [1e-3, 1e-6, 1e-12] {
            let c = modulus_identity(&p, d).unwrap();
            assert!(c.rel_err < 1e-6, "{} d={d} {c:?}", p.label());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn power_round_trip(m in 1.0f64..6.0, s in 0.0f64..1.0) {
        let p = TypeProfile::power(m).unwrap();
        let t = 10f64.powf(-12.0 * s);
        let back = eval_Fstar(&p, eval_F(&p, t).unwrap()).unwrap();
        prop_assert!((back - t).abs() <= 1e-10 * t);
    }

    #[test]
    fn exp_round_trip(alpha in 0.3f64..1.0, scale in 0.5f64..4.0, s in 0.0f64..1.0) {
        let p = TypeProfile::exp(alpha, scale).unwrap();
        let t_lo = p.fstar(1e-290).unwrap().max(p.t_max() * 1e-9);
        let t = t_lo * (p.t_max() / t_lo).powf(s);
        let back = eval_Fstar(&p, eval_F(&p, t).unwrap()).unwrap();
        prop_assert!((back - t).abs() <= 1e-10 * t);
    }

    #[test]
    fn continued_profile_is_convex_and_star_shaped(alpha in 0.3f64..1.0, k in 1.0f64..100.0) {
        let p = TypeProfile::exp(alpha, 2.0).unwrap();
        let u1 = p.t_max() * k;
        let u2 = u1 * 1.5;
        let mid = p.f(0.5 * (u1 + u2));
        prop_assert!(mid <= 0.5 * (p.f(u1) + p.f(u2)) + 1e-12);
        prop_assert!(p.f(u1) / u1 <= p.f(u2) / u2 + 1e-12);
        let back = p.fstar(p.f(u1)).unwrap();
        prop_assert!((back - u1).abs() <= 1e-10 * u1);
    }

    #[test]
    fn modulus_is_monotone(m in 1.0f64..4.0, mu1 in 0.5f64..6.0, dmu in 0.01f64..1.0) {
        let p = TypeProfile::power(m).unwrap();
        let a = ln_modulus(&p, Variant::CaseI, mu1).unwrap();
        let b = ln_modulus(&p, Variant::CaseI, mu1 + dmu).unwrap();
        prop_assert!(b >= a);
    }
}
