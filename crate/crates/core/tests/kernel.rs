use dbar_core::geometry::{rho, sample_boundary, ComplexPoint, DomainSpec, Shape};
use dbar_core::kernel::{chi, eval_kernel, sample_pairs, support_phi, verify_holomorphy, verify_lemma21};
use dbar_core::profiles::TypeProfile;
use num_complex::Complex64;
use proptest::prelude::*;

fn specs() -> Vec<DomainSpec> {
    vec![
        DomainSpec::new(Shape::Modulus, TypeProfile::power(1.0).unwrap()),
        DomainSpec::new(Shape::Modulus, TypeProfile::power(3.0).unwrap()),
        DomainSpec::new(Shape::Modulus, TypeProfile::exp(0.5, 1.0).unwrap()),
        DomainSpec::new(Shape::Modulus, TypeProfile::log_exp(3.0).unwrap()),
        DomainSpec::new(Shape::RealPart, TypeProfile::exp(0.5, 1.0).unwrap()),
    ]
}

fn zeta0(spec: &DomainSpec) -> ComplexPoint {
    sample_boundary(spec, 1, 11).unwrap()[0].point
}

#[test]
fn chi_plateaus_and_monotone() {
    assert_eq!(chi(0.0, 0.25), 1.0);
    assert_eq!(chi(0.125, 0.25), 1.0);
    assert_eq!(chi(0.25, 0.25), 0.0);
    assert_eq!(chi(1.0, 0.25), 0.0);
    assert!((chi(0.1875, 0.25) - 0.5).abs() < 1e-15);
    let mut prev = 1.0;
    for k in 0..=100 {
        let c = chi(0.25 * k as f64 / 100.0, 0.25);
        assert!(c <= prev + 1e-15);
        prev = c;
    }
}

#[test]
fn far_branch_is_conjugate_difference() {
    for spec in specs() {
        let zeta = zeta0(&spec);
        let z = ComplexPoint::new(zeta.z1, zeta.z2 - Complex64::new(0.3, 0.1));
        let k = eval_kernel(&spec, &z, &zeta);
        assert_eq!(k.chi, 0.0);
        assert_eq!(k.phi1, (zeta.z1 - z.z1).conj());
        assert_eq!(k.phi2, (zeta.z2 - z.z2).conj());
        let d2 = z.dist(&zeta).powi(2);
        assert!((k.phi_sharp.re - d2).abs() < 1e-15 && k.phi_sharp.im.abs() < 1e-15);
    }
}

#[test]
fn coincident_points_vanish() {
    for spec in specs() {
        let zeta = zeta0(&spec);
        let k = eval_kernel(&spec, &zeta, &zeta);
        assert_eq!(k.phi, Complex64::new(0.0, 0.0));
        assert_eq!(k.phi_sharp, Complex64::new(0.0, 0.0));
        assert_eq!(k.chi, 1.0);
    }
}

#[test]
fn near_branch_is_half_phi() {
    for spec in specs() {
        for p in sample_pairs(&spec, 200, 0.5 * spec.epsilon, 5) {
            let k = eval_kernel(&spec, &p.z, &p.zeta);
            assert_eq!(k.chi, 1.0);
            let half = k.phi / 2.0;
            assert!((k.phi_sharp - half).norm() <= 1e-14 * (1.0 + half.norm()));
        }
    }
}

#[test]
fn ball_decomposition_matches_direct_real_part() {
    // Re Φ = −ρ(z) + bracket + |z₂ − ζ₂|² for the Ball model.
    for spec in specs() {
        for p in sample_pairs(&spec, 300, spec.epsilon, 9) {
            let lhs = support_phi(&spec, &p.z, &p.zeta).re;
            let rhs = -rho(&spec, &p.z)
                + dbar_core::kernel::flat_bracket(&spec, &p.z, &p.zeta)
                + (p.z.z2 - p.zeta.z2).norm_sqr();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn support_lower_bound_flat_branch_modulus_10k() {
    for spec in specs().into_iter().filter(|s| s.shape == Shape::Modulus) {
        let r = verify_lemma21(&spec, 10_000, 21);
        assert!(r.samples >= 9_000, "{}", r.samples);
        assert!(r.pass, "{}: {r:?}", spec.label());
        assert_eq!(r.epsilon_halvings, 0);
        assert!(r.worst_violation <= 1e-10);
        assert!(r.consequence_worst <= 1e-10);
        assert!(r.c_best >= 0.0);
    }
}

#[test]
fn support_lower_bound_real_part_shape() {
    let spec = specs().pop().unwrap();
    let r = verify_lemma21(&spec, 2_000, 3);
    assert!(r.pass, "{r:?}");
}

#[test]
fn support_lower_bound_report_is_deterministic_and_serializable() {
    let spec = specs()[0].clone();
    let a = verify_lemma21(&spec, 500, 1);
    let b = verify_lemma21(&spec, 500, 1);
    assert_eq!(a, b);
    let j = serde_json::to_string(&a).unwrap();
    assert!(j.contains("\"c_best\"") && j.contains("\"epsilon\""));
}

#[test]
fn holomorphy_all_specs() {
    for spec in specs() {
        let r = verify_holomorphy(&spec, 60, 4);
        assert!(r.pass, "{}: {r:?}", spec.label());
        assert!(r.max_dbar_inner <= 1e-6);
        assert!(r.max_numerator_far <= 1e-14);
        // The cut-off shell is where holomorphy is genuinely lost.
        assert!(r.max_dbar_shell > 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn phi_sharp_nonzero_inside(seed in 0u64..10_000) {
        for spec in specs() {
            for p in sample_pairs(&spec, 8, spec.epsilon, seed) {
                if rho(&spec, &p.z) < -1e-12 {
                    let k = eval_kernel(&spec, &p.z, &p.zeta);
                    prop_assert!(k.phi_sharp.re > 0.0);
                    let assembled = k.phi1 * (p.zeta.z1 - p.z.z1) + k.phi2 * (p.zeta.z2 - p.z.z2);
                    prop_assert_eq!(assembled, k.phi_sharp);
                    prop_assert!((0.0..=1.0).contains(&k.chi));
                }
            }
        }
    }
}
