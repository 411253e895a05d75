use moduli::inhibitor::{derivative, evaluate, InhibitorKind, InhibitorSpec};
use proptest::prelude::*;

mod common;
use common::inhibitor_fd;

fn f(spec: &InhibitorSpec, d: f64) -> f64 {
    evaluate(spec, d).unwrap()
}

fn specs() -> impl Strategy<Value = Vec<InhibitorSpec>> {
    (0.1f64..10.0, 0.2f64..3.0, 0.1f64..4.0, 1.0f64..3.0, 0.2f64..3.0).prop_map(|(c, s1, gap, n, mu)| {
        vec![
            InhibitorSpec::dog(c, s1, s1 + gap).unwrap(),
            InhibitorSpec::ricker(c, s1 + 0.3).unwrap(),
            InhibitorSpec::diffusion(c, n).unwrap(),
            InhibitorSpec::sinusoid(c, mu).unwrap(),
            InhibitorSpec::constant(c).unwrap(),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn derivative_matches_finite_differences(specs in specs(), d in 0.01f64..20.0) {
        for s in &specs {
            let an = derivative(s, d).unwrap();
            prop_assert!(!an.degenerate);
            let num = inhibitor_fd(s, d);
            let err = (an.value - num).abs();
            prop_assert!(
                err <= 1e-6 * num.abs() || err <= 1e-9 * (1.0 + f(s, d).abs()),
                "{:?} at d={}: analytic {} numeric {}", s.kind, d, an.value, num
            );
        }
    }

    #[test]
    fn ranges_and_monotonicity(specs in specs(), a in 0.0f64..20.0, b in 0.0f64..20.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        for s in &specs {
            let (va, vb) = (f(s, lo), f(s, hi));
            match s.kind {
                InhibitorKind::DoG | InhibitorKind::Sinusoid => {
                    prop_assert!((0.0..=2.0 * s.c).contains(&va));
                    prop_assert!((0.0..=2.0 * s.c).contains(&vb));
                }
                InhibitorKind::Constant => {
                    prop_assert_eq!(va, s.c);
                    prop_assert_eq!(vb, s.c);
                }
                InhibitorKind::Diffusion => prop_assert!(va <= vb),
                InhibitorKind::Ricker => {}
            }
            prop_assert_eq!(
                s.is_monotone(),
                matches!(s.kind, InhibitorKind::Diffusion | InhibitorKind::Constant)
            );
        }
    }

    #[test]
    fn clamped_ricker_is_nonnegative(c in 0.1f64..10.0, sigma in 0.2f64..3.0, d in 0.0f64..20.0) {
        let s = InhibitorSpec::ricker(c, sigma).unwrap().with_clamp(true);
        prop_assert!(f(&s, d) >= 0.0);
        let raw = InhibitorSpec::ricker(c, sigma).unwrap();
        prop_assert_eq!(f(&s, d), f(&raw, d).max(0.0));
    }
}
