//! Randomized property tests for the geometric primitives.

use loewner::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn disk_point() -> impl Strategy<Value = Complex64> {
    (0.0..0.95f64, 0.0..std::f64::consts::TAU).prop_map(|(r, th)| Complex64::from_polar(r, th))
}

fn unit_modulus() -> impl Strategy<Value = Complex64> {
    (0.0..std::f64::consts::TAU).prop_map(|th| Complex64::from_polar(1.0, th))
}

proptest! {
    #[test]
    fn automorphism_round_trips(a in disk_point(), b in unit_modulus(), z in disk_point()) {
        let m = DiskAutomorphism::new(a, b).unwrap();
        let w = m.apply(z);
        prop_assert!(w.norm() < 1.0);
        let back = m.inverse_apply(w);
        prop_assert!((back - z).norm() < 1e-9);
    }

    #[test]
    fn automorphisms_preserve_pseudo_hyperbolic_distance(
        a in disk_point(), b in unit_modulus(), z in disk_point(), w in disk_point()
    ) {
        let m = DiskAutomorphism::new(a, b).unwrap();
        let before = pseudo_hyperbolic(z, w);
        let after = pseudo_hyperbolic(m.apply(z), m.apply(w));
        prop_assert!((before - after).abs() < 1e-9);
    }

    #[test]
    fn cayley_round_trips(z in disk_point()) {
        let w = cayley_to_halfplane(z);
        prop_assert!(w.im > 0.0);
        let back = cayley_from_halfplane(w).unwrap();
        prop_assert!((back - z).norm() < 1e-9);
    }

    #[test]
    fn hyperbolic_distance_is_a_metric_sample(
        z in disk_point(), w in disk_point(), u in disk_point()
    ) {
        let d = |a, b| hyperbolic_distance(a, b);
        prop_assert!(d(z, w) >= 0.0);
        prop_assert!((d(z, w) - d(w, z)).abs() < 1e-12);
        prop_assert!(d(z, w) <= d(z, u) + d(u, w) + 1e-9);
    }

    #[test]
    fn printed_expressions_reparse_to_the_same_function(
        re in -2.0..2.0f64, z in disk_point(), t in 0.0..2.0f64
    ) {
        let src = format!("({re:.6}+z)*exp(-t)/(2-z)");
        let e = Expr::parse(&src).unwrap();
        let reparsed = Expr::parse(&e.to_string()).unwrap();
        let a = e.evaluate(z, t).unwrap();
        let b = reparsed.evaluate(z, t).unwrap();
        prop_assert!((a - b).norm() < 1e-12);
    }
}
