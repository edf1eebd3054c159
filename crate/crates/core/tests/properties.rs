use casorati_core::casorati::{casorati, hyperplane_extrema};
use casorati_core::charts::builtin_chart;
use casorati_core::fixtures::{oracle8, random_orthogonal, random_symmetric};
use casorati_core::geometry::{riemann, CurvatureTensor, Vector};
use casorati_core::inequalities::algebraic_gap;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn vec8() -> impl Strategy<Value = Vector> {
    prop::collection::vec(-1.0..1.0f64, 8).prop_map(Vector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_curvature_is_inverse_radius_squared(r in 0.3..4.0f64, theta in 0.2..2.9f64, phi in -3.0..3.0f64) {
        let chart = builtin_chart(&format!("sphere:{r}")).unwrap();
        let cp = riemann(&chart, &[theta, phi]).unwrap();
        let (sym, bianchi) = cp.riemann.symmetry_residuals();
        prop_assert!(sym < 1e-9 && bianchi < 1e-9);
        let g = &cp.metric;
        let k = cp.riemann.get(0, 1, 1, 0) / (g[(0, 0)] * g[(1, 1)]);
        prop_assert!((k - 1.0 / (r * r)).abs() < 1e-8 * (1.0 + 1.0 / (r * r)));
    }

    #[test]
    fn half_plane_has_curvature_minus_one(x in -5.0..5.0f64, y in 0.1..5.0f64) {
        let cp = riemann(&builtin_chart("half-plane").unwrap(), &[x, y]).unwrap();
        let g = &cp.metric;
        let k = cp.riemann.get(0, 1, 1, 0) / (g[(0, 0)] * g[(1, 1)]);
        prop_assert!((k + 1.0).abs() < 1e-8);
    }

    #[test]
    fn qsf_tensor_has_curvature_symmetries(c in -5.0..5.0f64, x in vec8(), y in vec8(), z in vec8(), w in vec8()) {
        let o = oracle8(c).unwrap();
        let r = |a: &Vector, b: &Vector, c: &Vector, d: &Vector| o.eval(a, b, c, d);
        let base = r(&x, &y, &z, &w);
        prop_assert!((base + r(&y, &x, &z, &w)).abs() < 1e-12);
        prop_assert!((base + r(&x, &y, &w, &z)).abs() < 1e-12);
        prop_assert!((base - r(&z, &w, &x, &y)).abs() < 1e-12);
        let bianchi = base + r(&y, &z, &x, &w) + r(&z, &x, &y, &w);
        prop_assert!(bianchi.abs() < 1e-12);
    }

    #[test]
    fn casorati_is_quadratic_and_rotation_invariant(seed in any::<u64>(), lambda in -3.0..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_symmetric(&mut rng, 5, 2);
        let base = casorati(&h);
        prop_assert!((casorati(&h.scaled(lambda)) - lambda * lambda * base).abs() < 1e-12 * (1.0 + base));
        let q = random_orthogonal(&mut rng, 5);
        prop_assert!((casorati(&h.rotated(&q)) - base).abs() < 1e-12 * (1.0 + base));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extrema_scale_quadratically(seed in any::<u64>(), lambda in 0.1..5.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_symmetric(&mut rng, 6, 2);
        let a = hyperplane_extrema(&h).unwrap();
        let b = hyperplane_extrema(&h.scaled(lambda)).unwrap();
        let l2 = lambda * lambda;
        prop_assert!((b.inf_cl - l2 * a.inf_cl).abs() < 1e-8 * l2 * (1.0 + a.inf_cl));
        prop_assert!((b.sup_cl - l2 * a.sup_cl).abs() < 1e-8 * l2 * (1.0 + a.sup_cl));
        prop_assert!(a.inf_cl <= a.sup_cl);
    }

    #[test]
    fn algebraic_gap_is_nonnegative(seed in any::<u64>(), n in 4usize..7, codim in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = random_symmetric(&mut rng, n, codim);
        let (lhs, d, dh) = algebraic_gap(&b).unwrap();
        prop_assert!(d - lhs >= -1e-9 && dh - lhs >= -1e-9);
    }
}
