use anisowf::geometry::*;
use proptest::prelude::*;

fn index() -> impl Strategy<Value = AnisoIndex> {
    (0.55f64..4.0, 0.55f64..4.0).prop_map(|(t, s)| AnisoIndex::new(t, s).unwrap())
}

fn point() -> impl Strategy<Value = PhasePoint> {
    (-50.0f64..50.0, -50.0f64..50.0)
        .prop_filter("nonzero", |(x, xi)| x.abs() + xi.abs() > 1e-3)
        .prop_map(|(x, xi)| PhasePoint::one(x, xi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn quasi_homogeneous(idx in index(), p in point(), mu in 0.05f64..20.0) {
        let l = lambda_solve(&idx, &p).unwrap();
        let ls = lambda_solve(&idx, &scale_point(&idx, &p, mu)).unwrap();
        prop_assert!((ls - mu * l).abs() <= 1e-10 * mu * l, "{} vs {}", ls, mu * l);
    }

    #[test]
    fn residual_vanishes(idx in index(), p in point()) {
        let l = lambda_solve(&idx, &p).unwrap();
        prop_assert!(lambda_residual(&idx, &p, l) <= 1e-12);
    }

    #[test]
    fn projection_is_idempotent(idx in index(), p in point()) {
        let z = project(&idx, &p).unwrap();
        let zz = project(&idx, &z.point()).unwrap();
        for (a, b) in z.as_slice().iter().zip(zz.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
        prop_assert!((lambda_solve(&idx, &z.point()).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn monotone_along_rays(idx in index(), p in point(), mu in 1.001f64..5.0) {
        let a = lambda_solve(&idx, &p).unwrap();
        let b = lambda_solve(&idx, &scale_point(&idx, &p, mu)).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn growth_bounds(idx in index(), p in point()) {
        let (c1, c2) = growth_constants(&idx);
        let l = lambda_solve(&idx, &p).unwrap();
        let q = p.x_norm().powf(1.0 / idx.t()) + p.xi_norm().powf(1.0 / idx.s());
        prop_assert!(c1 * q <= l * (1.0 + 1e-12));
        prop_assert!(l <= c2 * q * (1.0 + 1e-12));
    }

    #[test]
    fn projection_depends_on_ratio_only(t in 0.6f64..3.0, k in 0.6f64..2.0, p in point()) {
        let a = project(&AnisoIndex::new(t, t * k).unwrap(), &p).unwrap();
        let b = project(&AnisoIndex::new(2.0 * t, 2.0 * t * k).unwrap(), &p).unwrap();
        prop_assert!(a.angle_to(&b) < 1e-10);
    }

    #[test]
    fn sphere_neighbourhood_contains_own_curve(idx in index(), p in point(), mu in 0.1f64..10.0) {
        let z = project(&idx, &p).unwrap();
        let q = scale_point(&idx, &p, mu);
        prop_assert!(in_gamma_nbhd(idx.sigma(), &z, 1e-8, &q).unwrap());
    }
}
