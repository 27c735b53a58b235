use anisowf::chirp::*;
use anisowf::geometry::{dist_to_conic_set, AnisoIndex, PhasePoint};
use anisowf::poly::PolynomialData;
use anisowf::Error;
use num_rational::Ratio;
use proptest::prelude::*;

/// Expected regime from cross-multiplied integers, `None` when unsupported.
fn oracle(tn: i64, td: i64, sn: i64, sd: i64, m: i64, elliptic: bool) -> Option<Regime> {
    // compare s = sn/sd with q = t(m−1) = tn(m−1)/td
    let lhs = sn * td;
    let rhs = tn * (m - 1) * sd;
    let q_vs_one = (tn * (m - 1)).cmp(&td);
    let s_gt_one = sn > sd;
    use std::cmp::Ordering::*;
    match lhs.cmp(&rhs) {
        Equal => (q_vs_one == Greater).then_some(Regime::GradientGraph),
        Greater => (q_vs_one != Less && s_gt_one).then_some(Regime::XAxis),
        Less => (s_gt_one && elliptic).then_some(Regime::XiAxis),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn regime_selection_is_exact_and_exclusive(
        tn in 1i64..12, td in 1i64..6, sn in 1i64..12, sd in 1i64..6, m in 2u32..6, c in prop::sample::select(vec![1.0, -2.0]),
    ) {
        let t = Ratio::new(tn, td);
        let s = Ratio::new(sn, sd);
        prop_assume!(t * 2 > Ratio::from_integer(1) && s * 2 > Ratio::from_integer(1));
        let idx = AnisoIndex::rational(t, s).unwrap();
        let phase = PolynomialData::monomial(m, c).unwrap();
        let elliptic = true; // a 1-d monomial is elliptic
        let want = oracle(*t.numer(), *t.denom(), *s.numer(), *s.denom(), m as i64, elliptic);
        match predict_chirp_wf(&phase, &idx) {
            Ok(p) => {
                prop_assert_eq!(Some(p.regime), want);
                let even = m % 2 == 0;
                let eq = match p.regime {
                    Regime::XiAxis => even,
                    _ => true,
                };
                prop_assert_eq!(p.equality, eq);
            }
            Err(Error::UnsupportedRegime(_)) => prop_assert_eq!(want, None),
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn graph_directions_lie_on_their_generators(a in -2.0f64..2.0, b in 0.2f64..2.0, t in 0.6f64..1.4) {
        // φ = a x + b x², s = t
        let phase = PolynomialData::univariate(&[0.0, a, b]).unwrap();
        let idx = AnisoIndex::new(t, t).unwrap();
        prop_assume!(t > 1.0 + 1e-9);
        let p = predict_chirp_wf(&phase, &idx).unwrap();
        for (x, z) in p.graph_samples().into_iter().step_by(37) {
            let g = p.principal().grad(&x).unwrap();
            let d = dist_to_conic_set(idx.sigma(), &[z], &PhasePoint::new(x, g).unwrap()).unwrap();
            prop_assert!(d < 1e-9);
        }
    }
}

#[test]
fn non_elliptic_principal_part_is_rejected() {
    // x² − y² vanishes on the diagonal
    let phase = PolynomialData::new(2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
    let idx = AnisoIndex::rational(Ratio::new(3, 1), Ratio::new(6, 5)).unwrap();
    assert!(matches!(predict_chirp_wf(&phase, &idx), Err(Error::Precondition(_))));
    let elliptic = PolynomialData::new(2, [(vec![2, 0], 1.0), (vec![0, 2], 1.0)]).unwrap();
    assert_eq!(predict_chirp_wf(&elliptic, &idx).unwrap().regime, Regime::XiAxis);
}
