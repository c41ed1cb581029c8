use super::*;
use crate::space::Potential;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ou() -> ModelSpace {
    ModelSpace::euclidean(1, Potential::Quadratic { kappa: 1.0 }).unwrap()
}

fn x(v: f64) -> SpacePoint {
    SpacePoint::scalar(v)
}

fn identity() -> Phi {
    Phi::affine(vec![1.0], 0.0).unwrap()
}

fn params(a: f64, b: f64, c: f64, center: f64, anchor: f64) -> ChainParams {
    ChainParams { a, b, c, eps: None, m: None, n: None, center: x(center), flow_anchor: x(anchor) }
}

// Formal generator -V' f' + |f'|^2 / 2 on the line, by central differences.
fn formal_h(space: &ModelSpace, pair: &HamiltonianPair, at: f64) -> f64 {
    let h = 1e-5;
    let fp = (pair.f(&x(at + h)).unwrap() - pair.f(&x(at - h)).unwrap()) / (2.0 * h);
    -space.potential().derivative(at) * fp + 0.5 * fp * fp
}

#[test]
fn cylinder_examples() {
    let s = ou();
    let dag = build_cyl_dagger(&s, 1.0, identity(), x(0.0), vec![x(0.0)]).unwrap();
    assert_abs_diff_eq!(dag.f(&x(1.0)).unwrap(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(dag.g(&x(1.0)).unwrap(), 0.0, epsilon = 1e-15);
    assert_eq!(dag.f(&x(0.0)).unwrap(), 0.0);
    assert_eq!(dag.g(&x(0.0)).unwrap(), 0.0);

    let ddag = build_cyl_ddagger(&s, 1.0, identity(), x(0.0), vec![x(0.0)]).unwrap();
    assert_abs_diff_eq!(ddag.f(&x(1.0)).unwrap(), -1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(ddag.g(&x(1.0)).unwrap(), 1.0, epsilon = 1e-15);

    let shifted = build_cyl_ddagger(&s, 2.0, Phi::affine(vec![0.5], 0.7).unwrap(), x(0.0), vec![x(0.0)]).unwrap();
    assert_eq!(shifted.f(&x(0.0)).unwrap(), -0.7);
    assert_eq!(shifted.g(&x(0.0)).unwrap(), 0.0);
    assert_eq!(dag.family(), Family::Hdag);
    assert_eq!(ddag.side(), Side::Ddagger);
}

#[test]
fn cylinder_errors() {
    let s = ou();
    assert!(build_cyl_dagger(&s, 0.0, identity(), x(0.0), vec![x(0.0)]).is_err());
    assert!(build_cyl_dagger(&s, 1.0, identity(), x(0.0), vec![]).is_err());
    let neg = build_cyl_dagger(&s, 1.0, Phi::affine(vec![-1.0], 0.0).unwrap(), x(0.0), vec![x(0.0)]).unwrap();
    assert!(matches!(neg.g(&x(1.0)), Err(Error::NotInClassT { index: 0, .. })));
    assert!(matches!(neg.f(&x(1.0)), Err(Error::NotInClassT { .. })));
    assert!(dag_on_quantile_rejects_scalar());
}

fn dag_on_quantile_rejects_scalar() -> bool {
    let q = ModelSpace::quantile(4, Potential::Quartic).unwrap();
    build_cyl_dagger(&q, 1.0, identity(), x(0.0), vec![x(0.0)]).is_err()
}

#[test]
fn cylinder_matches_term_by_term_oracle() {
    let s = ModelSpace::euclidean(2, Potential::Quartic).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = |p: &SpacePoint| p.coords().iter().map(|v| v.powi(4) / 4.0).sum::<f64>();
    let d = |p: &SpacePoint, q: &SpacePoint| {
        p.coords().iter().zip(q.coords()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    };
    for _ in 0..20 {
        let pts: Vec<SpacePoint> = (0..4).map(|_| s.sample_point(&mut rng)).collect();
        let (rho, mu1, mu2, pi) = (&pts[0], &pts[1], &pts[2], &pts[3]);
        let (w1, w2, a) = (0.3, 1.7, 0.6);
        let phi = Phi::affine(vec![w1, w2], 0.2).unwrap();
        let dag = build_cyl_dagger(&s, a, phi.clone(), rho.clone(), vec![mu1.clone(), mu2.clone()]).unwrap();
        let (d0, d1, d2) = (d(pi, rho), d(pi, mu1), d(pi, mu2));
        let sum_d = w1 * d1 + w2 * d2;
        let g = a * (e(rho) - e(pi))
            + 0.5 * a * a * d0 * d0
            + w1 * (e(mu1) - e(pi))
            + w2 * (e(mu2) - e(pi))
            + 0.5 * sum_d * sum_d
            + a * d0 * sum_d;
        assert_abs_diff_eq!(dag.g(pi).unwrap(), g, epsilon = 1e-10 * (1.0 + g.abs()));
        let f = 0.5 * a * d0 * d0 + 0.2 + 0.5 * (w1 * d1 * d1 + w2 * d2 * d2);
        assert_abs_diff_eq!(dag.f(pi).unwrap(), f, epsilon = 1e-12 * (1.0 + f));

        let ddag = build_cyl_ddagger(&s, a, phi, rho.clone(), vec![mu1.clone(), mu2.clone()]).unwrap();
        let g = a * (e(pi) - e(rho)) + 0.5 * a * a * d0 * d0 + w1 * (e(pi) - e(mu1)) + w2 * (e(pi) - e(mu2))
            - 0.5 * sum_d * sum_d
            - a * d0 * sum_d;
        assert_abs_diff_eq!(ddag.g(pi).unwrap(), g, epsilon = 1e-10 * (1.0 + g.abs()));
    }
}

#[test]
fn formal_generator_bounds_on_the_line() {
    let spaces = [
        ou(),
        ModelSpace::euclidean(1, Potential::Quartic).unwrap().with_box(-2.0, 2.0).unwrap(),
        ModelSpace::euclidean(1, Potential::DoubleWell { shift: 0.3 }).unwrap().with_box(-2.0, 2.0).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for s in &spaces {
        for _ in 0..40 {
            let p: Vec<f64> = (0..4).map(|_| s.sample_point(&mut rng).coords()[0]).collect();
            let phi = Phi::affine(vec![0.4, 1.1], -0.3).unwrap();
            let anchors = vec![x(p[1]), x(p[2])];
            let dag = build_cyl_dagger(s, 0.8, phi.clone(), x(p[0]), anchors.clone()).unwrap();
            let ddag = build_cyl_ddagger(s, 0.8, phi, x(p[0]), anchors.clone()).unwrap();
            let tol = 1e-5;
            assert!(dag.g(&x(p[3])).unwrap() >= formal_h(s, &dag, p[3]) - tol);
            assert!(ddag.g(&x(p[3])).unwrap() <= formal_h(s, &ddag, p[3]) + tol);

            let bounded = Phi::truncate(2.0, Phi::affine(vec![0.4, 1.1], 0.0).unwrap()).unwrap();
            let h0d = build_h0_pair(s, Side::Dagger, bounded.clone(), anchors.clone()).unwrap();
            let h0u = build_h0_pair(s, Side::Ddagger, bounded, anchors).unwrap();
            assert!(h0d.g(&x(p[3])).unwrap() >= formal_h(s, &h0d, p[3]) - tol);
            assert!(h0u.g(&x(p[3])).unwrap() <= formal_h(s, &h0u, p[3]) + tol);
        }
    }
}

#[test]
fn bounded_pairs() {
    let s = ou();
    assert!(matches!(build_h0_pair(&s, Side::Dagger, identity(), vec![x(0.0)]), Err(Error::RequiresBounded)));
    let phi = Phi::truncate(2.0, Phi::affine(vec![1.0, 1.0], 0.25).unwrap()).unwrap();
    for side in [Side::Dagger, Side::Ddagger] {
        let p = build_h0_pair(&s, side, phi.clone(), vec![x(0.0), x(0.0)]).unwrap();
        assert_eq!(p.f(&x(0.0)).unwrap(), side.sign() * 0.25);
        assert_eq!(p.g(&x(0.0)).unwrap(), 0.0);
    }
    // Beyond the knee the partials vanish and g reduces to zero.
    let p = build_h0_pair(&s, Side::Dagger, phi, vec![x(0.0), x(0.0)]).unwrap();
    assert_eq!(p.f(&x(3.0)).unwrap(), 3.0);
    assert_eq!(p.g(&x(3.0)).unwrap(), 0.0);
}

#[test]
fn truncation_agrees_below_the_knee() {
    let s = ou();
    let base =
        CylindricalTestFunction::new(identity(), vec![x(0.5)], Some(Leading { a: 1.0, center: x(-0.5) })).unwrap();
    let cut = truncate_cylinder(&base, 2).unwrap();
    assert!(cut.phi.is_bounded());
    assert_eq!(cut.anchors.len(), 2);
    let h0 = build_h0_pair(&s, Side::Dagger, cut.phi.clone(), cut.anchors.clone()).unwrap();
    let h1 = build_cyl_from(&s, Side::Dagger, base.clone()).unwrap();
    for i in 0..=40 {
        let p = x(-1.5 + 0.075 * i as f64);
        let f1 = h1.f(&p).unwrap();
        if f1 <= 2.0 {
            assert_abs_diff_eq!(h0.f(&p).unwrap(), f1, epsilon = 1e-14);
            assert_abs_diff_eq!(h0.g(&p).unwrap(), h1.g(&p).unwrap(), epsilon = 1e-12);
        } else {
            assert!(h0.f(&p).unwrap() <= f1.min(3.0));
        }
    }
    let no_lead = CylindricalTestFunction::new(identity(), vec![x(0.0)], None).unwrap();
    assert!(truncate_cylinder(&no_lead, 2).is_err());
}

#[test]
fn tataru_pair_examples() {
    let s = ou();
    let p = build_tataru_pair(&s, Side::Dagger, 1.0, 1.0, 0.0, x(0.0), x(1.0)).unwrap();
    assert_abs_diff_eq!(p.f(&x(0.0)).unwrap(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p.g(&x(0.0)).unwrap(), 1.5, epsilon = 1e-15);
    let p = build_tataru_pair(&s, Side::Dagger, 1.0, 0.7, 0.3, x(0.0), x(0.0)).unwrap();
    assert_eq!(p.f(&x(0.0)).unwrap(), 0.3);
    assert_abs_diff_eq!(p.g(&x(0.0)).unwrap(), 0.7 + 0.5 * 0.49, epsilon = 1e-15);
    let q = build_tataru_pair(&s, Side::Ddagger, 1.0, 0.7, 0.3, x(0.0), x(0.0)).unwrap();
    assert_eq!(q.f(&x(0.0)).unwrap(), 0.3);
    assert_abs_diff_eq!(q.g(&x(0.0)).unwrap(), -0.7 - 0.5 * 0.49, epsilon = 1e-15);
    assert!(build_tataru_pair(&s, Side::Dagger, 1.0, 0.0, 0.0, x(0.0), x(0.0)).is_err());
    assert!(build_tataru_pair(&s, Side::Dagger, -1.0, 1.0, 0.0, x(0.0), x(0.0)).is_err());
}

#[test]
fn chain_parameter_validation() {
    let s = ou();
    let base = params(1.0, 1.0, 0.0, 0.0, 1.0);
    assert!(matches!(build_chain_pair(&s, 2, Side::Dagger, base.clone()), Err(Error::MissingParameter("epsilon"))));
    let with_eps = ChainParams { eps: Some(0.1), ..base.clone() };
    assert!(matches!(build_chain_pair(&s, 3, Side::Dagger, with_eps.clone()), Err(Error::MissingParameter("m"))));
    let with_m = ChainParams { m: Some(4), ..with_eps.clone() };
    assert!(matches!(build_chain_pair(&s, 2, Side::Dagger, with_m.clone()), Err(Error::MissingParameter("n"))));
    assert!(build_chain_pair(&s, 3, Side::Dagger, with_m).is_ok());
    assert!(build_chain_pair(&s, 4, Side::Dagger, with_eps.clone()).is_ok());
    assert!(build_chain_pair(&s, 6, Side::Dagger, base.clone()).is_ok());
    assert!(build_chain_pair(&s, 7, Side::Dagger, with_eps).is_err());
    assert!(build_chain_pair(&s, 5, Side::Dagger, ChainParams { eps: Some(-1.0), ..base }).is_err());
}

#[test]
fn levels_five_and_six_share_g() {
    let spaces = [ou(), ModelSpace::quantile(6, Potential::DoubleWell { shift: 0.1 }).unwrap()];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for s in &spaces {
        for _ in 0..10 {
            let eps = 0.02;
            let p = ChainParams {
                a: 0.7,
                b: 1.3,
                c: -0.2,
                eps: Some(eps),
                m: None,
                n: None,
                center: s.sample_point(&mut rng),
                flow_anchor: s.sample_point(&mut rng),
            };
            let pi = s.sample_point(&mut rng);
            for side in [Side::Dagger, Side::Ddagger] {
                let five = build_chain_pair(s, 5, side, p.clone()).unwrap();
                let six = build_chain_pair(s, 6, side, p.clone()).unwrap();
                assert_eq!(five.g(&pi).unwrap().to_bits(), six.g(&pi).unwrap().to_bits());
                let gap = (five.f(&pi).unwrap() - six.f(&pi).unwrap()).abs();
                assert!(gap <= p.b * (2.0 * eps).sqrt() + 1e-9, "gap {gap}");
                assert_eq!(five.f(&pi).unwrap().to_bits(), five.f(&pi).unwrap().to_bits());
            }
        }
    }
}

#[test]
fn level_two_at_critical_point() {
    let s = ou();
    let eps = 0.5;
    let p = ChainParams { eps: Some(eps), m: Some(7), n: Some(3), ..params(1.0, 0.8, 0.1, 0.0, 0.0) };
    let pair = build_chain_pair(&s, 2, Side::Dagger, p.clone()).unwrap();
    assert_abs_diff_eq!(pair.f(&x(0.0)).unwrap(), 0.1 + 0.8 * 0.375, epsilon = 1e-13);
    let cont = build_chain_pair(&s, 3, Side::Dagger, p).unwrap();
    assert_abs_diff_eq!(cont.f(&x(0.0)).unwrap(), 0.1 + 0.8 * 0.375, epsilon = 1e-10);
}

#[test]
fn soft_min_cylinder_reproduces_level_two() {
    let s = ModelSpace::euclidean(1, Potential::Quadratic { kappa: -0.4 }).unwrap().with_box(-2.0, 2.0).unwrap();
    let p = ChainParams { eps: Some(0.05), m: Some(9), n: Some(4), ..params(0.5, 1.2, 0.3, 0.4, -1.0) };
    let cyl = soft_min_cylinder(&s, &p).unwrap();
    let h1 = build_cyl_from(&s, Side::Dagger, cyl).unwrap();
    let h2 = build_chain_pair(&s, 2, Side::Dagger, p).unwrap();
    for v in [-1.7, -0.2, 0.0, 0.9, 1.8] {
        assert_abs_diff_eq!(h1.f(&x(v)).unwrap(), h2.f(&x(v)).unwrap(), epsilon = 1e-12);
        assert!(h1.g(&x(v)).unwrap() <= h2.g(&x(v)).unwrap() + 1e-9);
        assert!(h1.g(&x(v)).unwrap() >= formal_h(&s, &h1, v) - 1e-5);
    }
}

#[test]
fn level_four_uses_the_single_minimizer() {
    let s = ou();
    let eps = 1e-4;
    let p = ChainParams { eps: Some(eps), ..params(1.0, 1.0, 0.0, 0.0, 3.0) };
    let pair = build_chain_pair(&s, 4, Side::Dagger, p).unwrap();
    let xi = tataru_eps(&s, eps, &x(0.0), &x(3.0)).unwrap().minimizers;
    assert_eq!(xi.len(), 1);
    assert_abs_diff_eq!(xi[0], 3f64.ln(), epsilon = 1e-2);
    let sup = flow_bound_term(&s, eps, &x(0.0), &x(3.0), xi[0]).unwrap();
    // Along the flow 3 e^{-t}, at distance one the bound is E(mu(t)) = 1/2.
    assert_abs_diff_eq!(sup, 0.5, epsilon = 1e-2);
    let common = build_tataru_pair(&s, Side::Dagger, 1.0, 1.0, 0.0, x(0.0), x(3.0)).unwrap().g(&x(0.0)).unwrap() - 1.0;
    assert_abs_diff_eq!(pair.g(&x(0.0)).unwrap(), common + sup, epsilon = 1e-14);
}

#[test]
fn level_two_approaches_level_four() {
    let s = ou();
    let eps = 1e-3;
    let (pi, mu) = (0.0, 3.0);
    let mut prev = f64::INFINITY;
    let base = params(1.0, 1.0, 0.0, 0.5, mu);
    let g4 = build_chain_pair(&s, 4, Side::Dagger, ChainParams { eps: Some(eps), ..base.clone() })
        .unwrap()
        .g(&x(pi))
        .unwrap();
    let g5 = build_chain_pair(&s, 5, Side::Dagger, ChainParams { eps: Some(eps), ..base.clone() })
        .unwrap()
        .g(&x(pi))
        .unwrap();
    assert!(g4 <= g5);
    for n in [4u64, 8, 16, 32] {
        let p = ChainParams { eps: Some(eps), m: Some(n * n), n: Some(n), ..base.clone() };
        let g2 = build_chain_pair(&s, 2, Side::Dagger, p.clone()).unwrap().g(&x(pi)).unwrap();
        let g3 = build_chain_pair(&s, 3, Side::Dagger, p).unwrap().g(&x(pi)).unwrap();
        let err = (g2 - g4).abs();
        assert!(err < prev, "n={n}: {err} >= {prev}");
        assert!((g3 - g4).abs() < 0.5, "continuous level far off: {g3} vs {g4}");
        prev = err;
    }
    assert!(prev < 0.05, "final gap {prev}");
}

#[test]
fn chain_links_hold_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let spaces =
        [ou(), ModelSpace::euclidean(1, Potential::Quadratic { kappa: -0.5 }).unwrap().with_box(-2.0, 2.0).unwrap()];
    for s in &spaces {
        let r = chain_inequality_report(s, ChainLink::OneToTwo, 40, &mut rng).unwrap();
        assert!(r.max_violation <= 1e-9, "1-2: {}", r.max_violation);
        let r = chain_inequality_report(s, ChainLink::FourToFive, 40, &mut rng).unwrap();
        assert!(r.max_violation <= 1e-6, "4-5: {}", r.max_violation);
        let r = chain_inequality_report(s, ChainLink::ZeroToOneOverlap, 40, &mut rng).unwrap();
        assert!(r.max_violation <= 1e-10, "overlap: {}", r.max_violation);
        assert_eq!(r.samples.len(), 40);
    }
    for l in ChainLink::ALL {
        assert_eq!(ChainLink::parse(l.name()), Some(l));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dagger_f_is_bounded_below(seed in any::<u64>()) {
        let s = ModelSpace::quantile(5, Potential::Quartic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<SpacePoint> = (0..3).map(|_| s.sample_point(&mut rng)).collect();
        let p = build_tataru_pair(&s, Side::Dagger, 0.5, 0.5, -0.25, pts[0].clone(), pts[1].clone()).unwrap();
        prop_assert!(p.f(&pts[2]).unwrap() >= -0.25);
        let q = build_tataru_pair(&s, Side::Ddagger, 0.5, 0.5, -0.25, pts[0].clone(), pts[1].clone()).unwrap();
        prop_assert!(q.f(&pts[2]).unwrap() <= -0.25);
    }

    #[test]
    fn evaluation_is_deterministic(seed in any::<u64>()) {
        let s = ou();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<SpacePoint> = (0..3).map(|_| s.sample_point(&mut rng)).collect();
        let p = ChainParams {
            a: 1.0, b: 1.0, c: 0.0, eps: Some(0.1), m: Some(5), n: Some(3),
            center: pts[0].clone(), flow_anchor: pts[1].clone(),
        };
        let pair = build_chain_pair(&s, 2, Side::Ddagger, p).unwrap();
        prop_assert_eq!(pair.g(&pts[2]).unwrap().to_bits(), pair.g(&pts[2]).unwrap().to_bits());
    }
}
