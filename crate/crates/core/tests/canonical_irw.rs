use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use splinewalk::canonical::*;
use splinewalk::experiments::{map_trials, NNR0};
use splinewalk::irw::*;
use splinewalk::netgen::{sample_network, DistributionSpec, NetConfig, NetworkParams};
use splinewalk::stats::Estimator;
use splinewalk::Interval;

fn nnr0(n: usize) -> NetConfig {
    NetConfig::shallow(n, NNR0[0], NNR0[1], NNR0[2], NNR0[3])
}

fn direct(p: &NetworkParams, x: f64) -> f64 {
    let l = &p.layers[0];
    (0..l.outputs())
        .map(|j| p.output.weight(0, j) * (l.weight(j, 0) * x + l.biases()[j]).max(0.0))
        .sum::<f64>()
        + p.output.biases()[0]
}

#[test]
fn single_neuron_parameters() {
    let p = NetworkParams::shallow(&[2.0], &[-4.0], &[3.0], 5.0).unwrap();
    let cf = CanonicalForm::from_network(&p).unwrap();
    assert_eq!(cf.knots(), &[Knot { x: 2.0, s: 6.0 }]);
    assert_eq!(cf.c1(), 0.0);
    assert_eq!(cf.c0(), 5.0);
}

#[test]
fn hundred_neuron_canonical_matches_direct_sum() {
    let n = DistributionSpec::NORMAL;
    let p = sample_network(&NetConfig::shallow(100, n, n, n, n), 17, 0).unwrap();
    let cf = CanonicalForm::from_network(&p).unwrap();
    for i in 0..1000 {
        let x = -20.0 + 40.0 * i as f64 / 999.0;
        let d = direct(&p, x);
        assert!((cf.eval(x) - d).abs() <= 1e-10 * 1f64.max(d.abs()), "x={x}");
    }
}

#[test]
fn walk_equals_network_at_knots() {
    let p = sample_network(&nnr0(1000), 29, 0).unwrap();
    let cf = CanonicalForm::from_network(&p).unwrap();
    let path = path_from_network(&cf).unwrap();
    let worst = path.xs.iter().zip(&path.ys).map(|(&x, &y)| (y - cf.eval(x)).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
}

#[test]
fn decomposition_intersections_equal_roots() {
    use splinewalk::experiments::decomposition_trace;
    let cf = CanonicalForm::from_network(&sample_network(&nnr0(1000), 29, 0).unwrap()).unwrap();
    let d = decomposition_trace(&cf, &[0.0]).unwrap();
    assert_eq!(d.intersections.len(), cf.root_count(RootDomain::AllReals));
}

#[test]
fn root_counts_agree_with_spline() {
    let cfg = nnr0(200);
    let checks = map_trials(100, |t| {
        let cf = CanonicalForm::from_network(&sample_network(&cfg, 4, t)?)?;
        let spline = cf.to_pwl()?.count_sign_change_roots(Interval::real());
        let path = path_from_network(&cf)?;
        Ok((cf.root_count(RootDomain::AllReals), spline, crossing_count(&path, true)))
    })
    .unwrap();
    for (a, b, c) in checks {
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}

#[test]
fn step_variance_grows_with_count() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(9);
    let n = 400;
    let mut e = Estimator::new();
    for _ in 0..10_000 {
        let w = random_walk(n, DistributionSpec::NORMAL, 0.0, &mut rng);
        e.push(w.slopes()[n] - w.y0_prime);
    }
    assert!((e.variance() / n as f64 - 1.0).abs() < 0.05);
}

#[test]
fn hand_iterated_walk() {
    let mut steps = vec![0.0; 8];
    steps[0] = 1.0;
    let w = RandomWalk { y0_prime: 0.0, steps };
    let path = integrate(&w, Abscissae::Fixed { x1: 1.0, dx: 1.0 }, 0.0).unwrap();
    let want: Vec<f64> = (0..8).map(f64::from).collect();
    assert_eq!(path.ys, want);
}

#[test]
fn fixed_step_variance_matches_closed_form() {
    let dx = 0.5;
    let est = fixed_step_variance(DistributionSpec::NORMAL, dx, 40, 20_000, 6).unwrap();
    for k in [5usize, 20, 40] {
        let exact = fixed_step_variance_exact(k as u64, dx);
        assert!((est[k - 1].variance() / exact - 1.0).abs() < 0.05, "k={k}");
    }
    let k = 1000u64;
    let lead = (k as f64).powi(3) / 3.0 * dx * dx;
    assert!((fixed_step_variance_exact(k, dx) / lead - 1.0).abs() < 0.01);
}

#[test]
fn crossing_statistics_are_normalized() {
    for model in [WalkModel::fixed_normal(), WalkModel::cauchy_knots()] {
        let s = crossing_statistics(&model, 500, 400, 12).unwrap();
        assert!((s.pmf_roots.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s.survival[1], 1.0);
        assert!(s.survival.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn cauchy_ratio_has_unit_scale() {
    let r = cauchy_ratio_stats(&nnr0(1000), 4000, 21).unwrap();
    assert!((r.iqr_scale() - 1.0).abs() < 0.1, "{}", r.iqr_scale());
    assert!(r.ks_distance(1.0) < r.ks_distance((500f64).sqrt()));
}

fn cf_strategy() -> impl Strategy<Value = CanonicalForm> {
    (
        proptest::collection::vec((-10.0f64..10.0, -2.0f64..2.0), 1..40),
        -3.0f64..3.0,
        -3.0f64..3.0,
    )
        .prop_map(|(ks, c1, c0)| CanonicalForm::new(ks.into_iter().map(|(x, s)| Knot { x, s }).collect(), c1, c0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn ends_complete_the_root_count(cf in cf_strategy()) {
        let (l, r) = cf.end_roots();
        prop_assert_eq!(
            cf.root_count(RootDomain::AllReals),
            cf.root_count(RootDomain::InteriorKnotSpan) + usize::from(l) + usize::from(r)
        );
    }

    #[test]
    fn root_counts_invariant_to_positive_scale(cf in cf_strategy(), a in 1e-3f64..1e3) {
        let s = cf.scaled(a);
        prop_assert_eq!(cf.root_count(RootDomain::AllReals), s.root_count(RootDomain::AllReals));
        prop_assert_eq!(cf.root_count(RootDomain::InteriorKnotSpan), s.root_count(RootDomain::InteriorKnotSpan));
    }

    #[test]
    fn iteration_matches_closed_form(cf in cf_strategy()) {
        let path = path_from_network(&cf).unwrap();
        for (k, (&xk, &yk)) in path.xs.iter().zip(&path.ys).enumerate() {
            let mut closed = cf.c1() * xk + cf.c0();
            for j in &cf.knots()[..k] {
                closed += j.s * (xk - j.x);
            }
            prop_assert!((yk - closed).abs() <= 1e-12 * 1f64.max(closed.abs()));
        }
    }

    #[test]
    fn crossing_parity(cf in cf_strategy()) {
        let path = path_from_network(&cf).unwrap();
        prop_assume!(path.ys.iter().all(|&y| y != 0.0));
        let last = *path.slopes.last().unwrap();
        prop_assume!(path.y0_prime != 0.0 && last != 0.0);
        let minus = -path.y0_prime.signum();
        let plus = last.signum();
        prop_assert_eq!(crossing_count(&path, true) % 2 == 1, minus != plus);
    }
}
