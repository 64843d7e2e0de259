use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use splinewalk::canonical::{CanonicalForm, Knot};
use splinewalk::{Interval, PwlFunction};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

/// Random spline with `k` breakpoints in `[-5, 5]`.
fn random_pwl(rng: &mut impl Rng, k: usize) -> PwlFunction {
    let mut bps: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let slopes: Vec<f64> = (0..=bps.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
    PwlFunction::from_anchor_slopes(bps, rng.random_range(-2.0..2.0), slopes).unwrap()
}

/// Value from the stored pieces by direct integration from the anchor.
fn naive_eval(f: &PwlFunction, x: f64) -> f64 {
    let b = f.breakpoints();
    let s = f.slopes();
    if b.is_empty() {
        return f.anchor_value() + s[0] * x;
    }
    if x <= b[0] {
        return f.anchor_value() + s[0] * (x - b[0]);
    }
    let mut y = f.anchor_value();
    for i in 0..b.len() {
        let hi = if i + 1 < b.len() { b[i + 1].min(x) } else { x };
        if hi <= b[i] {
            break;
        }
        y += s[i + 1] * (hi - b[i]);
    }
    y
}

#[test]
fn random_combination_matches_summation() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
    let fs: Vec<PwlFunction> = (0..5).map(|_| random_pwl(&mut rng, 6)).collect();
    let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
    let g = PwlFunction::affine_combine(&fs, &w, 0.75);
    for _ in 0..1000 {
        let x = rng.random_range(-8.0..8.0);
        let direct: f64 = fs.iter().zip(&w).map(|(f, wi)| wi * f.eval(x)).sum::<f64>() + 0.75;
        assert!(rel_close(g.eval(x), direct, 1e-12), "x={x}");
    }
}

#[test]
fn relu_matches_pointwise_max() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
    let f = random_pwl(&mut rng, 10);
    let r = f.relu();
    for i in 0..1000 {
        let x = -8.0 + 16.0 * i as f64 / 999.0;
        assert!(rel_close(r.eval(x), f.eval(x).max(0.0), 1e-12), "x={x}");
    }
}

#[test]
fn root_count_matches_dense_bisection() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
    let knots: Vec<Knot> = (0..50)
        .map(|_| Knot {
            x: rng.random_range(-10.0..10.0),
            s: rng.random_range(-1.0..1.0),
        })
        .collect();
    let cf = CanonicalForm::new(knots, 0.3, -0.2).unwrap();
    let f = cf.to_pwl().unwrap();
    let count = f.count_sign_change_roots(Interval::real());

    // Dense grid extended far past the outer knots so the end rays are covered.
    let grid: Vec<f64> = (0..=200_000).map(|i| -1e4 + 2e4 * i as f64 / 200_000.0).collect();
    let mut oracle = 0;
    for w in grid.windows(2) {
        let (a, b) = (f.eval(w[0]), f.eval(w[1]));
        if a != 0.0 && b != 0.0 && (a < 0.0) != (b < 0.0) {
            let (mut lo, mut hi) = (w[0], w[1]);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if (f.eval(m) < 0.0) == (a < 0.0) {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            assert!(f.eval(lo).abs() < 1e-6);
            oracle += 1;
        }
    }
    assert_eq!(count, oracle);
}

#[test]
fn canonical_from_three_neurons_matches_direct_sum() {
    use splinewalk::netgen::{sample_network, DistributionSpec, NetConfig};
    let n = DistributionSpec::NORMAL;
    let cfg = NetConfig::shallow(3, n, n, n, n);
    let net = sample_network(&cfg, 42, 0).unwrap();
    let cf = CanonicalForm::from_network(&net).unwrap();
    for i in 0..100 {
        let x = -6.0 + 12.0 * i as f64 / 99.0;
        assert!(rel_close(cf.eval(x), net.forward(x), 1e-12));
    }
}

fn pwl_strategy() -> impl Strategy<Value = PwlFunction> {
    (proptest::collection::vec(-5.0f64..5.0, 0..8), -2.0f64..2.0, any::<u64>()).prop_map(|(mut bps, anchor, seed)| {
        bps.sort_by(f64::total_cmp);
        bps.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let slopes = (0..=bps.len()).map(|_| rng.random_range(-3.0..3.0)).collect();
        PwlFunction::from_anchor_slopes(bps, anchor, slopes).unwrap()
    })
}

fn well_formed(f: &PwlFunction) -> bool {
    let b = f.breakpoints();
    let s = f.slopes();
    s.len() == b.len() + 1
        && b.windows(2).all(|w| w[0] < w[1])
        && s.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-9 * 1f64.max(w[0].abs()).max(w[1].abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn eval_matches_naive_integration(f in pwl_strategy(), xs in proptest::collection::vec(-10.0f64..10.0, 50)) {
        for x in xs {
            prop_assert!(rel_close(f.eval(x), naive_eval(&f, x), 1e-12));
        }
    }

    #[test]
    fn relu_of_combination_is_well_formed(
        f in pwl_strategy(),
        g in pwl_strategy(),
        a in -2.0f64..2.0,
        b in -2.0f64..2.0,
        c in -1.0f64..1.0,
        xs in proptest::collection::vec(-10.0f64..10.0, 50),
    ) {
        let h = PwlFunction::affine_combine(&[f.clone(), g.clone()], &[a, b], c);
        let r = h.relu();
        prop_assert!(well_formed(&h));
        prop_assert!(well_formed(&r));
        for x in xs {
            let direct = (a * f.eval(x) + b * g.eval(x) + c).max(0.0);
            prop_assert!(rel_close(r.eval(x), direct, 1e-12));
        }
    }

    #[test]
    fn relu_knot_bound(f in pwl_strategy()) {
        let roots = f.count_sign_change_roots(Interval::real());
        let r = f.relu();
        prop_assert!(r.knot_count() <= f.knot_count() + roots);
        let touches = f.breakpoints().iter().any(|&x| f.eval(x) == 0.0);
        if !touches {
            let kept = f.breakpoints().iter().filter(|&&x| f.eval(x) > 0.0).count();
            prop_assert_eq!(r.knot_count(), kept + roots);
        }
    }

    #[test]
    fn left_ray_root_condition(
        xs in proptest::collection::vec(-5.0f64..5.0, 1..10),
        ss in proptest::collection::vec(-1.0f64..1.0, 10),
        c1 in -2.0f64..2.0,
        c0 in -2.0f64..2.0,
    ) {
        prop_assume!(c1.abs() > 1e-3);
        let knots: Vec<Knot> = xs.iter().zip(&ss).map(|(&x, &s)| Knot { x, s }).collect();
        let cf = CanonicalForm::new(knots, c1, c0).unwrap();
        let x1 = cf.knots()[0].x;
        prop_assume!((x1 + c0 / c1).abs() > 1e-9);
        let f = cf.to_pwl().unwrap();
        let left = f.count_sign_change_roots(Interval::new(f64::NEG_INFINITY, x1).unwrap());
        prop_assert_eq!(left == 1, x1 + c0 / c1 > 0.0);
    }
}
