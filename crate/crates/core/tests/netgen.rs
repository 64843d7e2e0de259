use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use splinewalk::experiments::map_trials;
use splinewalk::netgen::*;
use splinewalk::stats::Estimator;
use splinewalk::Interval;

fn nested_forward(p: &NetworkParams, x: f64) -> f64 {
    let mut v = vec![x];
    for layer in &p.layers {
        let mut next = Vec::new();
        for k in 0..layer.outputs() {
            let mut z = layer.biases()[k];
            for j in 0..layer.inputs() {
                z += layer.weight(k, j) * v[j];
            }
            next.push(if z > 0.0 { z } else { 0.0 });
        }
        v = next;
    }
    let mut y = p.output.biases()[0];
    for j in 0..v.len() {
        y += p.output.weight(0, j) * v[j];
    }
    y
}

#[test]
fn normal_moments() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(2024);
    let xs: Vec<f64> = (0..100_000).map(|_| DistributionSpec::NORMAL.sample(&mut rng)).collect();
    let e = Estimator::from_slice(&xs);
    assert!(e.mean().abs() < 4.0 / (xs.len() as f64).sqrt());
    assert!((e.variance() - 1.0).abs() < 0.05);
}

#[test]
fn two_layer_trace_matches_nested_loops() {
    let p = sample_network(&NetConfig::uniform(vec![5, 5]), 13, 0).unwrap();
    let y = output_spline(&p);
    for i in 0..500 {
        let x = -3.0 + 6.0 * i as f64 / 499.0;
        let d = nested_forward(&p, x);
        assert!((y.eval(x) - d).abs() <= 1e-10 * 1f64.max(d.abs()));
    }
}

#[test]
fn single_layer_exactness() {
    let cfg = NetConfig::uniform(vec![100]);
    let counts = map_trials(10_000, |t| Ok(network_knot_count(&sample_network(&cfg, 5, t)?))).unwrap();
    let exact = counts.iter().filter(|&&m| m == 100).count();
    assert!(exact as f64 >= 0.999 * counts.len() as f64);
}

#[test]
fn constant_network_has_no_knots() {
    let cfg = NetConfig::all(vec![4, 4], DistributionSpec::ZERO);
    assert_eq!(network_knot_count(&sample_network(&cfg, 1, 0).unwrap()), 0);
}

#[test]
fn preservation_arithmetic() {
    assert_eq!(preservation_probability(7, 0), 1.0);
    assert_eq!(preservation_probability(1, 1), 0.5);
    assert!((preservation_probability(20, 100) - 0.999_904_6).abs() < 1e-7);
    let h = min_width_half_preservation(1).unwrap();
    assert!((h.exact - 1.0).abs() < 1e-12);
    let h = min_width_half_preservation(1000).unwrap();
    assert!((h.exact - h.series).abs() < 0.01);
}

/// Per-knot survival into a layer of `n` neurons: `1 - 2^-n`.
#[test]
fn per_knot_retention_rate() {
    for n in [1usize, 2, 4] {
        let cfg = NetConfig::uniform(vec![10, n]);
        let fracs = map_trials(10_000, |t| {
            let r = knot_retention_trial(&sample_network(&cfg, 100 + n as u64, t)?, 1)?;
            Ok(r.retained as f64 / r.total as f64)
        })
        .unwrap();
        let e = Estimator::from_slice(&fracs);
        let want = 1.0 - (-(n as f64)).exp2();
        assert!((e.mean() - want).abs() < 3.0 * e.std_error(), "n={n}: {} vs {want}", e.mean());
    }
}

#[test]
fn half_preservation_width_keeps_all_knots_often() {
    let m = 10;
    let n = min_width_half_preservation(m).unwrap().exact.ceil() as usize;
    assert_eq!(n, 4);
    let cfg = NetConfig::uniform(vec![m as usize, n]);
    let all = map_trials(10_000, |t| {
        let r = knot_retention_trial(&sample_network(&cfg, 31, t)?, 1)?;
        Ok(f64::from(u8::from(r.retained == r.total && r.total == m as usize)))
    })
    .unwrap();
    assert!(Estimator::from_slice(&all).mean() > 0.5);
}

#[test]
fn wide_layer_keeps_every_knot() {
    let cfg = NetConfig::uniform(vec![10, 64]);
    for t in 0..50 {
        let r = knot_retention_trial(&sample_network(&cfg, 8, t).unwrap(), 1).unwrap();
        assert_eq!(r.retained, r.total);
    }
}

#[test]
fn sampling_is_independent_of_pool_size() {
    let cfg = NetConfig::uniform(vec![8, 8]);
    let draw = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| map_trials(64, |t| sample_network(&cfg, 77, t)).unwrap())
    };
    assert_eq!(draw(1), draw(4));
}

fn roots(p: &NetworkParams) -> usize {
    output_spline(p).count_sign_change_roots(Interval::real())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn root_count_invariant_to_positive_scaling(seed in any::<u64>(), a in 0.01f64..100.0, which in 0usize..3) {
        let n = DistributionSpec::NORMAL;
        let cfg = NetConfig::shallow(20, n, n, n, DistributionSpec::ZERO);
        let p = sample_network(&cfg, seed, 0).unwrap();
        let mut q = p.clone();
        match which {
            0 => q.output.weights_mut().iter_mut().for_each(|w| *w *= a),
            1 => q.layers[0].biases_mut().iter_mut().for_each(|b| *b *= a),
            _ => q.layers[0].weights_mut().iter_mut().for_each(|w| *w *= a),
        }
        prop_assert_eq!(roots(&p), roots(&q));
    }

    #[test]
    fn replicated_outputs_share_knots(seed in any::<u64>(), b in -5.0f64..5.0) {
        let p = sample_network(&NetConfig::uniform(vec![6, 6]), seed, 0).unwrap();
        let mut q = p.clone();
        q.output.biases_mut()[0] = b;
        let (a, b) = (output_spline(&p), output_spline(&q));
        prop_assert_eq!(a.breakpoints(), b.breakpoints());
    }

    #[test]
    fn resampling_is_bitwise_stable(seed in any::<u64>(), t in 0u64..1000) {
        let cfg = NetConfig::uniform(vec![3, 4]);
        prop_assert_eq!(sample_network(&cfg, seed, t).unwrap(), sample_network(&cfg, seed, t).unwrap());
    }
}
