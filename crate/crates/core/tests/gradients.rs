use proptest::prelude::*;
use splinewalk::gradients::*;
use splinewalk::netgen::{sample_network, DistributionSpec, NetConfig, NetworkParams};
use splinewalk::Error;

fn normal_net(widths: Vec<usize>, seed: u64, trial: u64) -> NetworkParams {
    sample_network(&NetConfig::all(widths, DistributionSpec::NORMAL), seed, trial).unwrap()
}

#[test]
fn backprop_matches_finite_difference() {
    let p = normal_net(vec![8, 8, 8], 5, 0);
    let mut checked = 0;
    for i in 0..200 {
        let x = -3.0 + 6.0 * i as f64 / 199.0;
        let g = bias_gradients(&p, x);
        for (layer, row) in g.iter().enumerate() {
            for (k, &gk) in row.iter().enumerate() {
                if let Some(fd) = bias_gradient_fd(&p, x, layer, k, 1e-6, 1e-5).unwrap() {
                    assert!((fd - gk).abs() <= 1e-4 * gk.abs().max(1e-2), "x={x} ({layer},{k}) {fd} vs {gk}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn zero_bias_requires_zero_biases() {
    let p = normal_net(vec![4, 4], 1, 0);
    assert!(matches!(classify_node_zero_bias(&p, 1, 0), Err(Error::NonzeroBias { layer: 0 })));
}

#[test]
fn first_layer_never_wedges_down() {
    let cfg = NetConfig::zero_bias(vec![16, 16], DistributionSpec::NORMAL);
    for t in 0..20 {
        let shapes = classify_all_zero_bias(&sample_network(&cfg, 2, t).unwrap()).unwrap();
        assert!(shapes[0].iter().all(|s| matches!(s.class, NodeClass::HalfLeft | NodeClass::HalfRight)));
    }
}

#[test]
fn heaviside_at_zero_is_one() {
    assert_eq!(heaviside(0.0), 1.0);
    assert_eq!(heaviside(-1e-300), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn path_sum_equals_backprop(seed in any::<u64>(), l in 1usize..=2, n in 1usize..=4, x in -3.0f64..3.0) {
        let p = normal_net(vec![n; l], seed, 0);
        let g = bias_gradients(&p, x);
        for (layer, row) in g.iter().enumerate() {
            for (k, &gk) in row.iter().enumerate() {
                prop_assert_eq!(gk, bias_gradient_by_paths(&p, x, layer, k).unwrap());
            }
        }
    }

    #[test]
    fn zero_bias_nodes_have_one_knot_at_origin(seed in any::<u64>(), l in 1usize..=4) {
        let cfg = NetConfig::zero_bias(vec![6; l], DistributionSpec::NORMAL);
        let p = sample_network(&cfg, seed, 0).unwrap();
        let shapes = classify_all_zero_bias(&p).unwrap();
        for (i, layer) in shapes.iter().enumerate() {
            for (k, s) in layer.iter().enumerate() {
                let v = p.pre_activations(-1.0)[i][k];
                let w = p.pre_activations(1.0)[i][k];
                prop_assert!((v + s.left_slope).abs() <= 1e-12 * 1f64.max(v.abs()));
                prop_assert!((w - s.right_slope).abs() <= 1e-12 * 1f64.max(w.abs()));
            }
        }
    }
}
