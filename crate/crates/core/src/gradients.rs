//! Bias gradients of the network output and zero-bias node shapes.

use crate::error::{Error, Result};
use crate::experiments::fold_trials;
use crate::netgen::{propagate_exact, sample_network, NetConfig, NetworkParams, PropagationTrace};
use crate::stats::{Estimator, Moments};

/// Heaviside step with `H(0) = 1`.
#[inline]
pub fn heaviside(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `dy/db_{ik}` for every neuron of every layer at input `x`, by backward
/// accumulation from the output.
pub fn bias_gradients(params: &NetworkParams, x: f64) -> Vec<Vec<f64>> {
    let pre = params.pre_activations(x);
    let l = params.depth();
    let mut grads: Vec<Vec<f64>> = vec![Vec::new(); l];
    grads[l - 1] = params
        .output
        .row(0)
        .iter()
        .zip(&pre[l - 1])
        .map(|(w, &z)| w * heaviside(z))
        .collect();
    for i in (0..l - 1).rev() {
        let next = &params.layers[i + 1];
        let delta = &grads[i + 1];
        let g = (0..next.inputs())
            .map(|j| {
                let s: f64 = delta.iter().enumerate().map(|(m, d)| d * next.weight(m, j)).sum();
                s * heaviside(pre[i][j])
            })
            .collect();
        grads[i] = g;
    }
    grads
}

/// `dy/db_{ik}` at `x`; `layer` is 0-based.
pub fn bias_gradient(params: &NetworkParams, x: f64, layer: usize, k: usize) -> Result<f64> {
    check_index(params, layer, k)?;
    Ok(bias_gradients(params, x)[layer][k])
}

fn check_index(params: &NetworkParams, layer: usize, k: usize) -> Result<()> {
    if layer >= params.depth() {
        return Err(Error::config("layer", format!("network has {} layers, got {layer}", params.depth())));
    }
    if k >= params.layers[layer].outputs() {
        return Err(Error::config("neuron", format!("layer {layer} has {} neurons", params.layers[layer].outputs())));
    }
    Ok(())
}

/// `dy/db_{ik}` by summing over every path from neuron `(layer, k)` to the
/// output. Exponential in depth; meant for small networks.
pub fn bias_gradient_by_paths(params: &NetworkParams, x: f64, layer: usize, k: usize) -> Result<f64> {
    check_index(params, layer, k)?;
    let pre = params.pre_activations(x);
    fn walk(params: &NetworkParams, pre: &[Vec<f64>], i: usize, k: usize) -> f64 {
        let gate = heaviside(pre[i][k]);
        if gate == 0.0 {
            return 0.0;
        }
        if i + 1 == params.depth() {
            return params.output.weight(0, k);
        }
        let next = &params.layers[i + 1];
        (0..next.outputs()).map(|m| next.weight(m, k) * walk(params, pre, i + 1, m)).sum()
    }
    Ok(walk(params, &pre, layer, k))
}

/// Central difference of the output in `b_{ik}` with step `h`. `None` when
/// the activation pattern at `x` differs between `b - h`, `b` and `b + h`, or
/// when some pre-activation at `x` is within `kink_tol` of zero.
pub fn bias_gradient_fd(params: &NetworkParams, x: f64, layer: usize, k: usize, h: f64, kink_tol: f64) -> Result<Option<f64>> {
    check_index(params, layer, k)?;
    let pattern = |p: &NetworkParams| -> Vec<bool> { p.pre_activations(x).iter().flatten().map(|&z| z >= 0.0).collect() };
    if params.pre_activations(x).iter().flatten().any(|z| z.abs() < kink_tol) {
        return Ok(None);
    }
    let mut plus = params.clone();
    plus.layers[layer].biases_mut()[k] += h;
    let mut minus = params.clone();
    minus.layers[layer].biases_mut()[k] -= h;
    let base = pattern(params);
    if pattern(&plus) != base || pattern(&minus) != base {
        return Ok(None);
    }
    Ok(Some((plus.forward(x) - minus.forward(x)) / (2.0 * h)))
}

/// Multiplier turning `dy/db` into the gradient of a loss at target `y_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    AbsError,
    SquaredError,
}

pub fn loss_gradient_factor(y: f64, y_hat: f64, loss: Loss) -> f64 {
    let d = y - y_hat;
    match loss {
        Loss::AbsError => {
            if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        Loss::SquaredError => 2.0 * d,
    }
}

/// Shape of a zero-bias pre-activation `v(x)`, which is `L x` for `x < 0`
/// and `R x` for `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    /// Positive on both sides of the origin.
    VShape,
    /// Never positive; the activation is identically zero.
    WedgeDown,
    /// Positive only for `x < 0`.
    HalfLeft,
    /// Positive only for `x > 0`.
    HalfRight,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeShape {
    pub class: NodeClass,
    pub left_slope: f64,
    pub right_slope: f64,
}

impl NodeShape {
    pub fn from_slopes(left_slope: f64, right_slope: f64) -> Self {
        let class = match (left_slope < 0.0, right_slope > 0.0) {
            (true, true) => NodeClass::VShape,
            (false, false) => NodeClass::WedgeDown,
            (true, false) => NodeClass::HalfLeft,
            (false, true) => NodeClass::HalfRight,
        };
        NodeShape {
            class,
            left_slope,
            right_slope,
        }
    }
}

fn check_zero_bias(params: &NetworkParams) -> Result<()> {
    for (i, layer) in params.layers.iter().enumerate() {
        if layer.biases().iter().any(|&b| b != 0.0) {
            return Err(Error::NonzeroBias { layer: i });
        }
    }
    Ok(())
}

fn shape_in_trace(trace: &PropagationTrace, layer: usize, k: usize) -> Result<NodeShape> {
    let v = &trace.pre[layer][k];
    if v.knot_count() > 1 || v.breakpoints().first().is_some_and(|&b| b != 0.0) {
        return Err(Error::Inconsistent(format!(
            "zero-bias pre-activation ({layer}, {k}) has knots {:?}",
            v.breakpoints()
        )));
    }
    if v.eval(0.0) != 0.0 {
        return Err(Error::Inconsistent(format!("pre-activation ({layer}, {k}) is nonzero at 0")));
    }
    Ok(NodeShape::from_slopes(v.left_slope(), v.right_slope()))
}

/// Classifies neuron `k` of `layer` (0-based) of a network whose hidden
/// biases are all zero.
pub fn classify_node_zero_bias(params: &NetworkParams, layer: usize, k: usize) -> Result<NodeShape> {
    check_index(params, layer, k)?;
    check_zero_bias(params)?;
    shape_in_trace(&propagate_exact(params), layer, k)
}

/// Shapes of every neuron, indexed `[layer][k]`.
pub fn classify_all_zero_bias(params: &NetworkParams) -> Result<Vec<Vec<NodeShape>>> {
    check_zero_bias(params)?;
    let trace = propagate_exact(params);
    (0..params.depth())
        .map(|i| (0..params.layers[i].outputs()).map(|k| shape_in_trace(&trace, i, k)).collect())
        .collect()
}

/// Fraction of `WedgeDown` neurons in each layer.
pub fn wedge_down_by_layer(cfg: &NetConfig, trials: u64, seed: u64) -> Result<Vec<Estimator>> {
    cfg.validate()?;
    fold_trials(
        trials,
        || vec![Estimator::new(); cfg.depth()],
        |acc, t| {
            let shapes = classify_all_zero_bias(&sample_network(cfg, seed, t)?)?;
            for (e, layer) in acc.iter_mut().zip(&shapes) {
                for s in layer {
                    e.push(f64::from(u8::from(s.class == NodeClass::WedgeDown)));
                }
            }
            Ok(())
        },
        crate::irw::merge_vec,
    )
}

/// Exact-zero mass and moments of the remaining bias gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientDistribution {
    /// Indicator of an exactly zero gradient.
    pub zero_mass: Estimator,
    pub nonzero: Moments,
    /// Fraction of `WedgeDown` neurons in the layer.
    pub wedge_down: Estimator,
}

/// Bias gradients of every neuron in `layer` at every input in `xs`, pooled
/// over zero-bias networks.
pub fn gradient_distribution(cfg: &NetConfig, layer: usize, xs: &[f64], trials: u64, seed: u64) -> Result<GradientDistribution> {
    cfg.validate()?;
    if layer >= cfg.depth() {
        return Err(Error::config("layer", format!("network has {} layers", cfg.depth())));
    }
    if xs.is_empty() {
        return Err(Error::config("xs", "at least one input point is required"));
    }
    let (zero_mass, nonzero, wedge_down) = fold_trials(
        trials,
        || (Estimator::new(), Moments::new(), Estimator::new()),
        |(z, m, w), t| {
            let net = sample_network(cfg, seed, t)?;
            check_zero_bias(&net)?;
            let trace = propagate_exact(&net);
            for k in 0..net.layers[layer].outputs() {
                let s = shape_in_trace(&trace, layer, k)?;
                w.push(f64::from(u8::from(s.class == NodeClass::WedgeDown)));
            }
            for &x in xs {
                for &g in &bias_gradients(&net, x)[layer] {
                    if g == 0.0 {
                        z.push(1.0);
                    } else {
                        z.push(0.0);
                        m.push(g);
                    }
                }
            }
            Ok(())
        },
        |a, b| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
            a.2.merge(&b.2);
        },
    )?;
    Ok(GradientDistribution {
        zero_mass,
        nonzero,
        wedge_down,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::{DenseLayer, DistributionSpec};

    #[test]
    fn shallow_gradient_is_gated_weight() {
        let net = NetworkParams::shallow(&[1.0, -2.0], &[0.5, 1.0], &[3.0, -4.0], 0.0).unwrap();
        // At x = 1: pre = [1.5, -1.0].
        assert_eq!(bias_gradient(&net, 1.0, 0, 0).unwrap(), 3.0);
        assert_eq!(bias_gradient(&net, 1.0, 0, 1).unwrap(), 0.0);
        // H(0) = 1 at x = 0.5 for the second unit.
        assert_eq!(bias_gradient(&net, 0.5, 0, 1).unwrap(), -4.0);
    }

    #[test]
    fn dead_unit_has_zero_gradient() {
        let l0 = DenseLayer::new(1, vec![1.0, 1.0], vec![0.0, -100.0]).unwrap();
        let l1 = DenseLayer::new(2, vec![1.0, 1.0], vec![0.0]).unwrap();
        let out = DenseLayer::new(1, vec![2.0], vec![0.0]).unwrap();
        let net = NetworkParams::from_layers(vec![l0, l1], out).unwrap();
        for x in [-1.0, 0.3, 5.0] {
            assert_eq!(bias_gradient(&net, x, 0, 1).unwrap(), 0.0);
        }
    }

    #[test]
    fn bad_indices_are_rejected() {
        let net = NetworkParams::shallow(&[1.0], &[0.0], &[1.0], 0.0).unwrap();
        assert!(bias_gradient(&net, 0.0, 1, 0).is_err());
        assert!(bias_gradient(&net, 0.0, 0, 1).is_err());
    }

    #[test]
    fn loss_factors() {
        assert_eq!(loss_gradient_factor(3.0, 1.0, Loss::SquaredError), 4.0);
        assert_eq!(loss_gradient_factor(1.0, 3.0, Loss::AbsError), -1.0);
        assert_eq!(loss_gradient_factor(2.0, 2.0, Loss::SquaredError), 0.0);
    }

    #[test]
    fn first_layer_shapes() {
        let net = NetworkParams::shallow(&[2.0, -1.0], &[0.0, 0.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(classify_node_zero_bias(&net, 0, 0).unwrap().class, NodeClass::HalfRight);
        assert_eq!(classify_node_zero_bias(&net, 0, 1).unwrap().class, NodeClass::HalfLeft);
        let biased = NetworkParams::shallow(&[2.0], &[1.0], &[1.0], 0.0).unwrap();
        assert!(matches!(
            classify_node_zero_bias(&biased, 0, 0),
            Err(Error::NonzeroBias { layer: 0 })
        ));
    }

    #[test]
    fn shape_table() {
        assert_eq!(NodeShape::from_slopes(-1.0, 1.0).class, NodeClass::VShape);
        assert_eq!(NodeShape::from_slopes(1.0, -1.0).class, NodeClass::WedgeDown);
        assert_eq!(NodeShape::from_slopes(0.0, 0.0).class, NodeClass::WedgeDown);
        assert_eq!(NodeShape::from_slopes(-1.0, -1.0).class, NodeClass::HalfLeft);
        assert_eq!(NodeShape::from_slopes(1.0, 1.0).class, NodeClass::HalfRight);
    }

    #[test]
    fn all_zero_weights_have_full_zero_mass() {
        let cfg = NetConfig::zero_bias(vec![4, 4], DistributionSpec::ZERO);
        let d = gradient_distribution(&cfg, 1, &[-1.0, 0.5, 2.0], 20, 1).unwrap();
        assert_eq!(d.zero_mass.mean(), 1.0);
        assert_eq!(d.nonzero.count(), 0);
    }
}
