//! Random dense ReLU networks with scalar input and output.
//!
//! Layer `i` computes `v_i = relu(W_i v_{i-1} + b_i)` with `v_0 = x`, and the
//! output is the affine map `y = w_out . v_l + b_out` with no activation.
//! Layers are indexed from 0 in this API.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::pwl::{same_abscissa, AffineBasis, PwlFunction};
use crate::rng::trial_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistKind {
    StandardNormal,
    /// `U(-1, 1)`, sampled on `[-1, 1)`.
    UniformSym,
    /// `{-1, 1}` with equal probability.
    Rademacher,
    PointMassZero,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub kind: DistKind,
    pub scale: f64,
}

impl DistributionSpec {
    pub const NORMAL: Self = Self::unit(DistKind::StandardNormal);
    pub const UNIFORM: Self = Self::unit(DistKind::UniformSym);
    pub const RADEMACHER: Self = Self::unit(DistKind::Rademacher);
    pub const ZERO: Self = Self::unit(DistKind::PointMassZero);

    pub const fn unit(kind: DistKind) -> Self {
        DistributionSpec { kind, scale: 1.0 }
    }

    pub fn new(kind: DistKind, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config("scale", format!("must be positive and finite, got {scale}")));
        }
        Ok(DistributionSpec { kind, scale })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistKind::StandardNormal => self.scale * rng.sample::<f64, _>(StandardNormal),
            DistKind::UniformSym => self.scale * rng.random_range(-1.0..1.0),
            DistKind::Rademacher => {
                if rng.random::<bool>() {
                    self.scale
                } else {
                    -self.scale
                }
            }
            DistKind::PointMassZero => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        let s2 = self.scale * self.scale;
        match self.kind {
            DistKind::StandardNormal | DistKind::Rademacher => s2,
            DistKind::UniformSym => s2 / 3.0,
            DistKind::PointMassZero => 0.0,
        }
    }

    /// True when the distribution has no atoms.
    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, DistKind::StandardNormal | DistKind::UniformSym)
    }

    pub fn is_zero(&self) -> bool {
        self.kind == DistKind::PointMassZero
    }
}

impl Default for DistributionSpec {
    fn default() -> Self {
        Self::NORMAL
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.kind {
            DistKind::StandardNormal => "N(0,1)",
            DistKind::UniformSym => "U(-1,1)",
            DistKind::Rademacher => "{-1,1}",
            DistKind::PointMassZero => return f.write_str("0"),
        };
        if self.scale == 1.0 {
            f.write_str(label)
        } else {
            write!(f, "{}*{}", self.scale, label)
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Accepts `normal`, `uniform`, `rademacher`, `zero` or the labels
    /// printed by `Display`, optionally prefixed by `scale*`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (scale, name) = match s.split_once('*') {
            Some((a, b)) => {
                let scale: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::config("distribution", format!("bad scale in `{s}`")))?;
                (scale, b.trim())
            }
            None => (1.0, s),
        };
        let kind = match name.to_ascii_lowercase().replace(' ', "").as_str() {
            "normal" | "n" | "n(0,1)" | "gaussian" => DistKind::StandardNormal,
            "uniform" | "u" | "u(-1,1)" => DistKind::UniformSym,
            "rademacher" | "sign" | "{-1,1}" | "pm1" => DistKind::Rademacher,
            "zero" | "0" => DistKind::PointMassZero,
            _ => return Err(Error::config("distribution", format!("unknown distribution `{s}`"))),
        };
        DistributionSpec::new(kind, scale)
    }
}

impl Serialize for DistributionSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Shape and parameter distributions of a network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetConfig {
    pub widths: Vec<usize>,
    pub w_input: DistributionSpec,
    pub b_input: DistributionSpec,
    pub w_hidden: DistributionSpec,
    pub b_hidden: DistributionSpec,
    pub w_out: DistributionSpec,
    pub b_out: DistributionSpec,
}

impl NetConfig {
    /// Every weight and bias drawn from `dist`.
    pub fn all(widths: Vec<usize>, dist: DistributionSpec) -> Self {
        NetConfig {
            widths,
            w_input: dist,
            b_input: dist,
            w_hidden: dist,
            b_hidden: dist,
            w_out: dist,
            b_out: dist,
        }
    }

    pub fn uniform(widths: Vec<usize>) -> Self {
        Self::all(widths, DistributionSpec::UNIFORM)
    }

    /// A single hidden layer of width `n` with the four distributions of
    /// `w1`, `b1`, `w2` and `b2`.
    pub fn shallow(
        n: usize,
        w1: DistributionSpec,
        b1: DistributionSpec,
        w2: DistributionSpec,
        b2: DistributionSpec,
    ) -> Self {
        NetConfig {
            widths: vec![n],
            w_input: w1,
            b_input: b1,
            w_hidden: w1,
            b_hidden: b1,
            w_out: w2,
            b_out: b2,
        }
    }

    /// All biases zero, all weights from `w`.
    pub fn zero_bias(widths: Vec<usize>, w: DistributionSpec) -> Self {
        NetConfig {
            widths,
            w_input: w,
            b_input: DistributionSpec::ZERO,
            w_hidden: w,
            b_hidden: DistributionSpec::ZERO,
            w_out: w,
            b_out: DistributionSpec::ZERO,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len()
    }

    pub fn neurons(&self) -> usize {
        self.widths.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::config("widths", "at least one layer is required"));
        }
        if self.widths.contains(&0) {
            return Err(Error::config("widths", "every layer needs at least one neuron"));
        }
        Ok(())
    }
}

/// One dense layer; `weights` is row-major with one row per output neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(inputs: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if inputs == 0 || biases.is_empty() || weights.len() != inputs * biases.len() {
            return Err(Error::config(
                "weights",
                format!(
                    "{} weights do not fit {} inputs and {} outputs",
                    weights.len(),
                    inputs,
                    biases.len()
                ),
            ));
        }
        Ok(DenseLayer { inputs, weights, biases })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.biases.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.inputs..(k + 1) * self.inputs]
    }

    pub fn weight(&self, k: usize, j: usize) -> f64 {
        self.weights[k * self.inputs + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<DenseLayer>,
    pub output: DenseLayer,
    pub master_seed: u64,
    pub trial_index: u64,
}

impl NetworkParams {
    /// Assembles hand-written parameters; provenance fields are zero.
    pub fn from_layers(layers: Vec<DenseLayer>, output: DenseLayer) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::config("widths", "at least one layer is required"));
        }
        if layers[0].inputs() != 1 {
            return Err(Error::config("weights", "the first layer takes a scalar input"));
        }
        for i in 1..layers.len() {
            if layers[i].inputs() != layers[i - 1].outputs() {
                return Err(Error::config("weights", format!("layer {i} input size mismatch")));
            }
        }
        if output.inputs() != layers.last().unwrap().outputs() {
            return Err(Error::config("weights", "output layer input size mismatch"));
        }
        Ok(NetworkParams {
            layers,
            output,
            master_seed: 0,
            trial_index: 0,
        })
    }

    /// A single hidden layer `y = sum_j w2_j relu(w1_j x + b1_j) + b2`.
    pub fn shallow(w1: &[f64], b1: &[f64], w2: &[f64], b2: f64) -> Result<Self> {
        let n = w1.len();
        let hidden = DenseLayer::new(1, w1.to_vec(), b1.to_vec())?;
        let output = DenseLayer::new(n, w2.to_vec(), vec![b2])?;
        Self::from_layers(vec![hidden], output)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.layers.iter().map(DenseLayer::outputs).collect()
    }

    /// Direct forward pass at one input.
    pub fn forward(&self, x: f64) -> f64 {
        let mut v = vec![x];
        for layer in &self.layers {
            v = (0..layer.outputs())
                .map(|k| {
                    let z: f64 = layer.row(k).iter().zip(&v).map(|(w, a)| w * a).sum::<f64>() + layer.biases[k];
                    z.max(0.0)
                })
                .collect();
        }
        self.output.row(0).iter().zip(&v).map(|(w, a)| w * a).sum::<f64>() + self.output.biases[0]
    }

    /// Pre-activations of every layer at `x`, outermost index the layer.
    pub fn pre_activations(&self, x: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut v = vec![x];
        for layer in &self.layers {
            let pre: Vec<f64> = (0..layer.outputs())
                .map(|k| layer.row(k).iter().zip(&v).map(|(w, a)| w * a).sum::<f64>() + layer.biases[k])
                .collect();
            v = pre.iter().map(|z| z.max(0.0)).collect();
            out.push(pre);
        }
        out
    }
}

/// Draws a network. Parameters are drawn layer by layer, weights before
/// biases, then the output weights and bias.
pub fn sample_network(cfg: &NetConfig, master_seed: u64, trial_index: u64) -> Result<NetworkParams> {
    cfg.validate()?;
    let mut rng = trial_rng(master_seed, trial_index);
    let mut layers = Vec::with_capacity(cfg.depth());
    let mut inputs = 1;
    for (i, &width) in cfg.widths.iter().enumerate() {
        let (wd, bd) = if i == 0 {
            (cfg.w_input, cfg.b_input)
        } else {
            (cfg.w_hidden, cfg.b_hidden)
        };
        let weights = (0..width * inputs).map(|_| wd.sample(&mut rng)).collect();
        let biases = (0..width).map(|_| bd.sample(&mut rng)).collect();
        layers.push(DenseLayer { inputs, weights, biases });
        inputs = width;
    }
    let weights = (0..inputs).map(|_| cfg.w_out.sample(&mut rng)).collect();
    let output = DenseLayer {
        inputs,
        weights,
        biases: vec![cfg.b_out.sample(&mut rng)],
    };
    Ok(NetworkParams {
        layers,
        output,
        master_seed,
        trial_index,
    })
}

/// Every intermediate spline of a network.
#[derive(Debug, Clone)]
pub struct PropagationTrace {
    /// `pre[i][k]` is the pre-activation of neuron `k` in layer `i`.
    pub pre: Vec<Vec<PwlFunction>>,
    /// `post[i][k] = relu(pre[i][k])`.
    pub post: Vec<Vec<PwlFunction>>,
    pub output: PwlFunction,
}

impl PropagationTrace {
    /// Sorted union of the knots of every neuron output in `layer`.
    pub fn layer_knots(&self, layer: usize) -> Vec<f64> {
        union_breakpoints(&self.post[layer])
    }
}

pub(crate) fn union_breakpoints(fs: &[PwlFunction]) -> Vec<f64> {
    let mut pts: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints().iter().copied()).collect();
    pts.sort_unstable_by(f64::total_cmp);
    pts.dedup_by(|a, b| same_abscissa(*a, *b));
    pts
}

pub fn propagate_exact(params: &NetworkParams) -> PropagationTrace {
    let mut pre = Vec::with_capacity(params.depth());
    let mut post: Vec<Vec<PwlFunction>> = Vec::with_capacity(params.depth());
    let input = [PwlFunction::identity()];
    for layer in &params.layers {
        let basis = match post.last() {
            Some(prev) => AffineBasis::new(prev),
            None => AffineBasis::new(&input),
        };
        let layer_pre: Vec<PwlFunction> = (0..layer.outputs())
            .map(|k| basis.combine(layer.row(k), layer.biases[k]))
            .collect();
        post.push(layer_pre.iter().map(PwlFunction::relu).collect());
        pre.push(layer_pre);
    }
    let output = AffineBasis::new(post.last().unwrap()).combine(params.output.row(0), params.output.biases[0]);
    PropagationTrace { pre, post, output }
}

/// Output spline only.
pub fn output_spline(params: &NetworkParams) -> PwlFunction {
    propagate_exact(params).output
}

pub fn network_knot_count(params: &NetworkParams) -> usize {
    output_spline(params).knot_count()
}

/// `(1 - 2^-n_next)^m_prev`: the chance that all `m_prev` upstream knots
/// survive a layer of `n_next` neurons.
pub fn preservation_probability(n_next: u32, m_prev: u64) -> f64 {
    if m_prev == 0 {
        return 1.0;
    }
    let p = (-(n_next as f64)).exp2();
    (m_prev as f64 * (-p).ln_1p()).exp()
}

/// Width at which all `m_prev` knots survive with probability one half, and
/// its large-`m` series `log2 m - log2 ln 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPreservation {
    pub exact: f64,
    pub series: f64,
}

pub fn min_width_half_preservation(m_prev: u64) -> Result<HalfPreservation> {
    if m_prev == 0 {
        return Err(Error::config("m_prev", "must be at least 1"));
    }
    let m = m_prev as f64;
    // 1 - 2^(-1/m) computed as -expm1(-ln 2 / m).
    let exact = -(-(-std::f64::consts::LN_2 / m).exp_m1()).log2();
    let series = m.log2() - std::f64::consts::LN_2.log2();
    Ok(HalfPreservation { exact, series })
}

/// Knot survival from layer `layer - 1` into layer `layer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Retention {
    pub retained: usize,
    pub total: usize,
}

/// Counts the knots of layer `layer - 1` outputs that are still knots of
/// some layer `layer` output. `layer` is 0-based and must be at least 1.
pub fn knot_retention_trial(params: &NetworkParams, layer: usize) -> Result<Retention> {
    if layer == 0 || layer >= params.depth() {
        return Err(Error::config(
            "layer",
            format!("must lie in 1..{}, got {layer}", params.depth()),
        ));
    }
    let trace = propagate_exact(params);
    Ok(retention_in_trace(&trace, layer))
}

pub fn retention_in_trace(trace: &PropagationTrace, layer: usize) -> Retention {
    let upstream = trace.layer_knots(layer - 1);
    let downstream = trace.layer_knots(layer);
    let mut retained = 0;
    let mut j = 0;
    for &u in &upstream {
        while j < downstream.len() && downstream[j] < u && !same_knot(downstream[j], u) {
            j += 1;
        }
        if j < downstream.len() && same_knot(downstream[j], u) {
            retained += 1;
        }
    }
    Retention {
        retained,
        total: upstream.len(),
    }
}

fn same_knot(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * 1f64.max(a.abs()).max(b.abs())
}
