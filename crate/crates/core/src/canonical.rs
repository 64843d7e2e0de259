//! Forward-facing canonical form of a single-layer network.
//!
//! Every unit `w2 relu(w1 x + b1)` with `w1 < 0` is rewritten with the
//! identity `relu(-z) = relu(z) - z`, so the network becomes
//!
//! ```text
//! y(x) = sum_j s_j relu(x - x_j) + c1 x + c0
//! s_j = w2_j |w1_j|,  x_j = -b1_j / w1_j
//! c1 = sum_{w1_j < 0} w2_j w1_j,  c0 = sum_{w1_j < 0} w2_j b1_j + b2
//! ```

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiments::fold_trials;
use crate::netgen::{sample_network, NetConfig, NetworkParams};
use crate::pwl::{count_sign_changes, same_abscissa, sign, PwlFunction};
use crate::stats::{CompensatedSum, Covariance, Estimator, Moments};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub x: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalForm {
    knots: Vec<Knot>,
    c1: f64,
    c0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootDomain {
    AllReals,
    /// The open span `(x_1, x_n)` between the outermost knots.
    InteriorKnotSpan,
}

impl CanonicalForm {
    /// Sorts knots by location (stable on ties) and merges coincident knots
    /// by summing their slope increments.
    pub fn new(mut knots: Vec<Knot>, c1: f64, c0: f64) -> Result<Self> {
        if !(c1.is_finite() && c0.is_finite()) || knots.iter().any(|k| !(k.x.is_finite() && k.s.is_finite())) {
            return Err(Error::InvalidPwl("canonical form needs finite parameters".into()));
        }
        knots.sort_by(|a, b| a.x.total_cmp(&b.x));
        let mut merged: Vec<Knot> = Vec::with_capacity(knots.len());
        for k in knots {
            match merged.last_mut() {
                Some(last) if same_abscissa(last.x, k.x) => last.s += k.s,
                _ => merged.push(k),
            }
        }
        Ok(CanonicalForm { knots: merged, c1, c0 })
    }

    /// Canonical form of a single-layer network.
    pub fn from_network(params: &NetworkParams) -> Result<Self> {
        if params.depth() != 1 {
            return Err(Error::config("widths", "canonical form needs exactly one hidden layer"));
        }
        let hidden = &params.layers[0];
        let w2 = params.output.row(0);
        let mut knots = Vec::with_capacity(hidden.outputs());
        let mut c1 = 0.0;
        let mut c0 = params.output.biases()[0];
        for (j, (&w1, &b1)) in hidden.weights().iter().zip(hidden.biases()).enumerate() {
            if w1 == 0.0 {
                return Err(Error::DegenerateNeuron { index: j });
            }
            knots.push(Knot {
                x: -b1 / w1,
                s: w2[j] * w1.abs(),
            });
            if w1 < 0.0 {
                c1 += w2[j] * w1;
                c0 += w2[j] * b1;
            }
        }
        Self::new(knots, c1, c0)
    }

    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    /// `sum_j s_j relu(x - x_j) + c1 x + c0`, summed directly with
    /// Neumaier compensation.
    pub fn eval(&self, x: f64) -> f64 {
        let mut sum = CompensatedSum::new(0.0);
        sum.add_product(self.c1, x);
        for k in self.knots.iter().filter(|k| x > k.x) {
            sum.add_scaled_diff(k.s, x, k.x);
        }
        sum.add(self.c0);
        sum.value()
    }

    /// Same knots with the line replaced by `c1 x + c0`.
    pub fn with_line(&self, c1: f64, c0: f64) -> Self {
        CanonicalForm {
            knots: self.knots.clone(),
            c1,
            c0,
        }
    }

    /// Same knots with the line coefficients multiplied by the given factors.
    pub fn with_line_scaled(&self, c1_factor: f64, c0_factor: f64) -> Self {
        self.with_line(self.c1 * c1_factor, self.c0 * c0_factor)
    }

    /// The integrated walk alone, `c1 = c0 = 0`.
    pub fn homogeneous(&self) -> Self {
        self.with_line(0.0, 0.0)
    }

    /// Multiplies every `s_j`, `c1` and `c0` by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        CanonicalForm {
            knots: self.knots.iter().map(|k| Knot { x: k.x, s: a * k.s }).collect(),
            c1: a * self.c1,
            c0: a * self.c0,
        }
    }

    /// Value at every knot, by the recursion `y_{k+1} = y_k + (x_{k+1} - x_k) m_k`
    /// where `m_k = c1 + s_1 + ... + s_k` is the slope right of knot `k`.
    pub fn knot_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.knots.len());
        let Some(first) = self.knots.first() else {
            return out;
        };
        let mut y = self.c1 * first.x + self.c0;
        let mut m = self.c1;
        let mut prev = first.x;
        for k in &self.knots {
            y += (k.x - prev) * m;
            m += k.s;
            prev = k.x;
            out.push(y);
        }
        out
    }

    /// Slope right of the last knot, `c1 + sum_j s_j`.
    pub fn final_slope(&self) -> f64 {
        self.c1 + self.knots.iter().map(|k| k.s).sum::<f64>()
    }

    pub fn to_pwl(&self) -> Result<PwlFunction> {
        if self.knots.is_empty() {
            return Ok(PwlFunction::line(self.c1, self.c0));
        }
        let xs: Vec<f64> = self.knots.iter().map(|k| k.x).collect();
        let mut slopes = Vec::with_capacity(xs.len() + 1);
        let mut m = self.c1;
        slopes.push(m);
        for k in &self.knots {
            m += k.s;
            slopes.push(m);
        }
        let anchor = self.c1 * xs[0] + self.c0;
        PwlFunction::from_anchor_slopes(xs, anchor, slopes)
    }

    /// Whether the left ray `(-inf, x_1)` and right ray `(x_n, inf)` each
    /// hold a root.
    pub fn end_roots(&self) -> (bool, bool) {
        let ys = self.knot_values();
        match (ys.first(), ys.last()) {
            (Some(&y1), Some(&yn)) => {
                let left = self.c1 != 0.0 && y1 != 0.0 && sign(self.c1) == sign(y1);
                let mr = self.final_slope();
                let right = mr != 0.0 && yn != 0.0 && sign(mr) != sign(yn);
                (left, right)
            }
            _ => (false, false),
        }
    }

    pub fn root_count(&self, domain: RootDomain) -> usize {
        let ys = self.knot_values();
        if ys.is_empty() {
            return usize::from(self.c1 != 0.0 && domain == RootDomain::AllReals);
        }
        let interior = ys.iter().map(|&y| sign(y));
        match domain {
            RootDomain::InteriorKnotSpan => count_sign_changes(interior),
            RootDomain::AllReals => {
                let y1 = ys[0];
                let yn = *ys.last().unwrap();
                let mr = self.final_slope();
                let minus_inf = if self.c1 != 0.0 { -sign(self.c1) } else { sign(y1) };
                let plus_inf = if mr != 0.0 { sign(mr) } else { sign(yn) };
                count_sign_changes(std::iter::once(minus_inf).chain(interior).chain(std::iter::once(plus_inf)))
            }
        }
    }
}

/// A sample correlation with its normal-theory standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrEstimate {
    pub r: f64,
    pub se: f64,
    pub n: u64,
}

impl From<&Covariance> for CorrEstimate {
    fn from(c: &Covariance) -> Self {
        let r = c.correlation();
        CorrEstimate {
            r,
            se: c.correlation_se(),
            n: c.count(),
        }
    }
}

/// A sample variance with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarEstimate {
    pub value: f64,
    pub se: f64,
}

impl From<&Moments> for VarEstimate {
    fn from(m: &Moments) -> Self {
        VarEstimate {
            value: m.variance(),
            se: m.variance_se(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamStats {
    /// Pooled over every neuron of every trial.
    pub corr_s_x: CorrEstimate,
    /// One neuron per trial, the first drawn.
    pub corr_s_c1: CorrEstimate,
    pub corr_c0_c1: CorrEstimate,
    pub var_c0: VarEstimate,
    pub var_c1: VarEstimate,
    pub trials: u64,
}

#[derive(Debug, Clone, Default)]
struct ParamAcc {
    s_x: Covariance,
    s_c1: Covariance,
    c0_c1: Covariance,
    c0: Moments,
    c1: Moments,
}

impl ParamAcc {
    fn merge(&mut self, o: &ParamAcc) {
        self.s_x.merge(&o.s_x);
        self.s_c1.merge(&o.s_c1);
        self.c0_c1.merge(&o.c0_c1);
        self.c0.merge(&o.c0);
        self.c1.merge(&o.c1);
    }
}

fn shallow_config(cfg: &NetConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.depth() != 1 {
        return Err(Error::config("widths", "expected a single hidden layer"));
    }
    Ok(())
}

pub fn parameter_statistics(cfg: &NetConfig, trials: u64, seed: u64) -> Result<ParamStats> {
    shallow_config(cfg)?;
    let acc = fold_trials(
        trials,
        ParamAcc::default,
        |acc, t| {
            let net = sample_network(cfg, seed, t)?;
            let cf = CanonicalForm::from_network(&net)?;
            let hidden = &net.layers[0];
            let w2 = net.output.row(0);
            for (j, (&w1, &b1)) in hidden.weights().iter().zip(hidden.biases()).enumerate() {
                acc.s_x.push(w2[j] * w1.abs(), -b1 / w1);
            }
            acc.s_c1.push(w2[0] * hidden.weights()[0].abs(), cf.c1());
            acc.c0_c1.push(cf.c0(), cf.c1());
            acc.c0.push(cf.c0());
            acc.c1.push(cf.c1());
            Ok(())
        },
        |a, b| a.merge(b),
    )?;
    Ok(ParamStats {
        corr_s_x: (&acc.s_x).into(),
        corr_s_c1: (&acc.s_c1).into(),
        corr_c0_c1: (&acc.c0_c1).into(),
        var_c0: (&acc.c0).into(),
        var_c1: (&acc.c1).into(),
        trials,
    })
}

/// Frequencies of a root on the left and right rays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndRootStats {
    pub left: Estimator,
    pub right: Estimator,
}

/// End-root frequencies, optionally after scaling the line by
/// `(c1_factor, c0_factor)`.
pub fn end_root_probability(
    cfg: &NetConfig,
    trials: u64,
    seed: u64,
    c1_factor: f64,
    c0_factor: f64,
) -> Result<EndRootStats> {
    shallow_config(cfg)?;
    let (left, right) = fold_trials(
        trials,
        || (Estimator::new(), Estimator::new()),
        |(l, r), t| {
            let cf = CanonicalForm::from_network(&sample_network(cfg, seed, t)?)?
                .with_line_scaled(c1_factor, c0_factor);
            let (a, b) = cf.end_roots();
            l.push(f64::from(u8::from(a)));
            r.push(f64::from(u8::from(b)));
            Ok(())
        },
        |a, b| {
            a.0.merge(&b.0);
            a.1.merge(&b.1);
        },
    )?;
    Ok(EndRootStats { left, right })
}

/// The sampled distribution of `c0 / c1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioStats {
    /// Sorted finite ratios; trials with `c1 = 0` are dropped.
    pub ratios: Vec<f64>,
    pub p_greater_than_one: Estimator,
}

impl RatioStats {
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.ratios, p)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Cauchy scale estimated as half the interquartile range.
    pub fn iqr_scale(&self) -> f64 {
        0.5 * (self.quantile(0.75) - self.quantile(0.25))
    }

    /// Kolmogorov distance to a centered Cauchy law of the given scale.
    pub fn ks_distance(&self, scale: f64) -> f64 {
        let n = self.ratios.len() as f64;
        self.ratios
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let f = 0.5 + (r / scale).atan() / std::f64::consts::PI;
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn cauchy_ratio_stats(cfg: &NetConfig, trials: u64, seed: u64) -> Result<RatioStats> {
    shallow_config(cfg)?;
    let pairs: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let cf = CanonicalForm::from_network(&sample_network(cfg, seed, t)?)?;
            Ok((cf.c0(), cf.c1()))
        })
        .collect::<Result<_>>()?;
    let mut p = Estimator::new();
    let mut ratios = Vec::with_capacity(pairs.len());
    for (c0, c1) in pairs {
        if c1 != 0.0 {
            let r = c0 / c1;
            p.push(f64::from(u8::from(r > 1.0)));
            ratios.push(r);
        }
    }
    ratios.sort_unstable_by(f64::total_cmp);
    Ok(RatioStats {
        ratios,
        p_greater_than_one: p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pwl::Interval;

    fn one(w1: f64, b1: f64, w2: f64, b2: f64) -> CanonicalForm {
        CanonicalForm::from_network(&NetworkParams::shallow(&[w1], &[b1], &[w2], b2).unwrap()).unwrap()
    }

    #[test]
    fn backward_unit_flips() {
        let cf = one(-1.0, 0.0, 1.0, 0.0);
        assert_eq!(cf.knots(), &[Knot { x: 0.0, s: 1.0 }]);
        assert_eq!((cf.c1(), cf.c0()), (-1.0, 0.0));
        for x in [-2.0, -0.5, 0.0, 3.0] {
            assert_eq!(cf.eval(x), (-x as f64).max(0.0));
        }
    }

    #[test]
    fn forward_unit_substitution() {
        let cf = one(2.0, -4.0, 3.0, 5.0);
        assert_eq!(cf.knots(), &[Knot { x: 2.0, s: 6.0 }]);
        assert_eq!((cf.c1(), cf.c0()), (0.0, 5.0));
    }

    #[test]
    fn zero_input_weight_is_rejected() {
        let net = NetworkParams::shallow(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            CanonicalForm::from_network(&net),
            Err(Error::DegenerateNeuron { index: 1 })
        ));
    }

    #[test]
    fn coincident_knots_merge() {
        let cf = CanonicalForm::new(
            vec![Knot { x: 1.0, s: 2.0 }, Knot { x: -1.0, s: 1.0 }, Knot { x: 1.0, s: 0.5 }],
            0.0,
            0.0,
        )
        .unwrap();
        assert_eq!(cf.knots(), &[Knot { x: -1.0, s: 1.0 }, Knot { x: 1.0, s: 2.5 }]);
    }

    #[test]
    fn pure_line_root_counts() {
        let cf = CanonicalForm::new(vec![Knot { x: -1.0, s: 0.0 }, Knot { x: 2.0, s: 0.0 }], 1.0, 0.0).unwrap();
        assert_eq!(cf.root_count(RootDomain::AllReals), 1);
        assert_eq!(cf.root_count(RootDomain::InteriorKnotSpan), 1);
        let right = cf.with_line(1.0, 5.0);
        assert_eq!(right.root_count(RootDomain::AllReals), 1);
        assert_eq!(right.root_count(RootDomain::InteriorKnotSpan), 0);
        assert_eq!(right.end_roots(), (true, false));
    }

    #[test]
    fn flat_left_ray_has_no_root() {
        let cf = CanonicalForm::new(vec![Knot { x: 0.0, s: 1.0 }], 0.0, 0.0).unwrap();
        assert_eq!(cf.end_roots(), (false, false));
        assert_eq!(cf.root_count(RootDomain::AllReals), 0);
    }

    #[test]
    fn agrees_with_spline_root_count() {
        let cfg = NetConfig::shallow(
            40,
            crate::netgen::DistributionSpec::NORMAL,
            crate::netgen::DistributionSpec::NORMAL,
            crate::netgen::DistributionSpec::RADEMACHER,
            crate::netgen::DistributionSpec::ZERO,
        );
        for t in 0..200 {
            let cf = CanonicalForm::from_network(&sample_network(&cfg, 4, t).unwrap()).unwrap();
            let f = cf.to_pwl().unwrap();
            let r = cf.root_count(RootDomain::AllReals);
            assert_eq!(r, f.count_sign_change_roots(Interval::real()), "trial {t}");
            let (l, rr) = cf.end_roots();
            assert_eq!(r, cf.root_count(RootDomain::InteriorKnotSpan) + usize::from(l) + usize::from(rr));
        }
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_sorted(&v, 0.5), 1.5);
        assert_eq!(quantile_sorted(&v, 1.0), 3.0);
    }
}
