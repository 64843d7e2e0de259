//! Continuous piecewise-linear functions on the whole real line.
//!
//! A [`PwlFunction`] is stored as its sorted breakpoints, the function value
//! at each breakpoint, and one slope per segment (including the two
//! half-infinite end rays). Affine combinations act directly on the slopes
//! and values; [`PwlFunction::relu`] inserts a breakpoint at every sign-change
//! root and drops breakpoints where the function is negative on both sides.

use crate::error::{Error, Result};

/// Relative slope-change threshold below which a breakpoint is not a knot.
pub const KNOT_TOL: f64 = 1e-9;

/// Breakpoints closer than `MERGE_TOL * max(1, |x|)` are the same point.
pub const MERGE_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn same_abscissa(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * 1f64.max(a.abs()).max(b.abs())
}

#[inline]
fn is_genuine_knot(left: f64, right: f64) -> bool {
    (right - left).abs() > KNOT_TOL * 1f64.max(left.abs()).max(right.abs())
}

#[inline]
pub(crate) fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Number of strict sign changes in a sequence, skipping exact zeros.
///
/// A run of zeros between opposite signs is one crossing; between equal
/// signs it is a tangency and does not count.
pub fn count_sign_changes<I: IntoIterator<Item = i8>>(signs: I) -> usize {
    let mut last = 0i8;
    let mut count = 0;
    for s in signs {
        if s == 0 {
            continue;
        }
        if last != 0 && s != last {
            count += 1;
        }
        last = s;
    }
    count
}

/// An open interval of the real line; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidPwl(format!(
                "interval requires lo < hi, got ({lo}, {hi})"
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// The whole real line.
    pub fn real() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PwlFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    // Value at 0 when there are no breakpoints, else values[0].
    anchor: f64,
}

impl PwlFunction {
    /// The line `slope * x + intercept`.
    pub fn line(slope: f64, intercept: f64) -> Self {
        PwlFunction {
            breakpoints: Vec::new(),
            values: Vec::new(),
            slopes: vec![slope],
            anchor: intercept,
        }
    }

    pub fn identity() -> Self {
        Self::line(1.0, 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::line(0.0, c)
    }

    /// `max(0, x)`.
    pub fn relu_unit() -> Self {
        PwlFunction {
            breakpoints: vec![0.0],
            values: vec![0.0],
            slopes: vec![0.0, 1.0],
            anchor: 0.0,
        }
    }

    /// Builds a function from breakpoints, the value at the first breakpoint
    /// (or at 0 when there are none) and one slope per segment.
    pub fn from_anchor_slopes(breakpoints: Vec<f64>, anchor: f64, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidPwl(format!(
                "{} breakpoints need {} slopes, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                slopes.len()
            )));
        }
        let mut values = Vec::with_capacity(breakpoints.len());
        if let Some(&first) = breakpoints.first() {
            values.push(anchor);
            let mut prev = first;
            for (i, &b) in breakpoints.iter().enumerate().skip(1) {
                let v = values[i - 1] + slopes[i] * (b - prev);
                values.push(v);
                prev = b;
            }
        }
        Self::from_parts(breakpoints, values, slopes, anchor)
    }

    /// Builds a function from breakpoints, per-breakpoint values and slopes,
    /// checking ordering and continuity. Non-genuine breakpoints are pruned.
    pub fn from_values(breakpoints: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() || slopes.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidPwl("length mismatch".into()));
        }
        if breakpoints.is_empty() {
            return Err(Error::InvalidPwl(
                "use PwlFunction::line for functions without breakpoints".into(),
            ));
        }
        for i in 1..breakpoints.len() {
            let dx = breakpoints[i] - breakpoints[i - 1];
            let predicted = values[i - 1] + slopes[i] * dx;
            let scale = 1f64
                .max(values[i].abs())
                .max(values[i - 1].abs())
                .max((slopes[i] * dx).abs());
            if (predicted - values[i]).abs() > 1e-9 * scale {
                return Err(Error::InvalidPwl(format!(
                    "discontinuity at breakpoint {i}: {predicted} vs {}",
                    values[i]
                )));
            }
        }
        let anchor = values[0];
        Self::from_parts(breakpoints, values, slopes, anchor)
    }

    fn from_parts(breakpoints: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>, anchor: f64) -> Result<Self> {
        let finite = breakpoints
            .iter()
            .chain(&values)
            .chain(&slopes)
            .all(|v| v.is_finite())
            && anchor.is_finite();
        if !finite {
            return Err(Error::InvalidPwl("non-finite entry".into()));
        }
        for w in breakpoints.windows(2) {
            if !(w[0] < w[1]) || same_abscissa(w[0], w[1]) {
                return Err(Error::InvalidPwl(format!(
                    "breakpoints not strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self::pruned(breakpoints, values, slopes, anchor))
    }

    /// Drops breakpoints whose slope change is below [`KNOT_TOL`]. Inputs are
    /// assumed sorted and continuous.
    pub(crate) fn pruned(breakpoints: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>, anchor: f64) -> Self {
        debug_assert_eq!(slopes.len(), breakpoints.len() + 1);
        debug_assert_eq!(values.len(), breakpoints.len());
        let mut out_b = Vec::with_capacity(breakpoints.len());
        let mut out_v = Vec::with_capacity(breakpoints.len());
        let mut out_s = Vec::with_capacity(slopes.len());
        out_s.push(slopes[0]);
        for i in 0..breakpoints.len() {
            let left = *out_s.last().unwrap();
            let right = slopes[i + 1];
            if is_genuine_knot(left, right) {
                out_b.push(breakpoints[i]);
                out_v.push(values[i]);
                out_s.push(right);
            }
        }
        if out_b.is_empty() {
            // A line: express its value at 0.
            let intercept = match breakpoints.first() {
                Some(&b0) => values[0] - out_s[0] * b0,
                None => anchor,
            };
            return Self::line(out_s[0], intercept);
        }
        let anchor = out_v[0];
        PwlFunction {
            breakpoints: out_b,
            values: out_v,
            slopes: out_s,
            anchor,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Values at the breakpoints.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    /// Value at the first breakpoint, or at 0 for a line.
    pub fn anchor_value(&self) -> f64 {
        self.anchor
    }

    pub fn left_slope(&self) -> f64 {
        self.slopes[0]
    }

    pub fn right_slope(&self) -> f64 {
        *self.slopes.last().unwrap()
    }

    pub fn knot_count(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_line(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let b = &self.breakpoints;
        if b.is_empty() {
            return self.anchor + self.slopes[0] * x;
        }
        if x < b[0] {
            return self.values[0] + self.slopes[0] * (x - b[0]);
        }
        let i = b.partition_point(|&bp| bp <= x) - 1;
        self.values[i] + self.slopes[i + 1] * (x - b[i])
    }

    /// Pointwise `a * f`.
    pub fn scaled(&self, a: f64) -> Self {
        Self::pruned(
            self.breakpoints.clone(),
            self.values.iter().map(|v| a * v).collect(),
            self.slopes.iter().map(|s| a * s).collect(),
            a * self.anchor,
        )
    }

    /// `sum_i weights[i] * fs[i] + bias`.
    ///
    /// # Panics
    ///
    /// If `fs` is empty or the lengths differ.
    pub fn affine_combine(fs: &[PwlFunction], weights: &[f64], bias: f64) -> Self {
        assert!(!fs.is_empty(), "affine_combine needs at least one function");
        assert_eq!(fs.len(), weights.len(), "one weight per function");
        AffineBasis::new(fs).combine(weights, bias)
    }

    /// Pointwise `max(0, f)`.
    pub fn relu(&self) -> Self {
        if self.breakpoints.is_empty() {
            let (m, c) = (self.slopes[0], self.anchor);
            if m == 0.0 {
                return Self::constant(c.max(0.0));
            }
            let root = -c / m;
            let slopes = if m > 0.0 { vec![0.0, m] } else { vec![m, 0.0] };
            return Self::pruned(vec![root], vec![0.0], slopes, 0.0);
        }

        let b = &self.breakpoints;
        let v = &self.values;
        let s = &self.slopes;
        let nb = b.len();
        let mut pts: Vec<f64> = Vec::with_capacity(2 * nb + 2);
        let mut vals: Vec<f64> = Vec::with_capacity(2 * nb + 2);
        let mut segs: Vec<f64> = Vec::with_capacity(2 * nb + 3);

        // Left ray: going left from b[0] the value moves by -s[0] per unit.
        segs.push(s[0]);
        if s[0] != 0.0 && v[0] != 0.0 && sign(v[0]) == sign(s[0]) {
            let r = b[0] - v[0] / s[0];
            if r < b[0] && !same_abscissa(r, b[0]) {
                pts.push(r);
                vals.push(0.0);
                segs.push(s[0]);
            }
        }
        for i in 0..nb {
            pts.push(b[i]);
            vals.push(v[i]);
            if i + 1 < nb {
                let (va, vb) = (v[i], v[i + 1]);
                if sign(va) * sign(vb) < 0 {
                    let r = b[i] + (b[i + 1] - b[i]) * va / (va - vb);
                    if r > b[i] && r < b[i + 1] && !same_abscissa(r, b[i]) && !same_abscissa(r, b[i + 1]) {
                        segs.push(s[i + 1]);
                        pts.push(r);
                        vals.push(0.0);
                    }
                }
                segs.push(s[i + 1]);
            }
        }
        let last_v = v[nb - 1];
        let right = s[nb];
        segs.push(right);
        if right != 0.0 && last_v != 0.0 && sign(last_v) != sign(right) {
            let r = b[nb - 1] - last_v / right;
            if r > b[nb - 1] && !same_abscissa(r, b[nb - 1]) {
                pts.push(r);
                vals.push(0.0);
                segs.push(right);
            }
        }
        debug_assert_eq!(segs.len(), pts.len() + 1);

        let np = pts.len();
        let mut out_s = Vec::with_capacity(segs.len());
        for (p, &slope) in segs.iter().enumerate() {
            let positive = if p == 0 {
                vals[0] > 0.0 || (vals[0] == 0.0 && slope < 0.0)
            } else if p == np {
                vals[np - 1] > 0.0 || (vals[np - 1] == 0.0 && slope > 0.0)
            } else {
                vals[p - 1] + vals[p] > 0.0
            };
            out_s.push(if positive { slope } else { 0.0 });
        }
        let out_v: Vec<f64> = vals.iter().map(|x| x.max(0.0)).collect();
        let anchor = out_v[0];
        Self::pruned(pts, out_v, out_s, anchor)
    }

    /// Locations of the strict sign changes inside `domain`.
    ///
    /// A root lying on a breakpoint is reported once. A stretch where the
    /// function is identically zero between opposite signs is reported at its
    /// left end; touching zero without changing sign is not a root.
    pub fn sign_change_roots(&self, domain: Interval) -> Vec<f64> {
        // Samples: (x, value); infinite x carries the sign at that end.
        let mut samples: Vec<(f64, f64)> = Vec::with_capacity(self.breakpoints.len() + 2);
        let (lo, hi) = (domain.lo(), domain.hi());
        if lo == f64::NEG_INFINITY {
            let s0 = self.left_slope();
            let at_end = if s0 != 0.0 {
                -s0
            } else if self.breakpoints.is_empty() {
                self.anchor
            } else {
                self.values[0]
            };
            samples.push((lo, at_end));
        } else {
            samples.push((lo, self.eval(lo)));
        }
        for (&x, &v) in self.breakpoints.iter().zip(&self.values) {
            if domain.contains(x) {
                samples.push((x, v));
            }
        }
        if hi == f64::INFINITY {
            let sn = self.right_slope();
            let at_end = if sn != 0.0 {
                sn
            } else if self.breakpoints.is_empty() {
                self.anchor
            } else {
                *self.values.last().unwrap()
            };
            samples.push((hi, at_end));
        } else {
            samples.push((hi, self.eval(hi)));
        }

        let mut roots = Vec::new();
        let mut last: Option<usize> = None;
        for i in 0..samples.len() {
            let si = sign(samples[i].1);
            if si == 0 {
                continue;
            }
            if let Some(j) = last {
                if sign(samples[j].1) != si {
                    roots.push(if j + 1 < i {
                        // Zero samples in between: the crossing is the first of them.
                        samples[j + 1].0
                    } else {
                        self.root_between(samples[j], samples[i])
                    });
                }
            }
            last = Some(i);
        }
        roots
    }

    fn root_between(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        match (a.0.is_infinite(), b.0.is_infinite()) {
            (true, true) => -self.anchor / self.slopes[0],
            (true, false) => b.0 - b.1 / self.left_slope(),
            (false, true) => a.0 - a.1 / self.right_slope(),
            (false, false) => a.0 + (b.0 - a.0) * a.1 / (a.1 - b.1),
        }
    }

    /// Number of strict sign changes inside `domain`.
    pub fn count_sign_change_roots(&self, domain: Interval) -> usize {
        self.sign_change_roots(domain).len()
    }
}

/// A set of functions resampled on the union of their breakpoints, so that
/// many affine combinations of the same inputs can be formed cheaply.
#[derive(Debug, Clone)]
pub struct AffineBasis {
    points: Vec<f64>,
    inputs: usize,
    // Row-major [input][point].
    values: Vec<f64>,
    // Row-major [input][segment], points.len() + 1 segments.
    slopes: Vec<f64>,
    // Value at 0 for each input when there are no breakpoints at all.
    intercepts: Vec<f64>,
}

impl AffineBasis {
    pub fn new(fs: &[PwlFunction]) -> Self {
        let mut points: Vec<f64> = fs.iter().flat_map(|f| f.breakpoints.iter().copied()).collect();
        points.sort_unstable_by(f64::total_cmp);
        points.dedup_by(|a, b| same_abscissa(*a, *b));

        let np = points.len();
        let mut values = vec![0.0; fs.len() * np];
        let mut slopes = vec![0.0; fs.len() * (np + 1)];
        let mut intercepts = vec![0.0; fs.len()];
        for (r, f) in fs.iter().enumerate() {
            let vrow = &mut values[r * np..(r + 1) * np];
            let srow = &mut slopes[r * (np + 1)..(r + 1) * (np + 1)];
            intercepts[r] = f.eval(0.0);
            srow[0] = f.slopes[0];
            let nb = f.breakpoints.len();
            let mut i = 0;
            for (p, &u) in points.iter().enumerate() {
                if i < nb && same_abscissa(f.breakpoints[i], u) {
                    vrow[p] = f.values[i];
                    i += 1;
                } else if i == 0 {
                    vrow[p] = f.eval(u);
                } else {
                    vrow[p] = f.values[i - 1] + f.slopes[i] * (u - f.breakpoints[i - 1]);
                }
                srow[p + 1] = f.slopes[i];
            }
            debug_assert_eq!(i, nb);
        }
        AffineBasis {
            points,
            inputs: fs.len(),
            values,
            slopes,
            intercepts,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    /// `sum_i weights[i] * f_i + bias`.
    pub fn combine(&self, weights: &[f64], bias: f64) -> PwlFunction {
        assert_eq!(weights.len(), self.inputs, "one weight per basis function");
        let np = self.points.len();
        let mut slopes = vec![0.0; np + 1];
        for (r, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (acc, &s) in slopes.iter_mut().zip(&self.slopes[r * (np + 1)..(r + 1) * (np + 1)]) {
                *acc += w * s;
            }
        }
        if np == 0 {
            let c = bias
                + weights
                    .iter()
                    .zip(&self.intercepts)
                    .map(|(w, c)| w * c)
                    .sum::<f64>();
            return PwlFunction::line(slopes[0], c);
        }
        let mut values = vec![bias; np];
        for (r, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (acc, &v) in values.iter_mut().zip(&self.values[r * np..(r + 1) * np]) {
                *acc += w * v;
            }
        }
        let anchor = values[0];
        PwlFunction::pruned(self.points.clone(), values, slopes, anchor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_unit_eval() {
        let f = PwlFunction::relu_unit();
        assert_eq!(f.eval(2.0), 2.0);
        assert_eq!(f.eval(-3.0), 0.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.knot_count(), 1);
    }

    #[test]
    fn line_has_no_knots() {
        assert_eq!(PwlFunction::line(2.0, 1.0).knot_count(), 0);
        assert_eq!(PwlFunction::line(2.0, 1.0).eval(3.0), 7.0);
    }

    #[test]
    fn identity_combination_is_unchanged() {
        let f = PwlFunction::relu_unit();
        let g = PwlFunction::affine_combine(&[f.clone()], &[1.0], 0.0);
        assert_eq!(g, f);
    }

    #[test]
    fn relu_difference_collapses_to_line() {
        let pos = PwlFunction::relu_unit();
        let neg = PwlFunction::line(-1.0, 0.0).relu();
        let g = PwlFunction::affine_combine(&[pos, neg], &[1.0, -1.0], 0.0);
        assert_eq!(g.knot_count(), 0);
        assert_eq!(g.slopes(), &[1.0]);
        assert_eq!(g.eval(5.0), 5.0);
        assert_eq!(g.eval(-2.5), -2.5);
    }

    #[test]
    fn relu_of_line_creates_knot_at_root() {
        let f = PwlFunction::identity().relu();
        assert_eq!(f, PwlFunction::relu_unit());
        let g = PwlFunction::line(-2.0, 4.0).relu();
        assert_eq!(g.breakpoints(), &[2.0]);
        assert_eq!(g.slopes(), &[-2.0, 0.0]);
        assert_eq!(g.eval(0.0), 4.0);
    }

    #[test]
    fn relu_keeps_nonnegative_wedge() {
        let wedge = PwlFunction::from_values(vec![0.0], vec![0.0], vec![-1.0, 1.0]).unwrap();
        assert_eq!(wedge.relu(), wedge);
    }

    #[test]
    fn relu_of_negative_constant_is_zero() {
        assert_eq!(PwlFunction::constant(-1.0).relu(), PwlFunction::constant(0.0));
        let dip = PwlFunction::from_values(vec![0.0], vec![-1.0], vec![-1.0, 1.0]).unwrap();
        let r = dip.relu();
        assert_eq!(r.breakpoints(), &[-1.0, 1.0]);
        assert_eq!(r.eval(0.0), 0.0);
        assert_eq!(r.eval(-3.0), 2.0);
        assert_eq!(r.eval(4.0), 3.0);
    }

    #[test]
    fn relu_drops_knots_below_zero() {
        // Negative everywhere with a kink: relu is identically zero.
        let f = PwlFunction::from_values(vec![0.0], vec![-1.0], vec![1.0, -1.0]).unwrap();
        let r = f.relu();
        assert_eq!(r.knot_count(), 0);
        assert_eq!(r.eval(10.0), 0.0);
    }

    #[test]
    fn root_counts_follow_tangency_convention() {
        assert_eq!(PwlFunction::identity().count_sign_change_roots(Interval::real()), 1);
        assert_eq!(PwlFunction::relu_unit().count_sign_change_roots(Interval::real()), 0);
        assert_eq!(PwlFunction::constant(0.0).count_sign_change_roots(Interval::real()), 0);
        assert_eq!(PwlFunction::constant(3.0).count_sign_change_roots(Interval::real()), 0);
        // Flat zero stretch between opposite signs counts once.
        let step = PwlFunction::from_values(vec![-1.0, 1.0], vec![0.0, 0.0], vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(step.sign_change_roots(Interval::real()), vec![-1.0]);
        // Flat zero stretch between equal signs is a tangency.
        let cup = PwlFunction::from_values(vec![-1.0, 1.0], vec![0.0, 0.0], vec![-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(cup.count_sign_change_roots(Interval::real()), 0);
    }

    #[test]
    fn roots_on_bounded_domain() {
        let f = PwlFunction::identity();
        assert_eq!(f.count_sign_change_roots(Interval::new(1.0, 2.0).unwrap()), 0);
        assert_eq!(f.sign_change_roots(Interval::new(-1.0, 2.0).unwrap()), vec![0.0]);
        // Root exactly at the open end is excluded.
        assert_eq!(f.count_sign_change_roots(Interval::new(0.0, 2.0).unwrap()), 0);
    }

    #[test]
    fn root_on_breakpoint_counts_once() {
        let f = PwlFunction::from_values(vec![0.0], vec![0.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(f.sign_change_roots(Interval::real()), vec![0.0]);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(PwlFunction::from_values(vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0; 3]).is_err());
        assert!(PwlFunction::from_values(vec![0.0, 1.0], vec![0.0, 5.0], vec![0.0, 1.0, 0.0]).is_err());
        assert!(PwlFunction::from_anchor_slopes(vec![0.0], 0.0, vec![1.0]).is_err());
    }

    #[test]
    fn anchor_slopes_round_trip() {
        let f = PwlFunction::from_anchor_slopes(vec![-1.0, 0.5, 2.0], 1.0, vec![0.5, -1.0, 2.0, 0.0]).unwrap();
        assert_eq!(f.values(), &[1.0, -0.5, 2.5]);
        assert_eq!(f.eval(-3.0), 0.0);
        assert_eq!(f.eval(10.0), 2.5);
    }

    #[test]
    fn tiny_slope_changes_are_pruned() {
        let f = PwlFunction::from_values(vec![0.0], vec![0.0], vec![1.0, 1.0 + 1e-12]).unwrap();
        assert_eq!(f.knot_count(), 0);
        assert!((f.eval(3.0) - 3.0).abs() < 1e-11);
    }

    #[test]
    fn scaled_by_zero_is_constant_zero() {
        let f = PwlFunction::relu_unit().scaled(0.0);
        assert!(f.is_line());
        assert_eq!(f.eval(4.0), 0.0);
    }
}
