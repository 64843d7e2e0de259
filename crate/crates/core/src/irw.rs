//! Random walks, integrated random walks and their zero crossings.
//!
//! A walk of slopes `y'_k = y'_0 + s_1 + ... + s_k` integrates to the path
//! `y_{k+1} = y_k + (x_{k+1} - x_k) y'_k`. With `y'_0 = c1` and
//! `y_1 = c1 x_1 + c0` the path passes through the knot values of the
//! canonical form `sum_j s_j relu(x - x_j) + c1 x + c0`.

use rand::Rng;

use crate::canonical::{CanonicalForm, RootDomain};
use crate::error::{Error, Result};
use crate::experiments::fold_trials;
use crate::netgen::{sample_network, DistributionSpec, NetConfig};
use crate::pwl::{count_sign_changes, sign, PwlFunction};
use crate::rng::{substream_rng, trial_rng};
use crate::stats::{CompensatedSum, Estimator};

/// Initial slope and i.i.d. increments `s_1, ..., s_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    pub y0_prime: f64,
    pub steps: Vec<f64>,
}

impl RandomWalk {
    /// `y'_0, y'_1, ..., y'_n`.
    pub fn slopes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut y = self.y0_prime;
        out.push(y);
        for s in &self.steps {
            y += s;
            out.push(y);
        }
        out
    }

    /// Number of `k >= 1` with `y'_k = 0` exactly.
    pub fn zero_count(&self) -> usize {
        self.slopes().iter().skip(1).filter(|&&y| y == 0.0).count()
    }
}

pub fn random_walk<R: Rng + ?Sized>(n: usize, step: DistributionSpec, y0_prime: f64, rng: &mut R) -> RandomWalk {
    RandomWalk {
        y0_prime,
        steps: (0..n).map(|_| step.sample(rng)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Abscissae<'a> {
    /// `x_k = x1 + (k - 1) dx`.
    Fixed { x1: f64, dx: f64 },
    Points(&'a [f64]),
}

/// Samples `(x_k, y_k)` of an integrated walk and the slope after each.
#[derive(Debug, Clone, PartialEq)]
pub struct IrwPath {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `slopes[k - 1] = y'_k`, the slope right of `x_k`.
    pub slopes: Vec<f64>,
    /// Slope left of `x_1`.
    pub y0_prime: f64,
}

impl IrwPath {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// `y'_k` for `k = 0..=n`.
    pub fn slope_before(&self, k: usize) -> f64 {
        if k <= 1 {
            self.y0_prime
        } else {
            self.slopes[k - 2]
        }
    }

    /// The spline through the path with the two end rays.
    pub fn to_pwl(&self) -> Result<PwlFunction> {
        if self.is_empty() {
            return Err(Error::InvalidPwl("empty path".into()));
        }
        let mut slopes = Vec::with_capacity(self.len() + 1);
        slopes.push(self.y0_prime);
        slopes.extend_from_slice(&self.slopes);
        PwlFunction::from_anchor_slopes(self.xs.clone(), self.ys[0], slopes)
    }
}

/// Integrates `walk` at the given abscissae. The walk must have one step per
/// abscissa.
pub fn integrate(walk: &RandomWalk, xs: Abscissae<'_>, y1: f64) -> Result<IrwPath> {
    integrate_from(walk, xs, CompensatedSum::new(y1))
}

fn integrate_from(walk: &RandomWalk, xs: Abscissae<'_>, mut y: CompensatedSum) -> Result<IrwPath> {
    let n = walk.steps.len();
    let xs: Vec<f64> = match xs {
        Abscissae::Fixed { x1, dx } => {
            if !(dx > 0.0) {
                return Err(Error::config("dx", "step size must be positive"));
            }
            (0..n).map(|k| x1 + k as f64 * dx).collect()
        }
        Abscissae::Points(p) => {
            if p.len() != n {
                return Err(Error::config("xs", format!("{} abscissae for {} steps", p.len(), n)));
            }
            if p.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::config("xs", "abscissae must increase strictly"));
            }
            p.to_vec()
        }
    };
    let mut ys = Vec::with_capacity(n);
    let mut slopes = Vec::with_capacity(n);
    let mut yp = CompensatedSum::new(walk.y0_prime);
    for k in 0..n {
        if k > 0 {
            y.add_scaled_diff(yp.sum, xs[k], xs[k - 1]);
            y.add_scaled_diff(yp.comp, xs[k], xs[k - 1]);
        }
        yp.add(walk.steps[k]);
        ys.push(y.value());
        slopes.push(yp.value());
    }
    Ok(IrwPath {
        xs,
        ys,
        slopes,
        y0_prime: walk.y0_prime,
    })
}

/// The path through the knots of `cf` with `y'_0 = c1`, `y_1 = c1 x_1 + c0`.
pub fn path_from_network(cf: &CanonicalForm) -> Result<IrwPath> {
    if cf.is_empty() {
        return Err(Error::config("neurons", "canonical form has no knots"));
    }
    let xs: Vec<f64> = cf.knots().iter().map(|k| k.x).collect();
    let walk = RandomWalk {
        y0_prime: cf.c1(),
        steps: cf.knots().iter().map(|k| k.s).collect(),
    };
    let mut y1 = CompensatedSum::new(0.0);
    y1.add_product(cf.c1(), xs[0]);
    y1.add(cf.c0());
    integrate_from(&walk, Abscissae::Points(&xs), y1)
}

/// Strict sign changes of the interpolated path; with `include_ends` the two
/// rays are followed to infinity using `y'_0` and `y'_n`.
pub fn crossing_count(path: &IrwPath, include_ends: bool) -> usize {
    let interior = path.ys.iter().map(|&y| sign(y));
    if !include_ends || path.is_empty() {
        return count_sign_changes(interior);
    }
    let minus_inf = if path.y0_prime != 0.0 {
        -sign(path.y0_prime)
    } else {
        sign(path.ys[0])
    };
    let last = *path.slopes.last().unwrap();
    let plus_inf = if last != 0.0 { sign(last) } else { sign(*path.ys.last().unwrap()) };
    count_sign_changes(std::iter::once(minus_inf).chain(interior).chain(std::iter::once(plus_inf)))
}

/// The first sign change of a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstCrossing {
    /// 1-based index of the first sample on the far side of zero (or of the
    /// first zero sample in a run that separates opposite signs).
    pub index: u64,
    pub abs_y: f64,
    pub abs_y_prime: f64,
}

/// Streaming sign-change counter over path samples.
#[derive(Debug, Clone, Default)]
pub struct CrossingTracker {
    seen: u64,
    last_sign: i8,
    prev_abs_y: f64,
    // First zero after the last nonzero sample: (index, |y_{k-1}|, |y'_{k-1}|).
    pending_zero: Option<(u64, f64, f64)>,
    crossings: u64,
    first: Option<FirstCrossing>,
}

impl CrossingTracker {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds sample `y_k` together with the slope `y'_{k-1}` of the segment
    /// leading into it.
    #[inline]
    pub fn observe(&mut self, y: f64, slope_before: f64) {
        self.seen += 1;
        let s = sign(y);
        if s == 0 {
            if self.last_sign != 0 && self.pending_zero.is_none() {
                self.pending_zero = Some((self.seen, self.prev_abs_y, slope_before.abs()));
            }
        } else {
            if self.last_sign != 0 && s != self.last_sign {
                self.crossings += 1;
                if self.first.is_none() {
                    let (index, abs_y, abs_y_prime) =
                        self.pending_zero
                            .unwrap_or((self.seen, self.prev_abs_y, slope_before.abs()));
                    self.first = Some(FirstCrossing {
                        index,
                        abs_y,
                        abs_y_prime,
                    });
                }
            }
            self.last_sign = s;
            self.pending_zero = None;
        }
        self.prev_abs_y = y.abs();
    }

    pub fn crossings(&self) -> u64 {
        self.crossings
    }

    pub fn first(&self) -> Option<FirstCrossing> {
        self.first
    }

    pub fn samples(&self) -> u64 {
        self.seen
    }
}

pub fn first_crossing(path: &IrwPath) -> Option<FirstCrossing> {
    let mut t = CrossingTracker::new();
    for (k, &y) in path.ys.iter().enumerate() {
        t.observe(y, path.slope_before(k + 1));
    }
    t.first()
}

/// Which homogeneous integrated walk to simulate.
#[derive(Debug, Clone, PartialEq)]
pub enum WalkModel {
    /// Fixed abscissa spacing `dx` with i.i.d. increments.
    FixedStep { step: DistributionSpec, dx: f64 },
    /// Knots and increments of a random single-layer network whose line
    /// `c1 x + c0` is removed.
    NetworkKnots { cfg: NetConfig },
}

impl WalkModel {
    pub fn fixed_normal() -> Self {
        WalkModel::FixedStep {
            step: DistributionSpec::NORMAL,
            dx: 1.0,
        }
    }

    /// Knot model of `w1, b1 ~ N(0,1)`, `w2 ~ {-1,1}`; widths are set per run.
    pub fn cauchy_knots() -> Self {
        WalkModel::NetworkKnots {
            cfg: NetConfig::shallow(
                1,
                DistributionSpec::NORMAL,
                DistributionSpec::NORMAL,
                DistributionSpec::RADEMACHER,
                DistributionSpec::ZERO,
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WalkModel::FixedStep { dx, .. } if !(*dx > 0.0) => Err(Error::config("dx", "must be positive")),
            WalkModel::NetworkKnots { cfg } if cfg.depth() != 1 => {
                Err(Error::config("widths", "knot model needs one hidden layer"))
            }
            _ => Ok(()),
        }
    }
}

/// Outcome of one homogeneous walk of `steps` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutcome {
    pub first: Option<FirstCrossing>,
    /// Crossing count among the first `checkpoints[i]` samples.
    pub crossings: Vec<u64>,
}

/// Runs one homogeneous fixed-step walk (`y'_0 = y_1 = 0`), recording the
/// crossing count at each sorted checkpoint.
pub fn scan_fixed_step<R: Rng + ?Sized>(
    step: DistributionSpec,
    dx: f64,
    checkpoints: &[usize],
    rng: &mut R,
) -> WalkOutcome {
    let steps = checkpoints.last().copied().unwrap_or(0);
    let mut t = CrossingTracker::new();
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let mut y = 0.0;
    let mut yp = 0.0;
    for k in 1..=steps {
        if k > 1 {
            yp += step.sample(rng);
            y += dx * yp;
        }
        t.observe(y, yp);
        while next < checkpoints.len() && checkpoints[next] == k {
            out.push(t.crossings());
            next += 1;
        }
    }
    WalkOutcome {
        first: t.first(),
        crossings: out,
    }
}

/// Runs the homogeneous walk through the knots of `cf`, ignoring its line.
pub fn scan_knots(cf: &CanonicalForm) -> (Option<FirstCrossing>, u64) {
    let mut t = CrossingTracker::new();
    let knots = cf.knots();
    let mut y = 0.0;
    let mut yp = 0.0;
    for (k, knot) in knots.iter().enumerate() {
        if k > 0 {
            y += (knot.x - knots[k - 1].x) * yp;
        }
        t.observe(y, yp);
        yp += knot.s;
    }
    (t.first(), t.crossings())
}

fn knot_walk(cfg: &NetConfig, n: usize, seed: u64, trial: u64) -> Result<CanonicalForm> {
    let mut cfg = cfg.clone();
    cfg.widths = vec![n];
    CanonicalForm::from_network(&sample_network(&cfg, seed, trial)?)
}

/// Aggregated zero-crossing statistics of homogeneous walks.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingStats {
    pub steps: usize,
    pub trials: u64,
    /// `survival[k] = P(K >= k)` for the first-crossing index `K`, `k = 0..=steps`.
    pub survival: Vec<f64>,
    /// Sorted `|y|` at the sample before each observed first crossing.
    pub pre_abs_y: Vec<f64>,
    /// Sorted `|y'|` on the segment into each observed first crossing.
    pub pre_abs_y_prime: Vec<f64>,
    /// `pmf_roots[r]` is the fraction of walks with `r` crossings.
    pub pmf_roots: Vec<f64>,
    pub mean_crossings: Estimator,
}

impl CrossingStats {
    /// Empirical CDF of a sorted sample at `x`.
    pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
        sorted.partition_point(|&v| v <= x) as f64 / sorted.len().max(1) as f64
    }

    /// Median crossing count.
    pub fn median_crossings(&self) -> usize {
        let mut acc = 0.0;
        for (r, p) in self.pmf_roots.iter().enumerate() {
            acc += p;
            if acc >= 0.5 {
                return r;
            }
        }
        self.pmf_roots.len().saturating_sub(1)
    }
}

pub fn crossing_statistics(model: &WalkModel, steps: usize, trials: u64, seed: u64) -> Result<CrossingStats> {
    model.validate()?;
    if steps < 2 {
        return Err(Error::config("steps", "at least two steps are required"));
    }
    if trials == 0 {
        return Err(Error::config("trials", "must be at least 1"));
    }
    let outcomes: Vec<(Option<FirstCrossing>, u64)> = crate::experiments::map_trials(trials, |t| {
        Ok(match model {
            WalkModel::FixedStep { step, dx } => {
                let mut rng = trial_rng(seed, t);
                let o = scan_fixed_step(*step, *dx, &[steps], &mut rng);
                (o.first, o.crossings[0])
            }
            WalkModel::NetworkKnots { cfg } => scan_knots(&knot_walk(cfg, steps, seed, t)?),
        })
    })?;

    let mut first_hist = vec![0u64; steps + 2];
    let mut pre_y = Vec::new();
    let mut pre_yp = Vec::new();
    let mut pmf_counts: Vec<u64> = Vec::new();
    let mut mean = Estimator::new();
    for (first, c) in &outcomes {
        match first {
            Some(f) => {
                first_hist[f.index as usize] += 1;
                pre_y.push(f.abs_y);
                pre_yp.push(f.abs_y_prime);
            }
            None => first_hist[steps + 1] += 1,
        }
        let c = *c as usize;
        if pmf_counts.len() <= c {
            pmf_counts.resize(c + 1, 0);
        }
        pmf_counts[c] += 1;
        mean.push(c as f64);
    }
    let total = trials as f64;
    let mut survival = vec![0.0; steps + 1];
    let mut at_least = trials;
    for (k, s) in survival.iter_mut().enumerate() {
        *s = at_least as f64 / total;
        at_least -= first_hist[k];
    }
    pre_y.sort_unstable_by(f64::total_cmp);
    pre_yp.sort_unstable_by(f64::total_cmp);
    Ok(CrossingStats {
        steps,
        trials,
        survival,
        pre_abs_y: pre_y,
        pre_abs_y_prime: pre_yp,
        pmf_roots: pmf_counts.iter().map(|&c| c as f64 / total).collect(),
        mean_crossings: mean,
    })
}

/// Mean crossing counts of homogeneous walks for each `n` in `grid`.
///
/// The fixed-step model reads every `n` off one walk of `max(grid)` samples
/// per trial; the knot model draws an independent network per `n`.
pub fn mean_crossings_by_n(model: &WalkModel, grid: &[usize], trials: u64, seed: u64) -> Result<Vec<Estimator>> {
    model.validate()?;
    let mut grid_sorted = grid.to_vec();
    grid_sorted.sort_unstable();
    grid_sorted.dedup();
    if grid_sorted.is_empty() || grid_sorted[0] == 0 || grid_sorted.len() != grid.len() {
        return Err(Error::config("grid", "needs distinct positive sizes"));
    }
    let by_sorted = match model {
        WalkModel::FixedStep { step, dx } => fold_trials(
            trials,
            || vec![Estimator::new(); grid_sorted.len()],
            |acc, t| {
                let o = scan_fixed_step(*step, *dx, &grid_sorted, &mut trial_rng(seed, t));
                acc.iter_mut().zip(&o.crossings).for_each(|(e, &c)| e.push(c as f64));
                Ok(())
            },
            merge_vec,
        )?,
        WalkModel::NetworkKnots { cfg } => {
            let mut out = Vec::with_capacity(grid_sorted.len());
            for &n in &grid_sorted {
                let sub = crate::rng::derive_seed(seed, n as u64);
                out.push(fold_trials(
                    trials,
                    Estimator::new,
                    |e, t| {
                        e.push(scan_knots(&knot_walk(cfg, n, sub, t)?).1 as f64);
                        Ok(())
                    },
                    |a, b| a.merge(b),
                )?);
            }
            out
        }
    };
    Ok(grid
        .iter()
        .map(|n| by_sorted[grid_sorted.binary_search(n).unwrap()])
        .collect())
}

pub(crate) fn merge_vec(a: &mut Vec<Estimator>, b: &Vec<Estimator>) {
    a.iter_mut().zip(b).for_each(|(x, y)| x.merge(y));
}

/// Exact `Var(y_k)` of the homogeneous fixed-step walk with unit-variance
/// increments: `dx^2 (1^2 + ... + (k-1)^2)`.
pub fn fixed_step_variance_exact(k: u64, dx: f64) -> f64 {
    let m = k.saturating_sub(1) as f64;
    dx * dx * m * (m + 1.0) * (2.0 * m + 1.0) / 6.0
}

/// Empirical `y_k` estimators, `k = 1..=steps`, of the homogeneous
/// fixed-step walk.
pub fn fixed_step_variance(step: DistributionSpec, dx: f64, steps: usize, trials: u64, seed: u64) -> Result<Vec<Estimator>> {
    fold_trials(
        trials,
        || vec![Estimator::new(); steps],
        |acc, t| {
            let mut rng = trial_rng(seed, t);
            let mut y = 0.0;
            let mut yp = 0.0;
            for (k, e) in acc.iter_mut().enumerate() {
                if k > 0 {
                    yp += step.sample(&mut rng);
                    y += dx * yp;
                }
                e.push(y);
            }
            Ok(())
        },
        merge_vec,
    )
}

/// Cauchy quantile boundaries `tan((j/cells - 1/2) pi)`, `j = 0..=cells`.
pub fn cauchy_cell_edges(cells: usize) -> Vec<f64> {
    (0..=cells)
        .map(|j| match j {
            0 => f64::NEG_INFINITY,
            j if j == cells => f64::INFINITY,
            j => ((j as f64 / cells as f64 - 0.5) * std::f64::consts::PI).tan(),
        })
        .collect()
}

/// Index of the Cauchy quantile cell holding `x`.
#[inline]
pub fn cauchy_cell(x: f64, cells: usize) -> usize {
    let u = x.atan() / std::f64::consts::PI + 0.5;
    ((u * cells as f64) as usize).min(cells - 1)
}

/// Variance of the homogeneous walk values within one quantile cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellVariance {
    pub lo: f64,
    pub hi: f64,
    /// Cauchy median of the cell, `tan(((j + 1/2)/cells - 1/2) pi)`.
    pub x: f64,
    pub values: Estimator,
}

/// Pools the homogeneous walk value at every knot into `n` Cauchy quantile
/// cells and estimates the variance per cell.
pub fn variance_by_quantile(cfg: &NetConfig, trials: u64, seed: u64) -> Result<Vec<CellVariance>> {
    cfg.validate()?;
    if cfg.depth() != 1 {
        return Err(Error::config("widths", "expected a single hidden layer"));
    }
    let cells = cfg.widths[0];
    let acc = fold_trials(
        trials,
        || vec![Estimator::new(); cells],
        |acc, t| {
            let cf = CanonicalForm::from_network(&sample_network(cfg, seed, t)?)?.homogeneous();
            for (knot, y) in cf.knots().iter().zip(cf.knot_values()) {
                acc[cauchy_cell(knot.x, cells)].push(y);
            }
            Ok(())
        },
        merge_vec,
    )?;
    let edges = cauchy_cell_edges(cells);
    Ok(acc
        .into_iter()
        .enumerate()
        .map(|(j, values)| CellVariance {
            lo: edges[j],
            hi: edges[j + 1],
            x: (((j as f64 + 0.5) / cells as f64 - 0.5) * std::f64::consts::PI).tan(),
            values,
        })
        .collect())
}

/// `corr(y(x_a), y(x_b))` on the `n` points dividing the `n + 1` Cauchy
/// quantiles, using raw second moments (the mean is zero by symmetry).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSurface {
    pub points: Vec<f64>,
    /// Row-major `points.len()^2` matrix.
    pub corr: Vec<f64>,
    pub trials: u64,
}

impl CorrelationSurface {
    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.corr[a * self.points.len() + b]
    }

    /// Index of the grid point nearest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, p) in self.points.iter().enumerate() {
            if (p - x).abs() < (self.points[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

pub fn shifted_correlation(cfg: &NetConfig, points: usize, trials: u64, seed: u64) -> Result<CorrelationSurface> {
    cfg.validate()?;
    if cfg.depth() != 1 {
        return Err(Error::config("widths", "expected a single hidden layer"));
    }
    if points == 0 {
        return Err(Error::config("points", "must be at least 1"));
    }
    let grid: Vec<f64> = (1..=points)
        .map(|i| ((i as f64 / (points + 1) as f64 - 0.5) * std::f64::consts::PI).tan())
        .collect();
    let sums = fold_trials(
        trials,
        || vec![0.0; points * points],
        |acc, t| {
            let f = CanonicalForm::from_network(&sample_network(cfg, seed, t)?)?.to_pwl()?;
            let y: Vec<f64> = grid.iter().map(|&x| f.eval(x)).collect();
            for a in 0..points {
                let ya = y[a];
                let row = &mut acc[a * points..(a + 1) * points];
                for (r, yb) in row.iter_mut().zip(&y) {
                    *r += ya * yb;
                }
            }
            Ok(())
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    )?;
    let diag: Vec<f64> = (0..points).map(|a| sums[a * points + a]).collect();
    let corr = (0..points * points)
        .map(|i| {
            let (a, b) = (i / points, i % points);
            let d = (diag[a] * diag[b]).sqrt();
            if d > 0.0 {
                sums[i] / d
            } else {
                0.0
            }
        })
        .collect();
    Ok(CorrelationSurface {
        points: grid,
        corr,
        trials,
    })
}

/// Zero count of a plain walk with the given increments, averaged over trials.
pub fn walk_zero_statistics(step: DistributionSpec, n: usize, trials: u64, seed: u64) -> Result<Estimator> {
    fold_trials(
        trials,
        Estimator::new,
        |e, t| {
            let mut rng = substream_rng(seed, t, 0);
            e.push(random_walk(n, step, 0.0, &mut rng).zero_count() as f64);
            Ok(())
        },
        |a, b| a.merge(b),
    )
}

/// Roots of a canonical form over the reals, the quantity tracked by the
/// line-scaling experiments.
pub fn roots_with_line(cf: &CanonicalForm, c1_factor: f64, c0_factor: f64) -> usize {
    cf.with_line_scaled(c1_factor, c0_factor).root_count(RootDomain::AllReals)
}
