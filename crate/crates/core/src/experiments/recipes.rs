//! Experiment recipes: typed runners plus their CSV tables.

use rand::Rng;
use rand_distr::Cauchy;
use serde::Serialize;
use serde_json::json;
use statrs::distribution::{ContinuousCDF, Normal};

use super::fit::{fit_line, Axes, FitResult};
use super::table::{Cell, Table};
use super::{fold_trials, map_trials};
use crate::canonical::{CanonicalForm, RootDomain};
use crate::error::{Error, Result};
use crate::gradients::gradient_distribution;
use crate::irw::{
    crossing_statistics, mean_crossings_by_n, path_from_network, shifted_correlation, variance_by_quantile,
    CrossingStats, WalkModel,
};
use crate::netgen::{network_knot_count, sample_network, DistributionSpec, NetConfig};
use crate::pwl::{Interval, PwlFunction};
use crate::rng::{derive_seed, trial_rng};
use crate::stats::{Estimator, Moments};

fn need_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        Err(Error::config("trials", "must be at least 1"))
    } else {
        Ok(())
    }
}

fn need_window(field: &'static str, w: (f64, f64)) -> Result<()> {
    if w.0 < w.1 {
        Ok(())
    } else {
        Err(Error::config(field, format!("window needs lo < hi, got [{}, {}]", w.0, w.1)))
    }
}

/// The four distributions of a single-layer net, as `w1, b1, w2, b2`.
pub type ShallowDists = [DistributionSpec; 4];

pub fn shallow_cfg(n: usize, d: ShallowDists) -> NetConfig {
    NetConfig::shallow(n, d[0], d[1], d[2], d[3])
}

/// `w1, b1 ~ N(0,1)`, `w2 ~ {-1,1}`, `b2 = 0`.
pub const NNR0: ShallowDists = [
    DistributionSpec::NORMAL,
    DistributionSpec::NORMAL,
    DistributionSpec::RADEMACHER,
    DistributionSpec::ZERO,
];

/// `w1 ~ {-1,1}`, `b1 ~ U(-1,1)`, `w2 ~ {-1,1}`, `b2 = 0`.
pub const RUR0: ShallowDists = [
    DistributionSpec::RADEMACHER,
    DistributionSpec::UNIFORM,
    DistributionSpec::RADEMACHER,
    DistributionSpec::ZERO,
];

/// A distribution combination with reference mean root counts on the reals
/// and on the knot span.
#[derive(Debug, Clone, Copy)]
pub struct RootsRow {
    pub dists: ShallowDists,
    pub reference_reals: f64,
    pub reference_span: f64,
}

const fn row(w1: DistributionSpec, b1: DistributionSpec, w2: DistributionSpec, b2: DistributionSpec, r: f64, s: f64) -> RootsRow {
    RootsRow {
        dists: [w1, b1, w2, b2],
        reference_reals: r,
        reference_span: s,
    }
}

const N: DistributionSpec = DistributionSpec::NORMAL;
const U: DistributionSpec = DistributionSpec::UNIFORM;
const R: DistributionSpec = DistributionSpec::RADEMACHER;
const Z: DistributionSpec = DistributionSpec::ZERO;

/// The eighteen distribution combinations of the roots table.
pub const ROOTS_ROWS: [RootsRow; 18] = [
    row(N, N, N, N, 0.9967, 0.9918),
    row(N, N, N, Z, 0.9954, 1.0073),
    row(U, U, U, U, 1.0064, 0.9886),
    row(U, U, U, Z, 0.9940, 0.9967),
    row(N, N, R, Z, 0.9992, 1.0015),
    row(N, N, R, N, 1.0064, 1.0038),
    row(U, U, R, Z, 1.0081, 1.0114),
    row(U, U, R, U, 0.9904, 0.9976),
    row(N, U, R, Z, 1.0040, 1.0133),
    row(U, N, R, Z, 0.9975, 1.0021),
    row(R, N, N, Z, 1.0018, 0.8341),
    row(R, U, U, Z, 1.0022, 0.6634),
    row(N, R, N, Z, 0.9975, 1.0002),
    row(U, R, U, Z, 1.0086, 1.0027),
    row(N, R, R, Z, 1.0044, 0.9960),
    row(U, R, R, Z, 1.0022, 1.0070),
    row(R, N, R, Z, 1.0039, 0.8464),
    row(R, U, R, Z, 0.9929, 0.6678),
];

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

// ---------------------------------------------------------------- knots

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnotsSpec {
    pub layers: Vec<usize>,
    pub widths: Vec<usize>,
    pub trials: u64,
    pub dist: DistributionSpec,
}

impl Default for KnotsSpec {
    fn default() -> Self {
        KnotsSpec {
            layers: vec![1, 2, 3, 4],
            widths: vec![10, 20, 40, 80],
            trials: 200,
            dist: DistributionSpec::UNIFORM,
        }
    }
}

impl KnotsSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.layers.is_empty() || self.layers.contains(&0) {
            return Err(Error::config("layers", "needs at least one positive depth"));
        }
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::config("widths", "needs at least one positive width"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnotCell {
    pub layers: usize,
    pub width: usize,
    /// Knot count per trial.
    pub knots: Vec<usize>,
    /// `(m - n l) / (n l)` over trials.
    pub normalized_error: Estimator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnotStudy {
    pub cells: Vec<KnotCell>,
    pub grand: Estimator,
}

/// Knot counts of deep networks with `l` layers of `n` neurons each. Cell
/// `g` of the `(layers, widths)` grid uses master seed `derive_seed(seed, g)`.
pub fn knot_study(spec: &KnotsSpec, seed: u64) -> Result<KnotStudy> {
    spec.validate()?;
    let mut cells = Vec::new();
    let mut grand = Estimator::new();
    for &l in &spec.layers {
        for &n in &spec.widths {
            let g = cells.len() as u64;
            let cfg = NetConfig::all(vec![n; l], spec.dist);
            let sub = derive_seed(seed, g);
            let knots = map_trials(spec.trials, |t| Ok(network_knot_count(&sample_network(&cfg, sub, t)?)))?;
            let nl = (n * l) as f64;
            let mut e = Estimator::new();
            for &m in &knots {
                let v = (m as f64 - nl) / nl;
                e.push(v);
                grand.push(v);
            }
            cells.push(KnotCell {
                layers: l,
                width: n,
                knots,
                normalized_error: e,
            });
        }
    }
    Ok(KnotStudy { cells, grand })
}

impl KnotStudy {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["l", "n", "trial", "m", "normalized_error"]);
        for c in &self.cells {
            let nl = (c.layers * c.width) as f64;
            for (i, &m) in c.knots.iter().enumerate() {
                t.push(vec![c.layers.into(), c.width.into(), i.into(), m.into(), ((m as f64 - nl) / nl).into()]);
            }
        }
        t.note(format!(
            "grand mean normalized_error={} se={}",
            super::format_real(self.grand.mean()),
            super::format_real(self.grand.std_error())
        ));
        for c in &self.cells {
            t.note(format!(
                "l={} n={} mean={} se={}",
                c.layers,
                c.width,
                super::format_real(c.normalized_error.mean()),
                super::format_real(c.normalized_error.std_error())
            ));
        }
        t
    }
}

// ---------------------------------------------------------------- roots table

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootsTableSpec {
    pub n: usize,
    pub trials: u64,
    /// 1-based row numbers to run.
    pub rows: Vec<usize>,
}

impl Default for RootsTableSpec {
    fn default() -> Self {
        RootsTableSpec {
            n: 1000,
            trials: 2000,
            rows: (1..=ROOTS_ROWS.len()).collect(),
        }
    }
}

impl RootsTableSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.rows.is_empty() || self.rows.iter().any(|&r| r == 0 || r > ROOTS_ROWS.len()) {
            return Err(Error::config("rows", format!("rows must lie in 1..={}", ROOTS_ROWS.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootsTableRow {
    pub row: usize,
    pub dists: Vec<String>,
    pub reals: Estimator,
    pub span: Estimator,
    pub reference_reals: f64,
    pub reference_span: f64,
}

/// Mean roots over the reals and over the knot span; both counts come from
/// the same networks. Row `r` uses master seed `derive_seed(seed, r)`.
pub fn roots_table(spec: &RootsTableSpec, seed: u64) -> Result<Vec<RootsTableRow>> {
    spec.validate()?;
    spec.rows
        .iter()
        .map(|&r| {
            let def = ROOTS_ROWS[r - 1];
            let cfg = shallow_cfg(spec.n, def.dists);
            let sub = derive_seed(seed, r as u64);
            let (reals, span) = fold_trials(
                spec.trials,
                || (Estimator::new(), Estimator::new()),
                |(a, b), t| {
                    let cf = CanonicalForm::from_network(&sample_network(&cfg, sub, t)?)?;
                    a.push(cf.root_count(RootDomain::AllReals) as f64);
                    b.push(cf.root_count(RootDomain::InteriorKnotSpan) as f64);
                    Ok(())
                },
                |a, b| {
                    a.0.merge(&b.0);
                    a.1.merge(&b.1);
                },
            )?;
            Ok(RootsTableRow {
                row: r,
                dists: def.dists.iter().map(ToString::to_string).collect(),
                reals,
                span,
                reference_reals: def.reference_reals,
                reference_span: def.reference_span,
            })
        })
        .collect()
}

pub fn roots_table_csv(rows: &[RootsTableRow]) -> Table {
    let mut t = Table::new([
        "row", "w1", "b1", "w2", "b2", "trials", "mean_R", "se_R", "mean_span", "se_span", "reference_R", "reference_span",
    ]);
    for r in rows {
        let mut cells: Vec<Cell> = vec![r.row.into()];
        cells.extend(r.dists.iter().map(|d| Cell::from(d.as_str())));
        cells.extend([
            r.reals.count().into(),
            r.reals.mean().into(),
            r.reals.std_error().into(),
            r.span.mean().into(),
            r.span.std_error().into(),
            r.reference_reals.into(),
            r.reference_span.into(),
        ]);
        t.push(cells);
    }
    t
}

// ---------------------------------------------------------------- crossings

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingsSpec {
    pub min_steps: usize,
    pub max_steps: usize,
    pub trials: u64,
    pub window_fixed: (f64, f64),
    pub window_knots: (f64, f64),
}

impl Default for CrossingsSpec {
    fn default() -> Self {
        CrossingsSpec {
            min_steps: 4,
            max_steps: 1 << 14,
            trials: 2000,
            window_fixed: (16.0, f64::INFINITY),
            window_knots: (4.0, f64::INFINITY),
        }
    }
}

impl CrossingsSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.min_steps < 2 || !self.min_steps.is_power_of_two() || !self.max_steps.is_power_of_two() {
            return Err(Error::config("min_steps", "step counts must be powers of two, at least 2"));
        }
        if self.max_steps < self.min_steps {
            return Err(Error::config("max_steps", "must be at least min_steps"));
        }
        need_window("window_fixed", self.window_fixed)?;
        need_window("window_knots", self.window_knots)
    }

    pub fn grid(&self) -> Vec<usize> {
        powers_of_two(self.min_steps.trailing_zeros(), self.max_steps.trailing_zeros())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingSeries {
    pub variant: &'static str,
    pub n: Vec<usize>,
    pub means: Vec<Estimator>,
    pub fit: FitResult,
}

/// Mean crossing counts of homogeneous walks against `n`, for fixed steps
/// and for Cauchy-distributed network knots, with `mean = a ln n + b` fits.
pub fn crossing_law(spec: &CrossingsSpec, seed: u64) -> Result<Vec<CrossingSeries>> {
    spec.validate()?;
    let grid = spec.grid();
    let models = [
        ("fixed", WalkModel::fixed_normal(), spec.window_fixed),
        ("knots", WalkModel::cauchy_knots(), spec.window_knots),
    ];
    models
        .into_iter()
        .enumerate()
        .map(|(i, (variant, model, window))| {
            let means = mean_crossings_by_n(&model, &grid, spec.trials, derive_seed(seed, i as u64))?;
            let pts: Vec<(f64, f64)> = grid.iter().zip(&means).map(|(&n, e)| (n as f64, e.mean())).collect();
            let se: Vec<f64> = means.iter().map(Estimator::std_error).collect();
            let fit = fit_line(&pts, Some(&se), window, Axes::SEMILOG_X)?;
            Ok(CrossingSeries {
                variant,
                n: grid.clone(),
                means,
                fit,
            })
        })
        .collect()
}

fn fit_note(name: &str, f: &FitResult) -> String {
    format!(
        "fit {name}: slope={} slope_se={} intercept={} intercept_se={} residual_rms={} window=[{}, {}] points={}",
        super::format_real(f.slope),
        super::format_real(f.slope_se),
        super::format_real(f.intercept),
        super::format_real(f.intercept_se),
        super::format_real(f.residual_rms),
        f.window.0,
        f.window.1,
        f.points
    )
}

pub fn crossings_csv(series: &[CrossingSeries]) -> Table {
    let mut t = Table::new(["variant", "n", "trials", "mean", "se"]);
    for s in series {
        for (&n, e) in s.n.iter().zip(&s.means) {
            t.push(vec![s.variant.into(), n.into(), e.count().into(), e.mean().into(), e.std_error().into()]);
        }
    }
    for s in series {
        t.note(fit_note(&format!("{} mean=a*ln(n)+b", s.variant), &s.fit));
    }
    t
}

// ---------------------------------------------------------------- survival

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalSpec {
    pub steps: usize,
    pub trials: u64,
    pub survival_window: (f64, f64),
    pub abs_y_window: (f64, f64),
    pub abs_y_prime_window: (f64, f64),
    pub pmf_window: (f64, f64),
}

impl Default for SurvivalSpec {
    fn default() -> Self {
        SurvivalSpec {
            steps: 100_000,
            trials: 10_000,
            survival_window: (1e2, 1e4),
            abs_y_window: (1e-3, 0.3),
            abs_y_prime_window: (0.03, 1.0),
            pmf_window: (4.0, 14.0),
        }
    }
}

impl SurvivalSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.steps < 3 {
            return Err(Error::config("steps", "at least three steps are required"));
        }
        need_window("survival_window", self.survival_window)?;
        need_window("abs_y_window", self.abs_y_window)?;
        need_window("abs_y_prime_window", self.abs_y_prime_window)?;
        need_window("pmf_window", self.pmf_window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalFits {
    pub survival: FitResult,
    pub abs_y: FitResult,
    pub abs_y_prime: FitResult,
    /// Slope of `log2 pmf` against the crossing count.
    pub pmf_log2: FitResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalStudy {
    pub stats: CrossingStats,
    pub fits: SurvivalFits,
    /// Survival sampled on a log grid, `(k, S(k))`.
    pub survival_grid: Vec<(f64, f64)>,
    pub abs_y_grid: Vec<(f64, f64)>,
    pub abs_y_prime_grid: Vec<(f64, f64)>,
}

/// `count` points per decade from `lo` to `hi`.
fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let a = lo.log10();
    let b = hi.log10();
    let steps = ((b - a) * per_decade as f64).round() as usize;
    (0..=steps).map(|i| 10f64.powf(a + (b - a) * i as f64 / steps.max(1) as f64)).collect()
}

/// Exit times, pre-crossing magnitudes and crossing counts of homogeneous
/// fixed-step walks with `N(0,1)` increments.
pub fn survival_study(spec: &SurvivalSpec, seed: u64) -> Result<SurvivalStudy> {
    spec.validate()?;
    let stats = crossing_statistics(&WalkModel::fixed_normal(), spec.steps, spec.trials, seed)?;

    let mut ks: Vec<usize> = log_grid(1.0, spec.steps as f64, 20).iter().map(|k| k.round() as usize).collect();
    ks.dedup();
    let survival_grid: Vec<(f64, f64)> = ks.iter().map(|&k| (k as f64, stats.survival[k])).collect();
    let mags = log_grid(1e-4, 1e2, 10);
    let abs_y_grid: Vec<(f64, f64)> = mags.iter().map(|&x| (x, CrossingStats::ecdf(&stats.pre_abs_y, x))).collect();
    let abs_y_prime_grid: Vec<(f64, f64)> =
        mags.iter().map(|&x| (x, CrossingStats::ecdf(&stats.pre_abs_y_prime, x))).collect();
    let pmf: Vec<(f64, f64)> = stats.pmf_roots.iter().enumerate().map(|(r, &p)| (r as f64, p)).collect();

    let mut pmf_log2 = fit_line(&pmf, None, spec.pmf_window, Axes::SEMILOG_Y)?;
    pmf_log2.slope /= std::f64::consts::LN_2;
    pmf_log2.slope_se /= std::f64::consts::LN_2;
    pmf_log2.intercept /= std::f64::consts::LN_2;
    pmf_log2.intercept_se /= std::f64::consts::LN_2;
    pmf_log2.residual_rms /= std::f64::consts::LN_2;
    let fits = SurvivalFits {
        survival: fit_line(&survival_grid, None, spec.survival_window, Axes::LOGLOG)?,
        abs_y: fit_line(&abs_y_grid, None, spec.abs_y_window, Axes::LOGLOG)?,
        abs_y_prime: fit_line(&abs_y_prime_grid, None, spec.abs_y_prime_window, Axes::LOGLOG)?,
        pmf_log2,
    };
    Ok(SurvivalStudy {
        stats,
        fits,
        survival_grid,
        abs_y_grid,
        abs_y_prime_grid,
    })
}

impl SurvivalStudy {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["series", "x", "value"]);
        for &(k, s) in &self.survival_grid {
            t.push(vec!["survival".into(), k.into(), s.into()]);
        }
        for &(x, f) in &self.abs_y_grid {
            t.push(vec!["cdf_abs_y".into(), x.into(), f.into()]);
        }
        for &(x, f) in &self.abs_y_prime_grid {
            t.push(vec!["cdf_abs_y_prime".into(), x.into(), f.into()]);
        }
        for (r, &p) in self.stats.pmf_roots.iter().enumerate() {
            t.push(vec!["pmf_roots".into(), (r as f64).into(), p.into()]);
        }
        let m = &self.stats.mean_crossings;
        t.note(format!(
            "mean crossings={} se={} median={} trials={} steps={}",
            super::format_real(m.mean()),
            super::format_real(m.std_error()),
            self.stats.median_crossings(),
            self.stats.trials,
            self.stats.steps
        ));
        t.note(fit_note("survival loglog", &self.fits.survival));
        t.note(fit_note("cdf_abs_y loglog", &self.fits.abs_y));
        t.note(fit_note("cdf_abs_y_prime loglog", &self.fits.abs_y_prime));
        t.note(fit_note("pmf log2", &self.fits.pmf_log2));
        t
    }
}

// ---------------------------------------------------------------- fudge

/// Which line coefficient is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LineTarget {
    C0,
    C1,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FudgeSpec {
    pub n: usize,
    pub trials: u64,
    pub factors: Vec<f64>,
    /// Set the coefficient that is not scaled to zero.
    pub zero_other: bool,
}

impl Default for FudgeSpec {
    fn default() -> Self {
        let mut factors = vec![0.0];
        factors.extend((-20..=20).map(|k| 2f64.powi(k)));
        FudgeSpec {
            n: 1000,
            trials: 2000,
            factors,
            zero_other: false,
        }
    }
}

impl FudgeSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.factors.is_empty() || self.factors.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(Error::config("factors", "needs finite non-negative factors"));
        }
        Ok(())
    }

    /// `(c1_factor, c0_factor)` applied for `target` at `factor`.
    pub fn line_factors(&self, target: LineTarget, factor: f64) -> (f64, f64) {
        let other = if self.zero_other { 0.0 } else { 1.0 };
        match target {
            LineTarget::C0 => (other, factor),
            LineTarget::C1 => (factor, other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FudgeCurve {
    pub target: LineTarget,
    pub factors: Vec<f64>,
    pub roots: Vec<Estimator>,
}

/// Mean roots over the reals as `c0` or `c1` is scaled, on `N/N/{-1,1}/0`
/// networks. All factors and both targets share the same networks.
pub fn fudge_curves(spec: &FudgeSpec, seed: u64) -> Result<[FudgeCurve; 2]> {
    spec.validate()?;
    let cfg = shallow_cfg(spec.n, NNR0);
    let k = spec.factors.len();
    let acc = fold_trials(
        spec.trials,
        || vec![Estimator::new(); 2 * k],
        |acc, t| {
            let cf = CanonicalForm::from_network(&sample_network(&cfg, seed, t)?)?;
            for (ti, target) in [LineTarget::C0, LineTarget::C1].into_iter().enumerate() {
                for (fi, &f) in spec.factors.iter().enumerate() {
                    let (a, b) = spec.line_factors(target, f);
                    acc[ti * k + fi].push(cf.with_line_scaled(a, b).root_count(RootDomain::AllReals) as f64);
                }
            }
            Ok(())
        },
        crate::irw::merge_vec,
    )?;
    Ok([
        FudgeCurve {
            target: LineTarget::C0,
            factors: spec.factors.clone(),
            roots: acc[..k].to_vec(),
        },
        FudgeCurve {
            target: LineTarget::C1,
            factors: spec.factors.clone(),
            roots: acc[k..].to_vec(),
        },
    ])
}

impl FudgeCurve {
    pub fn at(&self, factor: f64) -> Option<&Estimator> {
        self.factors.iter().position(|&f| f == factor).map(|i| &self.roots[i])
    }
}

pub fn fudge_csv(curves: &[FudgeCurve], zero_other: bool) -> Table {
    let mut t = Table::new(["scaled", "other", "factor", "trials", "mean_roots", "se"]);
    for c in curves {
        let (scaled, other) = match c.target {
            LineTarget::C0 => ("c0", "c1"),
            LineTarget::C1 => ("c1", "c0"),
        };
        let other = if zero_other { format!("{other}=0") } else { other.to_string() };
        for (&f, e) in c.factors.iter().zip(&c.roots) {
            t.push(vec![
                scaled.into(),
                other.clone().into(),
                f.into(),
                e.count().into(),
                e.mean().into(),
                e.std_error().into(),
            ]);
        }
    }
    t
}

// ---------------------------------------------------------------- variance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceSpec {
    pub n: usize,
    pub trials: u64,
    /// Window on `|x|` for cells with `x < -1`.
    pub left_window: (f64, f64),
    /// Window on `x` for cells with `x > 1`.
    pub right_window: (f64, f64),
    /// Window on `x` for the `ln Var` against `x` fit.
    pub central_window: (f64, f64),
}

impl Default for VarianceSpec {
    fn default() -> Self {
        VarianceSpec {
            n: 1000,
            trials: 2000,
            left_window: (2.0, 200.0),
            right_window: (2.0, 200.0),
            central_window: (-1.0, 1.0),
        }
    }
}

impl VarianceSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.n < 2 {
            return Err(Error::config("n", "must be at least 2"));
        }
        need_window("left_window", self.left_window)?;
        need_window("right_window", self.right_window)?;
        need_window("central_window", self.central_window)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceFits {
    /// `ln Var` against `ln |x|` for `x < -1`.
    pub left: FitResult,
    /// `ln Var` against `ln x` for `x > 1`.
    pub right: FitResult,
    /// `ln Var` against `x`.
    pub central: FitResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceStudy {
    pub cells: Vec<crate::irw::CellVariance>,
    pub fits: VarianceFits,
}

/// Per-cell variance of the homogeneous walk of `N/N/{-1,1}/0` networks.
pub fn variance_study(spec: &VarianceSpec, seed: u64) -> Result<VarianceStudy> {
    spec.validate()?;
    let cells = variance_by_quantile(&shallow_cfg(spec.n, NNR0), spec.trials, seed)?;
    let left: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.x < -1.0)
        .map(|c| (-c.x, c.values.variance()))
        .collect();
    let right: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.x > 1.0)
        .map(|c| (c.x, c.values.variance()))
        .collect();
    let all: Vec<(f64, f64)> = cells.iter().map(|c| (c.x, c.values.variance())).collect();
    let fits = VarianceFits {
        left: fit_line(&left, None, spec.left_window, Axes::LOGLOG)?,
        right: fit_line(&right, None, spec.right_window, Axes::LOGLOG)?,
        central: fit_line(&all, None, spec.central_window, Axes::SEMILOG_Y)?,
    };
    Ok(VarianceStudy { cells, fits })
}

impl VarianceStudy {
    pub fn table(&self) -> Table {
        let mut t = Table::new(["cell", "lo", "hi", "x", "count", "variance"]);
        for (j, c) in self.cells.iter().enumerate() {
            t.push(vec![
                j.into(),
                c.lo.into(),
                c.hi.into(),
                c.x.into(),
                c.values.count().into(),
                c.values.variance().into(),
            ]);
        }
        t.note(fit_note("left ln(var)=a*ln(-x)+b", &self.fits.left));
        t.note(fit_note("right ln(var)=a*ln(x)+b", &self.fits.right));
        t.note(fit_note("central ln(var)=a*x+b", &self.fits.central));
        t
    }
}

// ---------------------------------------------------------------- correlation

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSpec {
    pub n: usize,
    pub trials: u64,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        CorrelationSpec { n: 100, trials: 2000 }
    }
}

impl CorrelationSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn correlation_study(spec: &CorrelationSpec, seed: u64) -> Result<crate::irw::CorrelationSurface> {
    spec.validate()?;
    shifted_correlation(&shallow_cfg(spec.n, NNR0), spec.n, spec.trials, seed)
}

pub fn correlation_csv(s: &crate::irw::CorrelationSurface) -> Table {
    let mut t = Table::new(["x", "h", "x_plus_h", "corr"]);
    for (a, &x) in s.points.iter().enumerate() {
        for (b, &xb) in s.points.iter().enumerate() {
            t.push(vec![x.into(), (xb - x).into(), xb.into(), s.at(a, b).into()]);
        }
    }
    t
}

// ---------------------------------------------------------------- gradients

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientSpec {
    pub widths: Vec<usize>,
    pub trials: u64,
    pub xs: Vec<f64>,
    pub weights: DistributionSpec,
}

impl Default for GradientSpec {
    fn default() -> Self {
        GradientSpec {
            widths: vec![32; 4],
            trials: 200,
            xs: vec![-2.0, -1.0, -0.5, 0.5, 1.0, 2.0],
            weights: DistributionSpec::NORMAL,
        }
    }
}

impl GradientSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        NetConfig::zero_bias(self.widths.clone(), self.weights).validate()?;
        if self.xs.is_empty() {
            return Err(Error::config("xs", "at least one input point is required"));
        }
        Ok(())
    }
}

/// Bias-gradient distribution per layer of zero-bias networks.
pub fn gradient_study(spec: &GradientSpec, seed: u64) -> Result<Vec<crate::gradients::GradientDistribution>> {
    spec.validate()?;
    let cfg = NetConfig::zero_bias(spec.widths.clone(), spec.weights);
    (0..cfg.depth())
        .map(|i| gradient_distribution(&cfg, i, &spec.xs, spec.trials, seed))
        .collect()
}

pub fn gradient_csv(layers: &[crate::gradients::GradientDistribution]) -> Table {
    let mut t = Table::new([
        "layer",
        "samples",
        "zero_mass",
        "se_zero_mass",
        "wedge_down",
        "se_wedge_down",
        "nonzero_mean",
        "nonzero_variance",
        "skewness",
        "excess_kurtosis",
    ]);
    for (i, d) in layers.iter().enumerate() {
        let m: &Moments = &d.nonzero;
        t.push(vec![
            i.into(),
            d.zero_mass.count().into(),
            d.zero_mass.mean().into(),
            d.zero_mass.std_error().into(),
            d.wedge_down.mean().into(),
            d.wedge_down.std_error().into(),
            m.mean().into(),
            m.variance().into(),
            m.skewness().into(),
            m.excess_kurtosis().into(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- order statistics

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OrderDist {
    StandardNormal,
    Cauchy,
}

impl std::fmt::Display for OrderDist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrderDist::StandardNormal => "normal",
            OrderDist::Cauchy => "cauchy",
        })
    }
}

/// Median of the minimum of `n` i.i.d. draws: `F^-1(1 - 2^(-1/n))`.
pub fn min_median_closed_form(dist: OrderDist, n: u64) -> f64 {
    let p = -(-std::f64::consts::LN_2 / n as f64).exp_m1();
    match dist {
        OrderDist::Cauchy => (std::f64::consts::PI * (p - 0.5)).tan(),
        OrderDist::StandardNormal => Normal::standard().inverse_cdf(p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderStatCheck {
    pub dist: OrderDist,
    pub n: u64,
    pub trials: u64,
    pub empirical_median: f64,
    pub closed_form: f64,
    /// Trials whose minimum is at most the closed-form median.
    pub below: u64,
    /// `trials / 2 -+ 1.5 sqrt(trials)`, three binomial standard deviations.
    pub band: (f64, f64),
}

impl OrderStatCheck {
    pub fn within_band(&self) -> bool {
        let b = self.below as f64;
        b >= self.band.0 && b <= self.band.1
    }
}

/// Empirical median of the minimum of `n` draws against the closed form.
pub fn order_statistic_check(dist: OrderDist, n: u64, trials: u64, seed: u64) -> Result<OrderStatCheck> {
    need_trials(trials)?;
    if n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    let cauchy = Cauchy::new(0.0, 1.0).expect("unit Cauchy");
    let mut minima = map_trials(trials, |t| {
        let mut rng = trial_rng(seed, t);
        let mut m = f64::INFINITY;
        for _ in 0..n {
            let x = match dist {
                OrderDist::StandardNormal => DistributionSpec::NORMAL.sample(&mut rng),
                OrderDist::Cauchy => rng.sample(cauchy),
            };
            m = m.min(x);
        }
        Ok(m)
    })?;
    minima.sort_unstable_by(f64::total_cmp);
    let closed_form = min_median_closed_form(dist, n);
    let below = minima.partition_point(|&m| m <= closed_form) as u64;
    let half = trials as f64 / 2.0;
    let w = 1.5 * (trials as f64).sqrt();
    Ok(OrderStatCheck {
        dist,
        n,
        trials,
        empirical_median: crate::canonical::quantile_sorted(&minima, 0.5),
        closed_form,
        below,
        band: (half - w, half + w),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStatsSpec {
    pub sizes: Vec<u64>,
    pub trials: u64,
}

impl Default for OrderStatsSpec {
    fn default() -> Self {
        OrderStatsSpec {
            sizes: vec![1, 10, 100, 1000, 10_000],
            trials: 2000,
        }
    }
}

impl OrderStatsSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(Error::config("sizes", "needs positive sample sizes"));
        }
        Ok(())
    }
}

pub fn order_stats_study(spec: &OrderStatsSpec, seed: u64) -> Result<Vec<OrderStatCheck>> {
    spec.validate()?;
    let mut out = Vec::new();
    for (d, dist) in [OrderDist::StandardNormal, OrderDist::Cauchy].into_iter().enumerate() {
        for (i, &n) in spec.sizes.iter().enumerate() {
            let sub = derive_seed(seed, (d * spec.sizes.len() + i) as u64);
            out.push(order_statistic_check(dist, n, spec.trials, sub)?);
        }
    }
    Ok(out)
}

pub fn order_stats_csv(checks: &[OrderStatCheck]) -> Table {
    let mut t = Table::new([
        "dist",
        "n",
        "trials",
        "empirical_median",
        "closed_form",
        "below",
        "band_lo",
        "band_hi",
        "within_band",
        "leading_order",
    ]);
    for c in checks {
        let lead = match c.dist {
            OrderDist::StandardNormal if c.n > 1 => -(2.0 * (c.n as f64).ln()).sqrt(),
            OrderDist::Cauchy => -(c.n as f64) / std::f64::consts::PI * std::f64::consts::LN_2.recip(),
            _ => f64::NAN,
        };
        t.push(vec![
            c.dist.to_string().into(),
            c.n.into(),
            c.trials.into(),
            c.empirical_median.into(),
            c.closed_form.into(),
            c.below.into(),
            c.band.0.into(),
            c.band.1.into(),
            Cell::from(if c.within_band() { "true" } else { "false" }),
            lead.into(),
        ]);
    }
    t
}

// ---------------------------------------------------------------- decomposition

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionSpec {
    pub n: usize,
    pub trials: u64,
    /// Samples per network, spread over Cauchy quantiles.
    pub samples: usize,
}

impl Default for DecompositionSpec {
    fn default() -> Self {
        DecompositionSpec {
            n: 1000,
            trials: 3,
            samples: 200,
        }
    }
}

impl DecompositionSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.samples < 2 {
            return Err(Error::config("samples", "must be at least 2"));
        }
        Ok(())
    }
}

/// A network split into its homogeneous walk `f` and the line `c1 x + c0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub trial: u64,
    pub c1: f64,
    pub c0: f64,
    /// `(x, y(x), f(x), -c1 x - c0)`.
    pub samples: Vec<(f64, f64, f64, f64)>,
    pub roots: Vec<f64>,
    pub intersections: Vec<f64>,
}

/// Splits `cf` and checks that the roots of the network are the points
/// where `f = -c1 x - c0`.
pub fn decomposition_trace(cf: &CanonicalForm, sample_xs: &[f64]) -> Result<Decomposition> {
    let y = cf.to_pwl()?;
    let f = cf.homogeneous().to_pwl()?;
    let neg_line = PwlFunction::line(-cf.c1(), -cf.c0());
    let diff = PwlFunction::affine_combine(&[f.clone(), neg_line.clone()], &[1.0, -1.0], 0.0);
    let roots = y.sign_change_roots(Interval::real());
    let intersections = diff.sign_change_roots(Interval::real());
    let agree = roots.len() == intersections.len()
        && roots
            .iter()
            .zip(&intersections)
            .all(|(a, b)| (a - b).abs() <= 1e-8 * 1f64.max(a.abs())) ;
    if !agree || roots.len() != cf.root_count(RootDomain::AllReals) {
        return Err(Error::Inconsistent(format!(
            "roots {roots:?} differ from intersections {intersections:?}"
        )));
    }
    let samples = sample_xs
        .iter()
        .map(|&x| (x, y.eval(x), f.eval(x), neg_line.eval(x)))
        .collect();
    Ok(Decomposition {
        trial: 0,
        c1: cf.c1(),
        c0: cf.c0(),
        samples,
        roots,
        intersections,
    })
}

pub fn decomposition_study(spec: &DecompositionSpec, seed: u64) -> Result<Vec<Decomposition>> {
    spec.validate()?;
    let cfg = shallow_cfg(spec.n, NNR0);
    let xs: Vec<f64> = (1..=spec.samples)
        .map(|i| ((i as f64 / (spec.samples + 1) as f64 - 0.5) * std::f64::consts::PI).tan())
        .collect();
    map_trials(spec.trials, |t| {
        let cf = CanonicalForm::from_network(&sample_network(&cfg, seed, t)?)?;
        let mut d = decomposition_trace(&cf, &xs)?;
        d.trial = t;
        Ok(d)
    })
}

pub fn decomposition_csv(ds: &[Decomposition]) -> Table {
    let mut t = Table::new(["trial", "x", "network", "walk", "neg_line"]);
    for d in ds {
        for &(x, y, f, l) in &d.samples {
            t.push(vec![d.trial.into(), x.into(), y.into(), f.into(), l.into()]);
        }
    }
    for d in ds {
        t.note(format!(
            "trial={} c1={} c0={} roots={} intersections={}",
            d.trial,
            super::format_real(d.c1),
            super::format_real(d.c0),
            d.roots.len(),
            d.intersections.len()
        ));
    }
    t
}

// ---------------------------------------------------------------- equivalence

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceSpec {
    pub n: usize,
    pub trials: u64,
}

impl Default for EquivalenceSpec {
    fn default() -> Self {
        EquivalenceSpec { n: 1000, trials: 100 }
    }
}

impl EquivalenceSpec {
    pub fn validate(&self) -> Result<()> {
        need_trials(self.trials)?;
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub trial: u64,
    /// `max_k |y_k - y(x_k)|` between the walk and direct summation.
    pub max_abs_discrepancy: f64,
    pub max_abs_y: f64,
}

/// Walk values at the knots against direct evaluation of the network.
pub fn equivalence_check(spec: &EquivalenceSpec, seed: u64) -> Result<Vec<EquivalenceRow>> {
    spec.validate()?;
    let cfg = shallow_cfg(spec.n, NNR0);
    map_trials(spec.trials, |t| {
        let cf = CanonicalForm::from_network(&sample_network(&cfg, seed, t)?)?;
        let path = path_from_network(&cf)?;
        let mut worst: f64 = 0.0;
        let mut big: f64 = 0.0;
        for (&x, &y) in path.xs.iter().zip(&path.ys) {
            worst = worst.max((y - cf.eval(x)).abs());
            big = big.max(y.abs());
        }
        Ok(EquivalenceRow {
            trial: t,
            max_abs_discrepancy: worst,
            max_abs_y: big,
        })
    })
}

pub fn equivalence_csv(rows: &[EquivalenceRow]) -> Table {
    let mut t = Table::new(["trial", "max_abs_discrepancy", "max_abs_y"]);
    for r in rows {
        t.push(vec![r.trial.into(), r.max_abs_discrepancy.into(), r.max_abs_y.into()]);
    }
    let worst = rows.iter().map(|r| r.max_abs_discrepancy).fold(0.0, f64::max);
    t.note(format!("max discrepancy={}", super::format_real(worst)));
    t
}

// ---------------------------------------------------------------- dispatch

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "recipe", rename_all = "kebab-case")]
pub enum Recipe {
    Knots(KnotsSpec),
    RootsTable(RootsTableSpec),
    Crossings(CrossingsSpec),
    Survival(SurvivalSpec),
    Fudge(FudgeSpec),
    FudgeZeroed(FudgeSpec),
    Variance(VarianceSpec),
    Correlation(CorrelationSpec),
    GradientDist(GradientSpec),
    OrderStats(OrderStatsSpec),
    Decomposition(DecompositionSpec),
    EquivalenceCheck(EquivalenceSpec),
}

impl Recipe {
    pub fn name(&self) -> &'static str {
        match self {
            Recipe::Knots(_) => "knots",
            Recipe::RootsTable(_) => "roots-table",
            Recipe::Crossings(_) => "crossings",
            Recipe::Survival(_) => "survival",
            Recipe::Fudge(_) => "fudge",
            Recipe::FudgeZeroed(_) => "fudge-zeroed",
            Recipe::Variance(_) => "variance",
            Recipe::Correlation(_) => "correlation",
            Recipe::GradientDist(_) => "gradient-dist",
            Recipe::OrderStats(_) => "order-stats",
            Recipe::Decomposition(_) => "decomposition",
            Recipe::EquivalenceCheck(_) => "equivalence-check",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Recipe::Knots(s) => s.validate(),
            Recipe::RootsTable(s) => s.validate(),
            Recipe::Crossings(s) => s.validate(),
            Recipe::Survival(s) => s.validate(),
            Recipe::Fudge(s) => {
                if s.zero_other {
                    return Err(Error::config("zero_other", "use the fudge-zeroed recipe"));
                }
                s.validate()
            }
            Recipe::FudgeZeroed(s) => {
                if !s.zero_other {
                    return Err(Error::config("zero_other", "fudge-zeroed sets the other coefficient to zero"));
                }
                s.validate()
            }
            Recipe::Variance(s) => s.validate(),
            Recipe::Correlation(s) => s.validate(),
            Recipe::GradientDist(s) => s.validate(),
            Recipe::OrderStats(s) => s.validate(),
            Recipe::Decomposition(s) => s.validate(),
            Recipe::EquivalenceCheck(s) => s.validate(),
        }
    }
}

/// A recipe with its master seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub master_seed: u64,
    #[serde(flatten)]
    pub recipe: Recipe,
}

impl ExperimentSpec {
    pub fn new(recipe: Recipe, master_seed: u64) -> Self {
        ExperimentSpec { master_seed, recipe }
    }

    pub fn validate(&self) -> Result<()> {
        self.recipe.validate()
    }

    /// Comment lines that open every CSV: tool version, recipe, seed and
    /// the resolved spec as JSON. `timestamp` is added only when given.
    pub fn header(&self, timestamp: Option<u64>) -> Result<Vec<String>> {
        let mut h = vec![
            format!("splinewalk {}", env!("CARGO_PKG_VERSION")),
            format!("recipe={}", self.recipe.name()),
            format!("master_seed={}", self.master_seed),
            format!("spec={}", serde_json::to_string(self)?),
        ];
        if let Some(ts) = timestamp {
            h.push(format!("unix_time={ts}"));
        }
        Ok(h)
    }
}

/// Tabular output plus a JSON summary of fits and headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    pub summary: serde_json::Value,
}

/// Runs a recipe.
pub fn run_trials(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let seed = spec.master_seed;
    let (table, summary) = match &spec.recipe {
        Recipe::Knots(s) => {
            let st = knot_study(s, seed)?;
            let per: Vec<_> = st
                .cells
                .iter()
                .map(|c| json!({"l": c.layers, "n": c.width, "mean": c.normalized_error.mean(), "se": c.normalized_error.std_error()}))
                .collect();
            (st.table(), json!({"grand_mean": st.grand.mean(), "grand_se": st.grand.std_error(), "cells": per}))
        }
        Recipe::RootsTable(s) => {
            let rows = roots_table(s, seed)?;
            let js: Vec<_> = rows
                .iter()
                .map(|r| json!({"row": r.row, "mean_R": r.reals.mean(), "se_R": r.reals.std_error(), "mean_span": r.span.mean(), "se_span": r.span.std_error()}))
                .collect();
            (roots_table_csv(&rows), json!({"rows": js}))
        }
        Recipe::Crossings(s) => {
            let series = crossing_law(s, seed)?;
            let js: Vec<_> = series.iter().map(|c| json!({"variant": c.variant, "fit": c.fit})).collect();
            (crossings_csv(&series), json!({"fits": js}))
        }
        Recipe::Survival(s) => {
            let st = survival_study(s, seed)?;
            let m = &st.stats.mean_crossings;
            let summary = json!({
                "mean_crossings": m.mean(),
                "se_crossings": m.std_error(),
                "median_crossings": st.stats.median_crossings(),
                "fits": st.fits,
            });
            (st.table(), summary)
        }
        Recipe::Fudge(s) | Recipe::FudgeZeroed(s) => {
            let curves = fudge_curves(s, seed)?;
            (fudge_csv(&curves, s.zero_other), json!({"curves": curves}))
        }
        Recipe::Variance(s) => {
            let st = variance_study(s, seed)?;
            (st.table(), json!({"fits": st.fits}))
        }
        Recipe::Correlation(s) => {
            let surf = correlation_study(s, seed)?;
            (correlation_csv(&surf), json!({"points": surf.points.len(), "trials": surf.trials}))
        }
        Recipe::GradientDist(s) => {
            let layers = gradient_study(s, seed)?;
            let js: Vec<_> = layers
                .iter()
                .map(|d| json!({"zero_mass": d.zero_mass.mean(), "wedge_down": d.wedge_down.mean(), "skewness": d.nonzero.skewness(), "excess_kurtosis": d.nonzero.excess_kurtosis()}))
                .collect();
            (gradient_csv(&layers), json!({"layers": js}))
        }
        Recipe::OrderStats(s) => {
            let checks = order_stats_study(s, seed)?;
            (order_stats_csv(&checks), json!({"checks": checks}))
        }
        Recipe::Decomposition(s) => {
            let ds = decomposition_study(s, seed)?;
            let js: Vec<_> = ds.iter().map(|d| json!({"trial": d.trial, "roots": d.roots})).collect();
            (decomposition_csv(&ds), json!({"networks": js}))
        }
        Recipe::EquivalenceCheck(s) => {
            let rows = equivalence_check(s, seed)?;
            let worst = rows.iter().map(|r| r.max_abs_discrepancy).fold(0.0, f64::max);
            (equivalence_csv(&rows), json!({"max_abs_discrepancy": worst}))
        }
    };
    Ok(Report { table, summary })
}
