//! Least-squares lines on transformed axes.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    /// Inclusive window on the untransformed abscissa.
    pub window: (f64, f64),
    pub points: usize,
    /// Standard errors propagated from per-point errors when given,
    /// otherwise from the residuals.
    pub slope_se: f64,
    pub intercept_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Axes {
    pub log_x: bool,
    pub log_y: bool,
}

impl Axes {
    pub const LOGLOG: Axes = Axes { log_x: true, log_y: true };
    /// `y` against `ln x`.
    pub const SEMILOG_X: Axes = Axes { log_x: true, log_y: false };
    /// `ln y` against `x`.
    pub const SEMILOG_Y: Axes = Axes { log_x: false, log_y: true };
}

/// Fits `Y = slope X + intercept` over points with `x` in `window`, where
/// `X`, `Y` are `x`, `y` or their natural logs. Points that cannot be
/// transformed (non-positive under a log axis, non-finite) are skipped.
/// `sigma`, when given, holds the standard error of each untransformed `y`.
pub fn fit_line(points: &[(f64, f64)], sigma: Option<&[f64]>, window: (f64, f64), axes: Axes) -> Result<FitResult> {
    if let Some(s) = sigma {
        assert_eq!(s.len(), points.len(), "one sigma per point");
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ss = Vec::new();
    for (i, &(x, y)) in points.iter().enumerate() {
        if x < window.0 || x > window.1 {
            continue;
        }
        let tx = if axes.log_x { x.ln() } else { x };
        let ty = if axes.log_y { y.ln() } else { y };
        if !tx.is_finite() || !ty.is_finite() {
            continue;
        }
        xs.push(tx);
        ys.push(ty);
        if let Some(s) = sigma {
            ss.push(if axes.log_y { s[i] / y } else { s[i] });
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(Error::DegenerateWindow {
            lo: window.0,
            hi: window.1,
            points: n,
        });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateWindow {
            lo: window.0,
            hi: window.1,
            points: n,
        });
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    let (slope_se, intercept_se) = if ss.is_empty() {
        let s2 = rss / (nf - 2.0);
        ((s2 / sxx).sqrt(), (s2 * (1.0 / nf + mx * mx / sxx)).sqrt())
    } else {
        // slope = sum c_i Y_i, intercept = sum (1/n - mx c_i) Y_i.
        let mut vs = 0.0;
        let mut vi = 0.0;
        for (x, s) in xs.iter().zip(&ss) {
            let c = (x - mx) / sxx;
            vs += c * c * s * s;
            let d = 1.0 / nf - mx * c;
            vi += d * d * s * s;
        }
        (vs.sqrt(), vi.sqrt())
    };
    Ok(FitResult {
        slope,
        intercept,
        residual_rms: (rss / nf).sqrt(),
        window,
        points: n,
        slope_se,
        intercept_se,
    })
}

/// `ln y` against `ln x`.
pub fn fit_loglog(points: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult> {
    fit_line(points, None, window, Axes::LOGLOG)
}

/// `y` against `ln x`.
pub fn fit_semilog(points: &[(f64, f64)], window: (f64, f64)) -> Result<FitResult> {
    fit_line(points, None, window, Axes::SEMILOG_X)
}
