//! Streaming accumulators with pairwise merge.

use serde::Serialize;

/// Count, mean and sum of squared deviations (Welford), mergeable with the
/// parallel update of Chan et al.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Estimator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Estimator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut e = Self::new();
        xs.iter().for_each(|&x| e.push(x));
        e
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Estimator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        self.mean += d * nb / n;
        self.m2 += other.m2 + d * d * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Unbiased sample variance; 0 with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            f64::INFINITY
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn half_width_95(&self) -> f64 {
        1.96 * self.std_error()
    }
}

impl Extend<f64> for Estimator {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        iter.into_iter().for_each(|x| self.push(x));
    }
}

/// Central moments up to fourth order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let d = x - self.mean;
        let dn = d / n;
        let dn2 = dn * dn;
        let t1 = d * dn * n1;
        self.mean += dn;
        self.m4 += t1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += t1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += t1;
    }

    pub fn merge(&mut self, o: &Moments) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.count as f64, o.count as f64);
        let n = na + nb;
        let d = o.mean - self.mean;
        let d2 = d * d;
        let m2 = self.m2 + o.m2 + d2 * na * nb / n;
        let m3 = self.m3 + o.m3 + d2 * d * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * o.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + o.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * o.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * o.m3 - nb * self.m3) / n;
        self.mean += d * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.count += o.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn skewness(&self) -> f64 {
        let n = self.count as f64;
        n.sqrt() * self.m3 / self.m2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        let n = self.count as f64;
        n * self.m4 / (self.m2 * self.m2) - 3.0
    }

    /// Large-sample standard error of [`Moments::variance`].
    pub fn variance_se(&self) -> f64 {
        if self.count < 4 {
            return f64::INFINITY;
        }
        let n = self.count as f64;
        let mu4 = self.m4 / n;
        let s2 = self.variance();
        ((mu4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    }

    pub fn to_estimator(&self) -> Estimator {
        Estimator {
            count: self.count,
            mean: self.mean,
            m2: self.m2,
        }
    }
}

/// Bivariate co-moment accumulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Covariance {
    count: u64,
    mean_x: f64,
    mean_y: f64,
    m2x: f64,
    m2y: f64,
    cxy: f64,
}

impl Covariance {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.count += 1;
        let n = self.count as f64;
        let dx = x - self.mean_x;
        self.mean_x += dx / n;
        let dy = y - self.mean_y;
        self.mean_y += dy / n;
        self.m2x += dx * (x - self.mean_x);
        self.m2y += dy * (y - self.mean_y);
        self.cxy += dx * (y - self.mean_y);
    }

    pub fn merge(&mut self, o: &Covariance) {
        if o.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *o;
            return;
        }
        let (na, nb) = (self.count as f64, o.count as f64);
        let n = na + nb;
        let dx = o.mean_x - self.mean_x;
        let dy = o.mean_y - self.mean_y;
        let f = na * nb / n;
        self.m2x += o.m2x + dx * dx * f;
        self.m2y += o.m2y + dy * dy * f;
        self.cxy += o.cxy + dx * dy * f;
        self.mean_x += dx * nb / n;
        self.mean_y += dy * nb / n;
        self.count += o.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn covariance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.cxy / (self.count - 1) as f64
        }
    }

    pub fn correlation(&self) -> f64 {
        let d = (self.m2x * self.m2y).sqrt();
        if d > 0.0 {
            (self.cxy / d).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    }

    /// Approximate standard error `(1 - r^2) / sqrt(n - 1)`.
    pub fn correlation_se(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        let r = self.correlation();
        (1.0 - r * r) / ((self.count - 1) as f64).sqrt()
    }
}

/// Running sum with Neumaier compensation; products are split exactly
/// with fused multiply-add.
#[derive(Debug, Clone, Copy)]
pub(crate) struct CompensatedSum {
    pub(crate) sum: f64,
    pub(crate) comp: f64,
}

impl CompensatedSum {
    pub(crate) fn new(x: f64) -> Self {
        CompensatedSum { sum: x, comp: 0.0 }
    }

    #[inline]
    pub(crate) fn add(&mut self, t: f64) {
        let s = self.sum + t;
        self.comp += if self.sum.abs() >= t.abs() {
            (self.sum - s) + t
        } else {
            (t - s) + self.sum
        };
        self.sum = s;
    }

    /// Adds `a * b`.
    #[inline]
    pub(crate) fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.comp += a.mul_add(b, -p);
    }

    /// Adds `s * (a - b)`.
    #[inline]
    pub(crate) fn add_scaled_diff(&mut self, s: f64, a: f64, b: f64) {
        let d = a - b;
        let bv = a - d;
        let e = (a - (d + bv)) + (bv - b);
        self.add_product(s, d);
        self.comp += s * e;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_known_values() {
        let e = Estimator::from_slice(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(e.count(), 8);
        assert!((e.mean() - 5.0).abs() < 1e-15);
        assert!((e.variance() - 32.0 / 7.0).abs() < 1e-12);
        assert!((e.half_width_95() - 1.96 * (32.0f64 / 7.0 / 8.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_and_single() {
        let mut e = Estimator::new();
        assert_eq!(e.variance(), 0.0);
        e.push(3.0);
        assert_eq!(e.variance(), 0.0);
        let mut f = Estimator::new();
        f.merge(&e);
        assert_eq!(f, e);
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64).sin() * 3.0 + 1.0).collect();
        let mut all = Moments::new();
        xs.iter().for_each(|&x| all.push(x));
        let (a, b) = xs.split_at(73);
        let mut ma = Moments::new();
        a.iter().for_each(|&x| ma.push(x));
        let mut mb = Moments::new();
        b.iter().for_each(|&x| mb.push(x));
        ma.merge(&mb);
        assert!((ma.mean() - all.mean()).abs() < 1e-12);
        assert!((ma.variance() - all.variance()).abs() < 1e-10);
        assert!((ma.skewness() - all.skewness()).abs() < 1e-10);
        assert!((ma.excess_kurtosis() - all.excess_kurtosis()).abs() < 1e-10);
    }

    #[test]
    fn symmetric_sample_has_zero_skew() {
        let mut m = Moments::new();
        for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
            m.push(x);
        }
        assert!(m.skewness().abs() < 1e-15);
        // Discrete uniform on five points: m4 n / m2^2 = 1.7.
        assert!((m.excess_kurtosis() + 1.3).abs() < 1e-12);
    }

    #[test]
    fn covariance_perfect_line() {
        let mut c = Covariance::new();
        for i in 0..10 {
            c.push(i as f64, -2.0 * i as f64 + 1.0);
        }
        assert!((c.correlation() + 1.0).abs() < 1e-12);
        assert_eq!(c.correlation_se(), 0.0);
        let mut a = Covariance::new();
        let mut b = Covariance::new();
        for i in 0..5 {
            a.push(i as f64, (i * i) as f64);
        }
        for i in 5..10 {
            b.push(i as f64, (i * i) as f64);
        }
        let mut all = Covariance::new();
        for i in 0..10 {
            all.push(i as f64, (i * i) as f64);
        }
        a.merge(&b);
        assert!((a.covariance() - all.covariance()).abs() < 1e-10);
    }
}
