//! Running moments and the empirical-Bernstein stopping rule.

/// Welford running mean and variance.
#[derive(Clone, Copy, Debug, Default)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (divides by n).
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m2 / self.n as f64
        }
    }

    pub fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
}

/// Sequential (eps, delta) relative-error estimation of the mean of a
/// non-negative variable with range `range`: stops once the empirical
/// Bernstein confidence interval is narrow relative to its midpoint.
#[derive(Clone, Debug)]
pub struct EbStop {
    eps: f64,
    delta: f64,
    range: f64,
    p: f64,
    lower: f64,
    upper: f64,
    stats: Running,
}

impl EbStop {
    pub fn new(eps: f64, delta: f64, range: f64) -> Self {
        EbStop { eps, delta, range, p: 1.1, lower: 0.0, upper: f64::INFINITY, stats: Running::default() }
    }

    /// Feeds one sample; returns the estimate once the rule stops.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        self.stats.push(x);
        let t = self.stats.count() as f64;
        if t < 2.0 {
            return None;
        }
        let c = self.delta * (self.p - 1.0) / self.p;
        let d_t = c / t.powf(self.p);
        let log_term = (3.0 / d_t).ln();
        let sd = self.stats.variance().sqrt();
        let half = sd * (2.0 * log_term / t).sqrt() + 3.0 * self.range * log_term / t;
        let mean = self.stats.mean().abs();
        self.lower = self.lower.max(mean - half);
        self.upper = self.upper.min(mean + half);
        if (1.0 + self.eps) * self.lower >= (1.0 - self.eps) * self.upper {
            Some(((1.0 + self.eps) * self.lower + (1.0 - self.eps) * self.upper) / 2.0)
        } else {
            None
        }
    }

    pub fn count(&self) -> u64 {
        self.stats.count()
    }

    pub fn standard_error(&self) -> f64 {
        let n = self.stats.count();
        if n < 2 {
            0.0
        } else {
            (self.stats.sample_variance() / n as f64).sqrt()
        }
    }
}
