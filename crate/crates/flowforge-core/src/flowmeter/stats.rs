//! Streaming min/max/mean/sample-std accumulator shared by every
//! statistical feature. Uses Welford's recurrence for the second moment;
//! all-zero results for empty series and zero std for singletons, by
//! convention, so downstream arithmetic never sees NaN.

/// Order-insensitive running statistics over an f64 series.
#[derive(Clone, Debug, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
    sum: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        if self.n == 1 {
            self.min = x;
            self.max = x;
            self.mean = x;
            self.m2 = 0.0;
            return;
        }
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> f64 {
        if self.n == 0 { 0.0 } else { self.sum }
    }

    pub fn min(&self) -> f64 {
        if self.n == 0 { 0.0 } else { self.min }
    }

    pub fn max(&self) -> f64 {
        if self.n == 0 { 0.0 } else { self.max }
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 { 0.0 } else { self.mean }
    }

    /// Sample variance (n − 1 denominator); 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            // Guard against tiny negative residue from cancellation.
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// One-shot helper over a slice: (min, max, mean, std).
pub fn running_stats(values: &[f64]) -> (f64, f64, f64, f64) {
    let mut s = RunningStats::default();
    for &v in values {
        s.push(v);
    }
    (s.min(), s.max(), s.mean(), s.std())
}
