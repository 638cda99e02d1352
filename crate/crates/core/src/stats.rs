use serde::{Deserialize, Serialize};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            mean: value,
            se: 0.0,
            n: 0,
        }
    }

    /// Sample mean and `s / sqrt(n)` with the unbiased sample variance.
    /// Summation is sequential so the result does not depend on scheduling.
    pub fn from_samples(samples: &[f64]) -> Self {
        let mut acc = MeanAccumulator::default();
        for &x in samples {
            acc.push(x);
        }
        acc.estimate()
    }

    pub fn from_indicators(successes: u64, n: u64) -> Self {
        if n == 0 {
            return Self {
                mean: f64::NAN,
                se: f64::NAN,
                n,
            };
        }
        let mean = successes as f64 / n as f64;
        let se = if n > 1 {
            (mean * (1.0 - mean) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se, n }
    }

    /// `sqrt(se_a^2 + se_b^2)` for independent estimates.
    pub fn combined_se(&self, other: &Estimate) -> f64 {
        self.se.hypot(other.se)
    }

    /// `|mean - target| <= k * se` (exact equality required when `se == 0`).
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se + f64::EPSILON * target.abs().max(1.0)
    }
}

/// Running sum / sum of squares, shifted by the first sample for stability.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanAccumulator {
    n: u64,
    shift: f64,
    sum: f64,
    sum_sq: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.shift = x;
        }
        let y = x - self.shift;
        self.n += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn estimate(&self) -> Estimate {
        if self.n == 0 {
            return Estimate {
                mean: f64::NAN,
                se: f64::NAN,
                n: 0,
            };
        }
        let n = self.n as f64;
        let mean_shifted = self.sum / n;
        let se = if self.n > 1 {
            let var = ((self.sum_sq - n * mean_shifted * mean_shifted) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean: self.shift + mean_shifted,
            se,
            n: self.n,
        }
    }
}
