//! Point estimates with standard errors, shared by the Monte Carlo oracle and
//! the protocol simulator.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Number of underlying samples (slots, draws or packets).
    pub n: u64,
}

impl SimEstimate {
    /// Proportion `k/n` with the binomial standard error.
    pub fn from_bernoulli(successes: u64, n: u64) -> Self {
        if n == 0 {
            return Self {
                mean: 0.0,
                stderr: 0.0,
                n,
            };
        }
        let p = successes as f64 / n as f64;
        Self {
            mean: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            n,
        }
    }

    /// Sample mean of independent observations with `s/√k`.
    pub fn from_samples(xs: &[f64], n: u64) -> Self {
        let k = xs.len();
        if k == 0 {
            return Self {
                mean: 0.0,
                stderr: 0.0,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / k as f64;
        let stderr = if k > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }

    /// Ratio estimator `Σy/Σx` over batches with its delta-method standard
    /// error. Used when the denominator is random, e.g. delay per departed packet.
    pub fn from_ratio(num: &[f64], den: &[f64], n: u64) -> Self {
        let k = num.len().min(den.len());
        let sy: f64 = num[..k].iter().sum();
        let sx: f64 = den[..k].iter().sum();
        if k == 0 || sx == 0.0 {
            return Self {
                mean: 0.0,
                stderr: 0.0,
                n,
            };
        }
        let r = sy / sx;
        let stderr = if k > 1 {
            let xbar = sx / k as f64;
            let var = num[..k]
                .iter()
                .zip(&den[..k])
                .map(|(y, x)| (y - r * x).powi(2))
                .sum::<f64>()
                / (k - 1) as f64;
            (var / k as f64).sqrt() / xbar
        } else {
            0.0
        };
        Self { mean: r, stderr, n }
    }

    /// `(mean − target)/stderr`; infinite when the estimate is exact but wrong.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.mean - target;
        if self.stderr > 0.0 {
            d / self.stderr
        } else if d == 0.0 {
            0.0
        } else {
            d.signum() * f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target).abs() <= sigmas
    }

    /// Two-sample z statistic for equal means.
    pub fn z_against(&self, other: &SimEstimate) -> f64 {
        let se = (self.stderr.powi(2) + other.stderr.powi(2)).sqrt();
        if se > 0.0 {
            (self.mean - other.mean) / se
        } else if self.mean == other.mean {
            0.0
        } else {
            f64::INFINITY
        }
    }
}
