//! Summary statistics shared by the optimizers and the experiment harness.

use serde::{Deserialize, Serialize};

/// Count, mean, sample standard deviation (n−1 denominator) and maximum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self { count, mean: f64::NAN, std: f64::NAN, max: f64::NAN };
        }
        let (mean, std) = mean_std(values);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { count, mean, std, max }
    }
}

/// Mean and sample standard deviation; the deviation is 0 for one value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Normal-approximation 95% half-width `1.96 s / sqrt(N)`.
pub fn ci_halfwidth(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    1.96 * mean_std(values).1 / (values.len() as f64).sqrt()
}
