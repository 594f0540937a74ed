//! Summary statistics with Monte Carlo standard errors. All reductions use
//! pairwise summation in a fixed order, so results do not depend on how the
//! inputs were produced.

use serde::{Deserialize, Serialize};

const PAIRWISE_BLOCK: usize = 64;

pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= PAIRWISE_BLOCK {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

pub fn mean(x: &[f64]) -> f64 {
    pairwise_sum(x) / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
    pub sd: f64,
    /// Delta-method standard error `sqrt((m4 - s⁴) / n) / (2 s)`.
    pub sd_se: f64,
}

/// Mean, variance and sd with standard errors; `None` for fewer than two values.
pub fn summarize(x: &[f64]) -> Option<Summary> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let m = mean(x);
    let dev2: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
    let dev4: Vec<f64> = dev2.iter().map(|d| d * d).collect();
    let var = pairwise_sum(&dev2) / (n - 1) as f64;
    let m4 = pairwise_sum(&dev4) / n as f64;
    let var_se = ((m4 - var * var).max(0.0) / n as f64).sqrt();
    let sd = var.sqrt();
    let sd_se = if sd > 0.0 { var_se / (2.0 * sd) } else { 0.0 };
    Some(Summary { n, mean: m, mean_se: (var / n as f64).sqrt(), var, var_se, sd, sd_se })
}

/// Pearson correlation; `None` when either side is constant or lengths differ.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxy: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = x.iter().map(|a| (a - mx) * (a - mx)).collect();
    let syy: Vec<f64> = y.iter().map(|b| (b - my) * (b - my)).collect();
    let (cxy, cxx, cyy) = (pairwise_sum(&sxy), pairwise_sum(&sxx), pairwise_sum(&syy));
    if cxx <= 0.0 || cyy <= 0.0 {
        return None;
    }
    Some(cxy / (cxx * cyy).sqrt())
}
