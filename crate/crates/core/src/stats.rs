//! Sample statistics, jackknife errors, weighted least squares and binomial intervals.

use serde::{Deserialize, Serialize};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two samples.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_error_of_mean(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Jackknife standard error of the unbiased sample variance.
pub fn jackknife_variance_se(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 3 {
        return f64::NAN;
    }
    let nf = n as f64;
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    // leave-one-out sums of squares in closed form
    let loo: Vec<f64> = xs.iter().map(|x| (ss - (x - m).powi(2) * nf / (nf - 1.0)) / (nf - 2.0)).collect();
    let lm = mean(&loo);
    ((nf - 1.0) / nf * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>()).sqrt()
}

/// Linear interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

pub fn quantile(xs: &[f64], p: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r_squared: f64,
    /// `χ² / (k − 2)` of the weighted residuals
    pub reduced_chi2: f64,
}

impl LinearFit {
    /// Slope standard error inflated by the residual scatter when it exceeds the quoted errors.
    pub fn slope_se_scaled(&self) -> f64 {
        self.slope_se * self.reduced_chi2.max(1.0).sqrt()
    }
}

/// Weighted least squares `y ≈ intercept + slope·x` with weights `w` (usually `1/se²`).
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LinearFit> {
    let k = x.len();
    if k < 2 || y.len() != k || w.len() != k || w.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - xm) * (c - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let syy: f64 = y.iter().zip(w).map(|(c, b)| b * (c - ym).powi(2)).sum();
    let chi2: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (c - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - chi2 / syy } else { 1.0 };
    Some(LinearFit {
        slope,
        intercept,
        slope_se: (1.0 / sxx).sqrt(),
        intercept_se: (1.0 / sw + xm * xm / sxx).sqrt(),
        r_squared,
        reduced_chi2: if k > 2 { chi2 / (k - 2) as f64 } else { f64::NAN },
    })
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub count: u64,
    pub total: u64,
    pub rate: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl Rate {
    pub fn new(count: u64, total: u64) -> Self {
        let (lo95, hi95) = wilson_interval(count, total, 1.959_963_984_540_054);
        Self { count, total, rate: if total == 0 { 0.0 } else { count as f64 / total as f64 }, lo95, hi95 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variance_of_small_sample() {
        assert_eq!(variance(&[1.0, 2.0, 3.0, 4.0]), 5.0 / 3.0);
        assert_eq!(variance(&[7.0]), 0.0);
    }

    #[test]
    fn jackknife_matches_brute_force() {
        let xs = [0.3, -1.2, 2.5, 0.7, 1.1, -0.4, 0.0];
        let n = xs.len();
        let loo: Vec<f64> = (0..n)
            .map(|i| {
                let v: Vec<f64> = xs.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &x)| x).collect();
                variance(&v)
            })
            .collect();
        let lm = mean(&loo);
        let brute = ((n as f64 - 1.0) / n as f64 * loo.iter().map(|v| (v - lm).powi(2)).sum::<f64>()).sqrt();
        assert!((jackknife_variance_se(&xs) - brute).abs() < 1e-14);
    }

    #[test]
    fn exact_line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 2.0 * v).collect();
        let fit = weighted_linear_fit(&x, &y, &[1.0, 2.0, 1.0, 3.0]).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-14 && (fit.intercept - 0.5).abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wilson_reference() {
        // 0 of 10: upper limit z²/(n + z²)
        let (lo, hi) = wilson_interval(0, 10, 1.96);
        assert_eq!(lo, 0.0);
        assert!((hi - 1.96f64.powi(2) / (10.0 + 1.96f64.powi(2))).abs() < 1e-12);
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[3.0, 1.0, 2.0, 4.0], 0.5), 2.5);
    }
}
