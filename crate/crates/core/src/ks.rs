//! Kolmogorov–Smirnov tests with the asymptotic Kolmogorov distribution.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    /// effective sample size used for the p-value
    pub n_eff: f64,
}

/// `P{K > λ}` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // the alternating series converges slowly here; the survival function is 1 to double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn p_value(d: f64, n_eff: f64) -> f64 {
    // Stephens' finite-sample adjustment of the asymptotic law
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample test of `samples` against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult { statistic: d, p_value: p_value(d, n), n_eff: n }
}

pub fn ks_uniform(u: &[f64]) -> KsResult {
    ks_one_sample(u, |x| x.clamp(0.0, 1.0))
}

/// Two-sample test; ties across samples are stepped over together.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    KsResult { statistic: d, p_value: p_value(d, n_eff), n_eff }
}

/// Critical value of the one-sample statistic at level `alpha` (asymptotic, Stephens-adjusted).
pub fn critical_value(n: usize, alpha: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = (n as f64).sqrt();
    0.5 * (lo + hi) / (s + 0.12 + 0.11 / s)
}

/// Bonferroni-corrected p-value for one of `m` simultaneous tests.
pub fn bonferroni(p: f64, m: usize) -> f64 {
    (p * m as f64).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_points() {
        // 1% and 5% points of the Kolmogorov distribution
        assert!((kolmogorov_sf(1.627_61) - 0.01).abs() < 1e-5);
        assert!((kolmogorov_sf(1.358_10) - 0.05).abs() < 1e-5);
    }

    #[test]
    fn identical_samples_have_zero_distance() {
        let a = [0.3, 1.2, -0.4, 2.0];
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn perfect_grid_against_uniform() {
        let n = 1000;
        let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let r = ks_uniform(&u);
        assert!((r.statistic - 0.5 / n as f64).abs() < 1e-15);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn shifted_sample_rejected() {
        let u: Vec<f64> = (0..2000).map(|i| ((i as f64 + 0.5) / 2000.0).powi(2)).collect();
        assert!(ks_uniform(&u).p_value < 1e-6);
    }

    #[test]
    fn critical_value_inverts_sf() {
        let c = critical_value(100_000, 0.01);
        assert!((c * (100_000f64).sqrt() - 1.6276).abs() < 2e-3);
    }
}
