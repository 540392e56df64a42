use bandloc_core::ks::ks_uniform;
use bandloc_core::rng::SeedSpec;
use rand::Rng;
use rayon::prelude::*;

/// First draws across neighbouring trial indices are uniform, and so are the KS p-values over many master seeds.
#[test]
fn first_draws_across_trials_are_uniform() {
    let ps: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let u: Vec<f64> = (0..10_000u64).map(|i| SeedSpec::new(seed, i, 0).rng().random::<f64>()).collect();
            ks_uniform(&u).p_value
        })
        .collect();
    let ks = ks_uniform(&ps);
    assert!(ks.p_value > 0.01, "p-values over seeds: KS D = {}, p = {}", ks.statistic, ks.p_value);
}

#[test]
fn streams_of_one_trial_are_uncorrelated() {
    let n = 20_000u64;
    let (x, y): (Vec<f64>, Vec<f64>) = (0..n)
        .map(|i| {
            let s = SeedSpec::new(1, i, 0);
            (s.rng().random::<f64>() - 0.5, s.with_stream(bandloc_core::rng::StreamKind::TBlock, 0).rng().random::<f64>() - 0.5)
        })
        .unzip();
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n as f64;
    // Var of a product of independent centered uniforms is 1/144
    assert!(cov.abs() < 4.0 / (144.0 * n as f64).sqrt(), "covariance {cov}");
}
