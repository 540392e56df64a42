use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::cell_seed;
use crate::band_model::BlockModel;
use crate::error::{Error, Result};
use crate::linalg::{basis, norm2};
use crate::rng::SeedSpec;
use crate::scalar::Real;
use crate::schur::{schur_chain, vector_action_on_chain, LogNormLedger};
use crate::split::split_chain_on;
use crate::stats::{quantile, variance};

/// `γ = L̂ + Σ_k η_k` with `η_k = log r_{N−2k} + log r_{N−2k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedDecomposition {
    /// inverse-norm terms, plus `log r_1` when `N` is even
    pub l_hat: f64,
    pub pair_terms: Vec<f64>,
    /// `γ` from the vector-action ledger
    pub total: f64,
    pub reconstruction: f64,
    /// `|reconstruction − total| / (1 + |total|)`
    pub residual: f64,
}

/// Pairs `(log r_{N−2k}, log r_{N−2k+1})` for `k = 1, 2, …` while `N − 2k ≥ 1`, given
/// `log_r[m − 1] = log r_m`. Returns the pairs and the unpaired `log r_1`, if any.
fn pair_up(log_r: &[f64]) -> (Vec<f64>, Option<f64>) {
    let n = log_r.len() + 1;
    let pairs = (1..).take_while(|k| n > 2 * k).map(|k| log_r[n - 2 * k - 1] + log_r[n - 2 * k]).collect();
    let leftover = (n.is_multiple_of(2) && n >= 2).then(|| log_r[0]);
    (pairs, leftover)
}

/// Pair terms read off the coupling terms of a ledger.
pub fn pair_terms_from_ledger<T>(ledger: &LogNormLedger<T>) -> Vec<f64> {
    pair_up(&ledger.coupling_terms).0
}

/// Decomposition built from chained split records and checked against the ledger.
pub fn paired_site_decomposition<T: Real>(model: &BlockModel<T>, f: &[T]) -> Result<PairedDecomposition> {
    let chain = schur_chain(model);
    let ledger = vector_action_on_chain(&chain, model.t(), f)?;
    let records = split_chain_on(&chain, model.t(), f)?;
    let n = model.n();
    if records.len() + 1 != n {
        return Err(Error::ChainMismatch(format!("{} records for {n} sites", records.len())));
    }
    // the two paths round differently; a wrong wiring shows up as an O(1) deviation
    let tol = T::epsilon().sqrt().as_f64();
    for rec in &records {
        let dir = &ledger.directions[rec.site];
        let dev = rec.g.iter().zip(dir).map(|(&a, &b)| (a - b).abs().as_f64()).fold(0.0, f64::max);
        if dev > tol {
            return Err(Error::ChainMismatch(format!("record at site {} was fed a direction off the vector action by {dev:.2e}", rec.site)));
        }
    }
    let log_r: Vec<f64> = (1..n).map(|m| records[n - 1 - m].r.as_f64().ln()).collect();
    let (pair_terms, leftover) = pair_up(&log_r);

    let g1 = records.last().map_or_else(|| f.to_vec(), |r| r.relay.clone());
    let first = norm2(&chain.u_inv[0].mul_vec(&g1)).as_f64().ln();
    let inverse: f64 = records.iter().map(|r| r.inv_norm.as_f64().ln()).sum::<f64>() + first;
    let l_hat = inverse + leftover.unwrap_or(0.0);
    let reconstruction = l_hat + pair_terms.iter().sum::<f64>();
    Ok(PairedDecomposition {
        l_hat,
        pair_terms,
        total: ledger.total,
        reconstruction,
        residual: (reconstruction - ledger.total).abs() / (1.0 + ledger.total.abs()),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTermReport {
    pub w: usize,
    pub n: usize,
    pub trials: usize,
    pub valid: usize,
    /// sample variance of `η_k`, indexed by `k − 1`
    pub pair_variance: Vec<f64>,
    pub min_pair_variance: f64,
    /// `W · min_k Var[η_k]`
    pub min_variance_times_w: f64,
    /// 99.9% quantile of `|η_k|` pooled over `k` and trials
    pub q999_abs: f64,
    /// largest reconstruction residual; zero when the ledger path was used
    pub max_residual: f64,
}

/// Pair-term statistics over independent trials with `f = e₁`.
///
/// With `via_split` the terms come from [`paired_site_decomposition`] and every trial is
/// checked for closure; otherwise they are read off the ledger, which is much cheaper.
pub fn pair_term_experiment(w: usize, n: usize, trials: usize, e: f64, seed: u64, via_split: bool) -> Result<PairTermReport> {
    if n < 3 {
        return Err(Error::InvalidArgument("pair terms need N >= 3".into()));
    }
    let cs = cell_seed(seed, w, n, e);
    let per_trial: Vec<Option<(Vec<f64>, f64)>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let model = BlockModel::<f64>::sample(w, n, e, SeedSpec::new(cs, i, 0))?;
            let f = basis(w, 0);
            let out = if via_split {
                match paired_site_decomposition(&model, &f) {
                    Ok(d) => Some((d.pair_terms, d.residual)),
                    Err(Error::SingularSite { .. }) | Err(Error::DegenerateSplit { .. }) => None,
                    Err(err) => return Err(err),
                }
            } else {
                let chain = schur_chain(&model);
                chain
                    .is_complete()
                    .then(|| vector_action_on_chain(&chain, model.t(), &f))
                    .transpose()?
                    .map(|l| (pair_terms_from_ledger(&l), 0.0))
            };
            Ok(out.filter(|(p, _)| p.iter().all(|v| v.is_finite())))
        })
        .collect::<Result<_>>()?;
    let valid: Vec<&(Vec<f64>, f64)> = per_trial.iter().flatten().collect();
    let pairs = (n - 1) / 2;
    let pair_variance: Vec<f64> = (0..pairs).map(|k| variance(&valid.iter().map(|(p, _)| p[k]).collect::<Vec<_>>())).collect();
    let min_pair_variance = pair_variance.iter().copied().fold(f64::INFINITY, f64::min);
    let pooled: Vec<f64> = valid.iter().flat_map(|(p, _)| p.iter().map(|v| v.abs())).collect();
    Ok(PairTermReport {
        w,
        n,
        trials,
        valid: valid.len(),
        min_variance_times_w: min_pair_variance * w as f64,
        pair_variance,
        min_pair_variance,
        q999_abs: quantile(&pooled, 0.999),
        max_residual: valid.iter().map(|(_, r)| *r).fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_pattern() {
        // N = 6: pairs (r4, r5), (r2, r3); r1 left over
        let log_r = [1.0, 2.0, 4.0, 8.0, 16.0];
        let (p, left) = pair_up(&log_r);
        assert_eq!(p, vec![24.0, 6.0]);
        assert_eq!(left, Some(1.0));
        // N = 5: pairs (r3, r4), (r1, r2)
        let (p, left) = pair_up(&[1.0, 2.0, 4.0, 8.0]);
        assert_eq!(p, vec![12.0, 3.0]);
        assert_eq!(left, None);
    }

    #[test]
    fn decomposition_closes() {
        for (w, n) in [(1, 5), (3, 6), (4, 9), (2, 2), (2, 1)] {
            let m = BlockModel::<f64>::sample(w, n, 0.0, SeedSpec::new(2, n as u64, 0)).unwrap();
            let d = paired_site_decomposition(&m, &basis(w, 0)).unwrap();
            assert!(d.residual < 1e-12, "W={w} N={n}: {}", d.residual);
        }
    }

    #[test]
    fn ledger_and_split_pairs_agree() {
        let m = BlockModel::<f64>::sample(3, 7, 0.0, SeedSpec::new(8, 0, 0)).unwrap();
        let f = basis(3, 0);
        let d = paired_site_decomposition(&m, &f).unwrap();
        let l = crate::schur::vector_action_log_norm(&m, &f).unwrap();
        for (a, b) in d.pair_terms.iter().zip(pair_terms_from_ledger(&l)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
