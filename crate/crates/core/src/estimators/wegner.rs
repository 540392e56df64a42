use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{run_cell, CellSpec, TrialOptions};
use crate::band_model::BlockModel;
use crate::ensembles::sample_goe;
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, BunchKaufman, SymmetricMatrix};
use crate::rng::{derive_seed, stream_tag, SeedSpec, StreamKind};
use crate::stats::{mean, std_error_of_mean, weighted_linear_fit, Rate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerParams {
    pub w_list: Vec<usize>,
    pub n: usize,
    pub trials: usize,
    /// moment orders, each in `[0, 1/2)`
    pub t_list: Vec<f64>,
    pub k_list: Vec<f64>,
    pub e: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub w: usize,
    pub t: f64,
    /// `E‖G(1;N)‖ᵗ`
    pub moment: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentScaling {
    pub t: f64,
    /// slope of `log E‖G‖ᵗ` against `log W`
    pub log_log_slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceRow {
    pub w: usize,
    pub k: f64,
    /// frequency of `‖(V − E + A)⁻¹‖ > K·W`
    pub rate: Rate,
    /// `K` times the frequency
    pub c_k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceFit {
    pub w: usize,
    /// smallest `C` with `frequency ≤ C/K` at every `K` of the grid
    pub c: f64,
    /// least-squares `C` in `frequency ≈ C/K`
    pub c_ls: f64,
    /// `max C_K / min C_K` over the `K` with at least one exceedance
    pub spread: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub moments: Vec<MomentRow>,
    pub scaling: Vec<MomentScaling>,
    pub exceedances: Vec<ExceedanceRow>,
    pub fits: Vec<ExceedanceFit>,
    pub invalid_trials: usize,
}

/// Default fixed perturbation `A = −Tᵗ U⁻¹ T` taken from a sampled two-site chain.
pub fn default_perturbation(w: usize, e: f64, seed: u64) -> Result<SymmetricMatrix<f64>> {
    let m = BlockModel::<f64>::sample(w, 2, e, SeedSpec::new(derive_seed(seed, &[w as u64, 0xa]), 0, 0))?;
    let u = SymmetricMatrix::from_matrix(m.v()[0].as_matrix().shift_diagonal(e));
    let inv = BunchKaufman::factor(&u)?.inverse();
    let t = &m.t()[0];
    Ok(SymmetricMatrix::from_matrix(t.tr_matmul(&inv.matmul(t)).scale(-1.0)))
}

/// `‖(V − E + A)⁻¹‖` for independent GOE draws `V`, in trial order.
pub fn resolvent_norms(a: &SymmetricMatrix<f64>, e: f64, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let w = a.dim();
    (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let v = sample_goe::<f64>(w, SeedSpec::new(seed, i, stream_tag(StreamKind::Auxiliary, 1)))?;
            let h = v.add(a).shift_diagonal(e);
            let eig = symmetric_eigen(&h);
            let min = eig.values.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            Ok(1.0 / min)
        })
        .collect()
}

pub fn wegner_experiment(p: &WegnerParams) -> Result<WegnerReport> {
    if p.t_list.iter().any(|t| !(0.0..0.5).contains(t)) {
        return Err(Error::InvalidArgument("moment orders must lie in [0, 1/2)".into()));
    }
    if p.k_list.iter().any(|&k| k <= 0.0) || p.w_list.is_empty() || p.trials == 0 {
        return Err(Error::InvalidArgument("need positive K values, a W and a trial".into()));
    }
    let mut moments = Vec::new();
    let mut exceedances = Vec::new();
    let mut fits = Vec::new();
    let mut invalid_trials = 0;
    for &w in &p.w_list {
        let cell = CellSpec { w, n: p.n, e: p.e, trials: p.trials, master_seed: p.seed, options: TrialOptions::default() };
        let records = run_cell(&cell)?;
        let logs: Vec<f64> = records.iter().filter(|r| r.is_valid()).filter_map(|r| r.edge_norm_log).collect();
        invalid_trials += records.len() - logs.len();
        for &t in &p.t_list {
            let xs: Vec<f64> = logs.iter().map(|l| (t * l).exp()).collect();
            moments.push(MomentRow { w, t, moment: mean(&xs), se: std_error_of_mean(&xs) });
        }

        let a = default_perturbation(w, p.e, p.seed)?;
        let norms = resolvent_norms(&a, p.e, p.trials, derive_seed(p.seed, &[w as u64, 0xb]))?;
        let rows: Vec<ExceedanceRow> = p
            .k_list
            .iter()
            .map(|&k| {
                let count = norms.iter().filter(|&&x| x > k * w as f64).count() as u64;
                let rate = Rate::new(count, norms.len() as u64);
                ExceedanceRow { w, k, c_k: k * rate.rate, rate }
            })
            .collect();
        let num: f64 = rows.iter().map(|r| r.rate.rate / r.k).sum();
        let den: f64 = rows.iter().map(|r| 1.0 / (r.k * r.k)).sum();
        let nonzero: Vec<f64> = rows.iter().filter(|r| r.rate.count > 0).map(|r| r.c_k).collect();
        let spread = (!nonzero.is_empty())
            .then(|| nonzero.iter().copied().fold(f64::MIN, f64::max) / nonzero.iter().copied().fold(f64::MAX, f64::min));
        let envelope = rows.iter().map(|r| r.c_k).fold(0.0, f64::max);
        fits.push(ExceedanceFit { w, c: envelope, c_ls: num / den, spread });
        exceedances.extend(rows);
    }
    let scaling = p
        .t_list
        .iter()
        .map(|&t| {
            let rows: Vec<&MomentRow> = moments.iter().filter(|m| m.t == t).collect();
            let x: Vec<f64> = rows.iter().map(|m| (m.w as f64).ln()).collect();
            let y: Vec<f64> = rows.iter().map(|m| m.moment.ln()).collect();
            MomentScaling { t, log_log_slope: weighted_linear_fit(&x, &y, &vec![1.0; x.len()]).map(|f| f.slope) }
        })
        .collect();
    Ok(WegnerReport { moments, scaling, exceedances, fits, invalid_trials })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> WegnerParams {
        WegnerParams { w_list: vec![2, 4], n: 4, trials: 200, t_list: vec![0.0, 0.25], k_list: vec![2.0, 4.0], e: 0.0, seed: 1 }
    }

    #[test]
    fn zeroth_moment_is_one() {
        let r = wegner_experiment(&params()).unwrap();
        for m in r.moments.iter().filter(|m| m.t == 0.0) {
            assert_eq!(m.moment, 1.0);
            assert_eq!(m.se, 0.0);
        }
    }

    #[test]
    fn rejects_large_order() {
        let mut p = params();
        p.t_list = vec![0.5];
        assert!(wegner_experiment(&p).is_err());
    }

    #[test]
    fn perturbation_is_negative_semidefinite_when_u_positive() {
        let a = default_perturbation(3, -100.0, 4).unwrap();
        // U = V + 100 is positive definite, so −TᵗU⁻¹T ≤ 0
        assert!(symmetric_eigen(a.as_matrix()).values.iter().all(|&v| v <= 1e-12));
    }
}
