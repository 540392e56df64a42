use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band_model::BlockModel;
use crate::error::Result;
use crate::linalg::{basis, operator_norm_power, PowerIteration};
use crate::rng::{derive_seed, SeedSpec};
use crate::schur::{edge_norm_log_on_chain, schur_chain, vector_action_on_chain, SchurChain};

/// Which unit vector `f` enters `γ = log‖G(1;N) f‖`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FChoice {
    #[default]
    E1,
    /// average of `log‖G(1;N) e_j‖` over `j = 1..W`
    BasisAverage,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOptions {
    pub f_choice: FChoice,
    /// keep every `k`-th `log r` value in the record; 0 keeps none
    pub log_r_thin: usize,
    /// sites with `‖U_n⁻¹‖ > K·W` are counted as exceedances
    pub wegner_k: f64,
    /// Schur factors with `‖U‖₁‖U⁻¹‖₁` above this count as ill-conditioned
    pub cond_cap: f64,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { f_choice: FChoice::E1, log_r_thin: 0, wegner_k: 10.0, cond_cap: 1e12 }
    }
}

/// One `(W, N, E)` grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub w: usize,
    pub n: usize,
    pub e: f64,
    pub trials: usize,
    pub master_seed: u64,
    pub options: TrialOptions,
}

/// Master seed of a cell; trial `i` of the cell draws its blocks from `SeedSpec::new(cell_seed, i, ·)`.
pub fn cell_seed(master_seed: u64, w: usize, n: usize, e: f64) -> u64 {
    derive_seed(master_seed, &[w as u64, n as u64, e.to_bits()])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub master_seed: u64,
    pub cell_seed: u64,
    pub trial_index: u64,
    pub w: usize,
    pub n: usize,
    pub e: f64,
    /// `log‖G(1;N) f‖`; absent when the trial is invalid
    pub gamma: Option<f64>,
    /// `log‖G(1;N)‖` in the spectral norm
    pub edge_norm_log: Option<f64>,
    pub ill_conditioned_sites: usize,
    pub singular_site: Option<usize>,
    pub wegner_exceedances: usize,
    pub max_cond: f64,
    /// thinned `log r_n` values along the `f = e₁` action
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log_r: Vec<f64>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl TrialRecord {
    pub fn is_valid(&self) -> bool {
        self.gamma.is_some_and(f64::is_finite) && self.edge_norm_log.is_some_and(f64::is_finite)
    }
}

fn wegner_count(chain: &SchurChain<f64>, w: usize, k: f64) -> usize {
    chain.u_inv.iter().filter(|u| operator_norm_power(u.as_matrix(), PowerIteration::default()) > k * w as f64).count()
}

pub fn run_trial(cell: &CellSpec, trial_index: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let seed = cell_seed(cell.master_seed, cell.w, cell.n, cell.e);
    let model = BlockModel::<f64>::sample(cell.w, cell.n, cell.e, SeedSpec::new(seed, trial_index, 0))?;
    let chain = schur_chain(&model);
    let mut rec = TrialRecord {
        master_seed: cell.master_seed,
        cell_seed: seed,
        trial_index,
        w: cell.w,
        n: cell.n,
        e: cell.e,
        gamma: None,
        edge_norm_log: None,
        ill_conditioned_sites: chain.cond.iter().filter(|&&c| c > cell.options.cond_cap).count(),
        singular_site: chain.truncated_at,
        wegner_exceedances: wegner_count(&chain, cell.w, cell.options.wegner_k),
        max_cond: chain.max_cond(),
        log_r: Vec::new(),
        wall_time_s: 0.0,
    };
    if chain.is_complete() {
        let e1 = vector_action_on_chain(&chain, model.t(), &basis(cell.w, 0))?;
        rec.gamma = Some(match cell.options.f_choice {
            FChoice::E1 => e1.total,
            FChoice::BasisAverage => {
                let mut sum = e1.total;
                for j in 1..cell.w {
                    sum += vector_action_on_chain(&chain, model.t(), &basis(cell.w, j))?.total;
                }
                sum / cell.w as f64
            }
        })
        .filter(|g| g.is_finite());
        rec.edge_norm_log = Some(edge_norm_log_on_chain(&chain, model.t())?).filter(|g| g.is_finite());
        if cell.options.log_r_thin > 0 {
            rec.log_r = e1.coupling_terms.iter().step_by(cell.options.log_r_thin).copied().collect();
        }
    }
    rec.wall_time_s = start.elapsed().as_secs_f64();
    Ok(rec)
}

/// All trials of a cell, in trial-index order.
pub fn run_cell(cell: &CellSpec) -> Result<Vec<TrialRecord>> {
    (0..cell.trials as u64).into_par_iter().map(|i| run_trial(cell, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(w: usize, n: usize) -> CellSpec {
        CellSpec { w, n, e: 0.0, trials: 4, master_seed: 11, options: TrialOptions::default() }
    }

    #[test]
    fn single_site_gamma_is_resolvent_norm() {
        let c = cell(3, 1);
        let rec = run_trial(&c, 2).unwrap();
        let model = BlockModel::<f64>::sample(3, 1, 0.0, SeedSpec::new(rec.cell_seed, 2, 0)).unwrap();
        let inv = crate::linalg::Lu::factor(model.v()[0].as_matrix()).unwrap().solve(&basis(3, 0));
        assert!((rec.gamma.unwrap() - crate::linalg::norm2(&inv).ln()).abs() < 1e-12);
    }

    #[test]
    fn trial_is_reproducible() {
        let c = cell(4, 6);
        let a = run_trial(&c, 3).unwrap();
        let b = run_trial(&c, 3).unwrap();
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.edge_norm_log, b.edge_norm_log);
        assert_ne!(a.gamma, run_trial(&c, 4).unwrap().gamma);
    }

    #[test]
    fn gamma_bounded_by_edge_norm() {
        let c = cell(4, 8);
        for i in 0..4 {
            let r = run_trial(&c, i).unwrap();
            assert!(r.gamma.unwrap() <= r.edge_norm_log.unwrap() + 1e-10);
        }
    }

    #[test]
    fn thinned_log_r() {
        let mut c = cell(2, 9);
        c.options.log_r_thin = 3;
        assert_eq!(run_trial(&c, 0).unwrap().log_r.len(), 3);
    }
}
