use serde::{Deserialize, Serialize};

use super::trial::{run_cell, CellSpec, FChoice, TrialOptions, TrialRecord};
use super::{MAX_INVALID_FRACTION, MIN_TRIALS};
use crate::error::{Error, Result};
use crate::stats::{jackknife_variance_se, mean, quantile, std_error_of_mean, variance, weighted_linear_fit, LinearFit, Rate};

const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub w: usize,
    pub n: usize,
    pub e: f64,
    pub requested: usize,
    /// requested trials minus invalid trials
    pub count: usize,
    pub invalid: Rate,
    /// trials with at least one ill-conditioned Schur factor
    pub ill_conditioned: Rate,
    /// trials with at least one site where `‖U_n⁻¹‖ > K·W`
    pub wegner_exceedance: Rate,
    pub insufficient_trials: bool,
    pub mean_gamma: Option<f64>,
    pub mean_gamma_se: Option<f64>,
    pub var_gamma: f64,
    pub var_gamma_se: Option<f64>,
    pub mean_edge_norm_log: Option<f64>,
    pub edge_norm_log_se: Option<f64>,
    pub q99_edge_norm_log: Option<f64>,
}

/// Weighted fit of `Var[γ]` against `N` at one `W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceFit {
    pub w: usize,
    pub fit: Option<LinearFit>,
    /// fitted slope times `W`, the empirical constant of the `cN/W` floor
    pub slope_times_w: Option<f64>,
    pub strictly_increasing: bool,
}

/// Weighted fit of the mean of `log‖G(1;N)‖` against `N` at one `W`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub w: usize,
    pub fit: Option<LinearFit>,
    /// `μ̂ = −slope`
    pub rate: Option<f64>,
    pub rate_ci95: Option<(f64, f64)>,
    /// `μ̂·W·(log W)³`
    pub c_estimate: Option<f64>,
    pub strictly_decreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub cells: Vec<CellSummary>,
    pub variance_fits: Vec<VarianceFit>,
    pub decay_fits: Vec<DecayFit>,
    /// some cell has more than 5% invalid trials
    pub unreliable: bool,
    pub flags: Vec<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn summarize_cell(cell: &CellSpec, records: &[TrialRecord]) -> CellSummary {
    let valid: Vec<&TrialRecord> = records.iter().filter(|r| r.is_valid()).collect();
    let gamma: Vec<f64> = valid.iter().filter_map(|r| r.gamma).collect();
    let edge: Vec<f64> = valid.iter().filter_map(|r| r.edge_norm_log).collect();
    let total = records.len() as u64;
    let count_if = |p: &dyn Fn(&TrialRecord) -> bool| records.iter().filter(|r| p(r)).count() as u64;
    CellSummary {
        w: cell.w,
        n: cell.n,
        e: cell.e,
        requested: cell.trials,
        count: valid.len(),
        invalid: Rate::new(total - valid.len() as u64, total),
        ill_conditioned: Rate::new(count_if(&|r| r.ill_conditioned_sites > 0), total),
        wegner_exceedance: Rate::new(count_if(&|r| r.wegner_exceedances > 0), total),
        insufficient_trials: valid.len() < MIN_TRIALS,
        mean_gamma: (!gamma.is_empty()).then(|| mean(&gamma)),
        mean_gamma_se: finite(std_error_of_mean(&gamma)),
        var_gamma: variance(&gamma),
        var_gamma_se: finite(jackknife_variance_se(&gamma)),
        mean_edge_norm_log: (!edge.is_empty()).then(|| mean(&edge)),
        edge_norm_log_se: finite(std_error_of_mean(&edge)),
        q99_edge_norm_log: (!edge.is_empty()).then(|| quantile(&edge, 0.99)),
    }
}

/// Weights `1/se²` when every error is known and positive, equal weights otherwise.
fn weights(se: &[Option<f64>]) -> Vec<f64> {
    if se.iter().all(|s| s.is_some_and(|v| v > 0.0)) {
        se.iter().map(|s| 1.0 / s.unwrap().powi(2)).collect()
    } else {
        vec![1.0; se.len()]
    }
}

fn fits_for(w: usize, cells: &[&CellSummary]) -> (VarianceFit, DecayFit) {
    let x: Vec<f64> = cells.iter().map(|c| c.n as f64).collect();

    let vy: Vec<f64> = cells.iter().map(|c| c.var_gamma).collect();
    let vfit = weighted_linear_fit(&x, &vy, &weights(&cells.iter().map(|c| c.var_gamma_se).collect::<Vec<_>>()));
    let variance = VarianceFit {
        w,
        fit: vfit,
        slope_times_w: vfit.map(|f| f.slope * w as f64),
        strictly_increasing: cells.len() >= 2 && vy.windows(2).all(|p| p[1] > p[0]),
    };

    let means: Option<Vec<f64>> = cells.iter().map(|c| c.mean_edge_norm_log).collect();
    let dfit = means.as_ref().and_then(|m| {
        let se: Vec<Option<f64>> = cells.iter().map(|c| c.edge_norm_log_se).collect();
        weighted_linear_fit(&x, m, &weights(&se))
    });
    let lw = (w as f64).ln();
    let decay = DecayFit {
        w,
        fit: dfit,
        rate: dfit.map(|f| -f.slope),
        rate_ci95: dfit.map(|f| {
            let half = Z95 * f.slope_se_scaled();
            (-f.slope - half, -f.slope + half)
        }),
        c_estimate: dfit.map(|f| -f.slope * w as f64 * lw.powi(3)),
        strictly_decreasing: cells.len() >= 2 && means.is_some_and(|m| m.windows(2).all(|p| p[1] < p[0])),
    };
    (variance, decay)
}

/// Reduce per-cell trial records (each in trial-index order) to a summary.
pub fn summarize(cells: &[CellSpec], records: &[Vec<TrialRecord>]) -> SweepSummary {
    let summaries: Vec<CellSummary> = cells.iter().zip(records).map(|(c, r)| summarize_cell(c, r)).collect();
    let mut flags = Vec::new();
    let mut unreliable = false;
    for s in &summaries {
        if s.invalid.rate > MAX_INVALID_FRACTION {
            unreliable = true;
            flags.push(format!("unreliable: W={} N={} invalid fraction {:.4}", s.w, s.n, s.invalid.rate));
        }
        if s.insufficient_trials {
            flags.push(format!("insufficient trials: W={} N={} has {} valid trials", s.w, s.n, s.count));
        }
    }
    let mut ws: Vec<usize> = summaries.iter().map(|s| s.w).collect();
    ws.sort_unstable();
    ws.dedup();
    let mut variance_fits = Vec::new();
    let mut decay_fits = Vec::new();
    for w in ws {
        let mut group: Vec<&CellSummary> = summaries.iter().filter(|s| s.w == w).collect();
        group.sort_by_key(|s| s.n);
        if group.len() < 2 {
            continue;
        }
        let (v, d) = fits_for(w, &group);
        variance_fits.push(v);
        decay_fits.push(d);
    }
    SweepSummary { cells: summaries, variance_fits, decay_fits, unreliable, flags }
}

fn sweep(w: usize, n_list: &[usize], trials: usize, e: f64, options: TrialOptions, seed: u64) -> Result<SweepSummary> {
    if n_list.is_empty() || trials == 0 {
        return Err(Error::InvalidArgument("need at least one N and one trial".into()));
    }
    let cells: Vec<CellSpec> = n_list.iter().map(|&n| CellSpec { w, n, e, trials, master_seed: seed, options }).collect();
    let records = cells.iter().map(run_cell).collect::<Result<Vec<_>>>()?;
    Ok(summarize(&cells, &records))
}

/// Sample variance of `γ` per `N` and its linear fit in `N`.
pub fn variance_experiment(w: usize, n_list: &[usize], trials: usize, e: f64, f_choice: FChoice, seed: u64) -> Result<SweepSummary> {
    sweep(w, n_list, trials, e, TrialOptions { f_choice, ..TrialOptions::default() }, seed)
}

/// Mean of `log‖G(1;N)‖` per `N` and its fitted decay rate.
pub fn decay_experiment(w: usize, n_list: &[usize], trials: usize, e: f64, seed: u64) -> Result<SweepSummary> {
    sweep(w, n_list, trials, e, TrialOptions::default(), seed)
}
