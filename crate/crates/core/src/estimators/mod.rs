//! Monte Carlo experiments measuring the decay, the fluctuations and the supporting
//! probabilistic inputs of the edge Green function.

pub mod bernstein;
pub mod invariance;
pub mod paired;
pub mod sweep;
pub mod trial;
pub mod wegner;

pub use bernstein::{bernstein_mgf_check, BernsteinReport, BoundedVariable, VariablesSpec};
pub use invariance::{orthogonal_invariance_check, random_orthogonal, InvarianceReport};
pub use paired::{pair_term_experiment, pair_terms_from_ledger, paired_site_decomposition, PairTermReport, PairedDecomposition};
pub use sweep::{decay_experiment, summarize, variance_experiment, CellSummary, DecayFit, SweepSummary, VarianceFit};
pub use trial::{cell_seed, run_cell, run_trial, CellSpec, FChoice, TrialOptions, TrialRecord};
pub use wegner::{wegner_experiment, WegnerParams, WegnerReport};

/// Invalid-trial fraction above which a summary is marked unreliable.
pub const MAX_INVALID_FRACTION: f64 = 0.05;

/// Trial count below which a cell is marked as having insufficient trials.
pub const MIN_TRIALS: usize = 100;
