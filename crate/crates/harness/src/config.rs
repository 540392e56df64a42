//! Flat key-value experiment configuration.

use std::path::{Path, PathBuf};

use bandloc_core::estimators::FChoice;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "BANDLOC_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Variance,
    Decay,
    Wegner,
    Radial,
    SplitVerify,
    Invariance,
    Bernstein,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Variance => "variance",
            Self::Decay => "decay",
            Self::Wegner => "wegner",
            Self::Radial => "radial",
            Self::SplitVerify => "split-verify",
            Self::Invariance => "invariance",
            Self::Bernstein => "bernstein",
        }
    }

    /// Experiments built from independent `(W, N)` trials, run in resumable chunks.
    pub fn is_trial_sweep(self) -> bool {
        matches!(self, Self::Variance | Self::Decay)
    }
}

fn default_output_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub w: Vec<usize>,
    pub n: Vec<usize>,
    #[serde(default)]
    pub e: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// support radius `A`
    #[serde(default = "defaults::support_a")]
    pub support_a: f64,
    /// dichotomy threshold `𝖠`
    #[serde(default = "defaults::one")]
    pub dichotomy_a: f64,
    /// `𝖢` in the dichotomy sign condition
    #[serde(default = "defaults::one")]
    pub cfrak: f64,
    /// Schur factors with `‖U‖₁‖U⁻¹‖₁` above this are flagged ill-conditioned
    #[serde(default = "defaults::cond_cap")]
    pub cond_cap: f64,
    /// sites with `‖U⁻¹‖ > K·W` are counted as Wegner exceedances
    #[serde(default = "defaults::wegner_k")]
    pub wegner_k: f64,
    #[serde(default)]
    pub f_choice: FChoice,
    #[serde(default)]
    pub log_r_thin: usize,
    /// moment orders for the Wegner experiment
    #[serde(default = "defaults::t_list")]
    pub t_list: Vec<f64>,
    /// `K` values for the Wegner exceedance sweep
    #[serde(default = "defaults::k_list")]
    pub k_list: Vec<f64>,
    /// independent Rademacher summands in the Bernstein check
    #[serde(default = "defaults::copies")]
    pub bernstein_copies: usize,
    #[serde(default = "defaults::bernstein_c")]
    pub bernstein_c: f64,
    /// split records analysed per trial in the radial experiment, from the right edge
    #[serde(default = "defaults::radial_sites")]
    pub radial_sites: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// 0 uses every core
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub resume: bool,
    #[serde(default = "defaults::chunk_size")]
    pub chunk_size: usize,
}

mod defaults {
    pub fn support_a() -> f64 {
        4.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn cond_cap() -> f64 {
        1e12
    }
    pub fn wegner_k() -> f64 {
        10.0
    }
    pub fn t_list() -> Vec<f64> {
        vec![0.1, 0.25, 0.4]
    }
    pub fn k_list() -> Vec<f64> {
        vec![2.0, 4.0, 8.0, 16.0]
    }
    pub fn copies() -> usize {
        64
    }
    pub fn bernstein_c() -> f64 {
        0.05
    }
    pub fn radial_sites() -> usize {
        4
    }
    pub fn chunk_size() -> usize {
        256
    }
}

impl ExperimentConfig {
    /// A configuration with every optional key at its default.
    pub fn new(experiment: Experiment, w: Vec<usize>, n: Vec<usize>, trials: usize) -> Self {
        Self {
            experiment,
            w,
            n,
            e: 0.0,
            trials,
            seed: 0,
            support_a: defaults::support_a(),
            dichotomy_a: 1.0,
            cfrak: 1.0,
            cond_cap: defaults::cond_cap(),
            wegner_k: defaults::wegner_k(),
            f_choice: FChoice::E1,
            log_r_thin: 0,
            t_list: defaults::t_list(),
            k_list: defaults::k_list(),
            bernstein_copies: defaults::copies(),
            bernstein_c: defaults::bernstein_c(),
            radial_sites: defaults::radial_sites(),
            output_dir: default_output_dir(),
            workers: 0,
            resume: false,
            chunk_size: defaults::chunk_size(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.w.is_empty() || self.n.is_empty() {
            return fail("W and N lists must be non-empty".into());
        }
        if self.w.contains(&0) || self.n.contains(&0) {
            return fail("W and N values must be at least 1".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if !self.e.is_finite() {
            return fail("E must be finite".into());
        }
        for (name, v) in [("support_a", self.support_a), ("dichotomy_a", self.dichotomy_a), ("cfrak", self.cfrak), ("cond_cap", self.cond_cap), ("wegner_k", self.wegner_k)] {
            if !(v.is_finite() && v > 0.0) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if self.chunk_size == 0 {
            return fail("chunk_size must be at least 1".into());
        }
        match self.experiment {
            Experiment::Wegner => {
                if self.t_list.is_empty() || self.t_list.iter().any(|t| !(0.0..0.5).contains(t)) {
                    return fail("t_list must be non-empty with values in [0, 1/2)".into());
                }
                if self.k_list.is_empty() || self.k_list.iter().any(|&k| k.is_nan() || k <= 0.0) {
                    return fail("k_list must be non-empty with positive values".into());
                }
            }
            Experiment::Bernstein => {
                if !(self.bernstein_c > 0.0 && self.bernstein_c <= 0.05) {
                    return fail(format!("bernstein_c must lie in (0, 0.05], got {}", self.bernstein_c));
                }
                if self.bernstein_copies == 0 {
                    return fail("bernstein_copies must be at least 1".into());
                }
                if self.t_list.iter().any(|t| t.abs() > self.bernstein_c) {
                    return fail("t_list must satisfy |t| <= bernstein_c for unit-bounded summands".into());
                }
            }
            Experiment::Radial | Experiment::SplitVerify => {
                if self.n.iter().any(|&n| n < 2) {
                    return fail("split records need N >= 2".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The configuration with everything that cannot change the results cleared.
    pub fn canonical(&self) -> Self {
        Self { output_dir: PathBuf::new(), workers: 0, resume: false, chunk_size: 0, ..self.clone() }
    }

    /// SHA-256 of the canonical configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(&self.canonical()).expect("configuration serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::new(Experiment::Decay, vec![4, 8], vec![16, 32], 100);
        c.e = 0.25;
        c.seed = 17;
        c.f_choice = FChoice::BasisAverage;
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let c = ExperimentConfig::from_toml("experiment = \"variance\"\nw = [2]\nn = [2]\ntrials = 1\n").unwrap();
        assert_eq!(c.k_list, vec![2.0, 4.0, 8.0, 16.0]);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ExperimentConfig::from_toml("experiment = \"variance\"\nw = [2]\nn = [2]\ntrials = 1\nbogus = 3\n").is_err());
    }

    #[test]
    fn validation_failures_are_config_errors() {
        let mut c = ExperimentConfig::new(Experiment::Variance, vec![], vec![2], 1);
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
        c.w = vec![2];
        c.trials = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_scheduling() {
        let a = ExperimentConfig::new(Experiment::Variance, vec![2], vec![4], 10);
        let b = ExperimentConfig { workers: 8, chunk_size: 3, output_dir: "/elsewhere".into(), resume: true, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig { seed: 1, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
    }
}
