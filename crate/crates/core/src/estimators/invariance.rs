use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::sample_goe;
use crate::error::{Error, Result};
use crate::ks::{bonferroni, ks_two_sample, KsResult};
use crate::linalg::{norm2, symmetric_eigen, Householder, Matrix};
use crate::rng::{stream_tag, SeedSpec, StreamKind};

/// Product of `W` reflectors `I − 2vvᵗ/‖v‖²` with Gaussian `v`.
pub fn random_orthogonal(w: usize, seed: SeedSpec) -> Matrix<f64> {
    let mut rng = seed.rng();
    let mut q = Matrix::identity(w);
    for _ in 0..w {
        let v: Vec<f64> = (0..w).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nv = norm2(&v);
        let h = Householder { v, tau: 2.0 / (nv * nv) };
        q = h.to_matrix().matmul(&q);
    }
    q
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceTest {
    pub statistic: String,
    pub ks: KsResult,
    /// Bonferroni-corrected over all statistics
    pub p_corrected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub w: usize,
    pub trials: usize,
    pub q_orthogonality_defect: f64,
    pub tests: Vec<InvarianceTest>,
}

impl InvarianceReport {
    pub fn test(&self, statistic: &str) -> Option<&InvarianceTest> {
        self.tests.iter().find(|t| t.statistic == statistic)
    }

    pub fn all_pass(&self, alpha: f64) -> bool {
        self.tests.iter().all(|t| t.p_corrected > alpha)
    }
}

const STATISTICS: [&str; 4] = ["trace", "trace_sq", "lambda_max", "v12"];

fn statistics(v: &Matrix<f64>) -> [f64; 4] {
    let tr2: f64 = v.as_slice().iter().map(|x| x * x).sum();
    let lmax = symmetric_eigen(v).values[0];
    let v12 = if v.rows() > 1 { v[(0, 1)] } else { v[(0, 0)] };
    [v.trace(), tr2, lmax, v12]
}

/// Distributions of `V` and `QVQᵗ` over the same GOE draws, for a fixed `Q`.
pub fn orthogonal_invariance_check_with(q: &Matrix<f64>, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let w = q.rows();
    if trials < 2 || w == 0 {
        return Err(Error::InvalidArgument("need W >= 1 and at least two trials".into()));
    }
    let pairs: Vec<([f64; 4], [f64; 4])> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let v = sample_goe::<f64>(w, SeedSpec::new(seed, i, stream_tag(StreamKind::VBlock, 0)))?;
            let rotated = q.matmul(&v.matmul(&q.transpose()));
            Ok((statistics(&v), statistics(&rotated)))
        })
        .collect::<Result<_>>()?;
    let tests = STATISTICS
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let a: Vec<f64> = pairs.iter().map(|p| p.0[j]).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1[j]).collect();
            let ks = ks_two_sample(&a, &b);
            InvarianceTest { statistic: name.to_string(), p_corrected: bonferroni(ks.p_value, STATISTICS.len()), ks }
        })
        .collect();
    Ok(InvarianceReport { w, trials, q_orthogonality_defect: q.orthogonality_defect(), tests })
}

/// Invariance of the GOE law under `V → QVQᵗ` with `Q` sampled once from Householder products.
pub fn orthogonal_invariance_check(w: usize, trials: usize, seed: u64) -> Result<InvarianceReport> {
    let q = random_orthogonal(w, SeedSpec::new(seed, 0, stream_tag(StreamKind::Auxiliary, 3)));
    orthogonal_invariance_check_with(&q, trials, seed)
}
