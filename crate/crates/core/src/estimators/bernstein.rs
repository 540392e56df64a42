use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_tag, SeedSpec, StreamKind};

/// Largest admissible `c` in `|t| ≤ c/H`.
pub const MAX_C: f64 = 0.05;

const CHUNK: usize = 1 << 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundedVariable {
    /// `±1` with equal probability
    Rademacher,
    /// uniform on `[−h, h]`
    Uniform { half_width: f64 },
    /// uniform over a finite list of values
    Empirical { values: Vec<f64> },
}

impl BoundedVariable {
    /// Empirical law of `values` re-centered to mean zero and clipped to `±clip`.
    pub fn empirical(values: &[f64], clip: f64) -> Result<Self> {
        if values.is_empty() || clip.is_nan() || clip <= 0.0 {
            return Err(Error::InvalidArgument("need values and a positive clip level".into()));
        }
        let m = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self::Empirical { values: values.iter().map(|v| (v - m).clamp(-clip, clip)).collect() })
    }

    fn mean(&self) -> f64 {
        match self {
            Self::Rademacher | Self::Uniform { .. } => 0.0,
            Self::Empirical { values } => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    pub fn sigma2(&self) -> f64 {
        match self {
            Self::Rademacher => 1.0,
            Self::Uniform { half_width: h } => h * h / 3.0,
            Self::Empirical { values } => {
                let m = self.mean();
                values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
            }
        }
    }

    /// Bound `H` on `|η − Eη|`.
    pub fn h(&self) -> f64 {
        match self {
            Self::Rademacher => 1.0,
            Self::Uniform { half_width } => *half_width,
            Self::Empirical { values } => {
                let m = self.mean();
                values.iter().map(|v| (v - m).abs()).fold(0.0, f64::max)
            }
        }
    }

    /// `E e^{tη}`, exactly.
    pub fn mgf(&self, t: f64) -> f64 {
        match self {
            Self::Rademacher => t.cosh(),
            Self::Uniform { half_width: h } => {
                let x = t * h;
                if x == 0.0 {
                    1.0
                } else {
                    x.sinh() / x
                }
            }
            Self::Empirical { values } => values.iter().map(|v| (t * v).exp()).sum::<f64>() / values.len() as f64,
        }
    }

    /// `|E(η − Eη)ⁿ|`, exactly.
    pub fn central_moment_abs(&self, n: i32) -> f64 {
        match self {
            Self::Rademacher => if n % 2 == 0 { 1.0 } else { 0.0 },
            Self::Uniform { half_width: h } => if n % 2 == 0 { h.powi(n) / (n + 1) as f64 } else { 0.0 },
            Self::Empirical { values } => {
                let m = self.mean();
                (values.iter().map(|v| (v - m).powi(n)).sum::<f64>() / values.len() as f64).abs()
            }
        }
    }

    /// `|E(η − Eη)ⁿ| ≤ n! σ² Hⁿ⁻²` for `n = 2..=max_n`.
    pub fn bernstein_condition(&self, max_n: i32) -> bool {
        let (s2, h) = (self.sigma2(), self.h());
        let mut fact = 1.0;
        (2..=max_n).all(|n| {
            fact *= n as f64;
            self.central_moment_abs(n) <= fact * s2 * h.powi(n - 2) * (1.0 + 1e-12)
        })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Uniform { half_width } => rng.random_range(-half_width..=*half_width),
            Self::Empirical { values } => values[rng.random_range(0..values.len())],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariablesSpec {
    /// independent summands of `L = Σ η_k`
    pub variables: Vec<BoundedVariable>,
    /// `|t| ≤ c / max H`, with `c ≤ 0.05`
    pub c: f64,
    /// Monte Carlo draws of `L`; 0 skips the sampled check
    pub mc_samples: usize,
}

impl VariablesSpec {
    pub fn copies(v: BoundedVariable, k: usize, c: f64, mc_samples: usize) -> Self {
        Self { variables: vec![v; k], c, mc_samples }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampledSides {
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// delta-method standard error of `margin`
    pub margin_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinRow {
    pub t: f64,
    /// `(E e^{tL})²`
    pub lhs: f64,
    /// `E e^{2tL} · Π (1 − t²σ_k²/4)`
    pub rhs: f64,
    pub margin: f64,
    pub sampled: Option<SampledSides>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BernsteinReport {
    pub h_max: f64,
    pub t_max: f64,
    pub bernstein_condition: bool,
    pub rows: Vec<BernsteinRow>,
}

impl BernsteinReport {
    /// Exact margins nonnegative up to rounding and sampled margins positive.
    pub fn holds(&self) -> bool {
        self.rows.iter().all(|r| r.margin >= -1e-14 * r.rhs && r.sampled.as_ref().is_none_or(|s| s.margin > 0.0 || r.t == 0.0))
    }
}

/// Per-chunk power sums of `X = e^{tL}` for every `t`: `[ΣX, ΣX², ΣX³, ΣX⁴]`.
fn chunk_sums(spec: &VariablesSpec, t_grid: &[f64], seed: u64, chunk: u64, len: usize) -> Vec<[f64; 4]> {
    let mut rng = SeedSpec::new(seed, chunk, stream_tag(StreamKind::Auxiliary, 7)).rng();
    let mut sums = vec![[0.0; 4]; t_grid.len()];
    for _ in 0..len {
        let l: f64 = spec.variables.iter().map(|v| v.sample(&mut rng)).sum();
        for (s, &t) in sums.iter_mut().zip(t_grid) {
            let x = (t * l).exp();
            let x2 = x * x;
            s[0] += x;
            s[1] += x2;
            s[2] += x2 * x;
            s[3] += x2 * x2;
        }
    }
    sums
}

pub fn bernstein_mgf_check(spec: &VariablesSpec, t_grid: &[f64], seed: u64) -> Result<BernsteinReport> {
    if spec.variables.is_empty() {
        return Err(Error::InvalidArgument("no variables".into()));
    }
    if !(spec.c > 0.0 && spec.c <= MAX_C) {
        return Err(Error::InvalidArgument(format!("c must lie in (0, {MAX_C}], got {}", spec.c)));
    }
    let h_max = spec.variables.iter().map(BoundedVariable::h).fold(0.0, f64::max);
    let t_max = spec.c / h_max;
    if let Some(t) = t_grid.iter().find(|t| t.abs() > t_max) {
        return Err(Error::InvalidArgument(format!("t = {t} outside the admissible range |t| <= {t_max}")));
    }
    let sigma2: Vec<f64> = spec.variables.iter().map(BoundedVariable::sigma2).collect();
    let damping = |t: f64| sigma2.iter().map(|s| (1.0 - t * t * s / 4.0).ln()).sum::<f64>();

    let sampled: Option<Vec<[f64; 4]>> = (spec.mc_samples > 0).then(|| {
        let chunks = spec.mc_samples.div_ceil(CHUNK);
        let parts: Vec<Vec<[f64; 4]>> = (0..chunks)
            .into_par_iter()
            .map(|c| chunk_sums(spec, t_grid, seed, c as u64, CHUNK.min(spec.mc_samples - c * CHUNK)))
            .collect();
        let mut total = vec![[0.0; 4]; t_grid.len()];
        for part in parts {
            for (acc, s) in total.iter_mut().zip(part) {
                for j in 0..4 {
                    acc[j] += s[j];
                }
            }
        }
        total
    });

    let rows = t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let log_lhs = 2.0 * spec.variables.iter().map(|v| v.mgf(t).ln()).sum::<f64>();
            let log_rhs = spec.variables.iter().map(|v| v.mgf(2.0 * t).ln()).sum::<f64>() + damping(t);
            let (lhs, rhs) = (log_lhs.exp(), log_rhs.exp());
            let sampled = sampled.as_ref().map(|s| {
                let n = spec.mc_samples as f64;
                let [m1, m2, m3, m4] = s[i].map(|v| v / n);
                let p = damping(t).exp();
                let (lhs, rhs) = (m1 * m1, m2 * p);
                // linearized margin z = pX² − 2 m₁ X
                let ez = p * m2 - 2.0 * m1 * m1;
                let ez2 = p * p * m4 - 4.0 * p * m1 * m3 + 4.0 * m1 * m1 * m2;
                SampledSides { lhs, rhs, margin: rhs - lhs, margin_se: ((ez2 - ez * ez).max(0.0) / n).sqrt() }
            });
            BernsteinRow { t, lhs, rhs, margin: rhs - lhs, sampled }
        })
        .collect();
    Ok(BernsteinReport {
        h_max,
        t_max,
        bernstein_condition: spec.variables.iter().all(|v| v.bernstein_condition(12)),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_t_is_equality() {
        let spec = VariablesSpec::copies(BoundedVariable::Uniform { half_width: 2.0 }, 3, 0.05, 1000);
        let r = bernstein_mgf_check(&spec, &[0.0], 1).unwrap();
        assert_eq!(r.rows[0].lhs, 1.0);
        assert_eq!(r.rows[0].rhs, 1.0);
        let s = r.rows[0].sampled.as_ref().unwrap();
        assert_eq!((s.lhs, s.rhs), (1.0, 1.0));
    }

    #[test]
    fn rademacher_closed_form() {
        let spec = VariablesSpec::copies(BoundedVariable::Rademacher, 1, 0.05, 0);
        let r = bernstein_mgf_check(&spec, &[0.05], 1).unwrap();
        let lhs = 0.05f64.cosh().powi(2);
        let rhs = 0.1f64.cosh() * (1.0 - 0.000_625);
        assert!((r.rows[0].lhs - lhs).abs() < 1e-15);
        assert!((r.rows[0].rhs - rhs).abs() < 1e-15);
        // cosh²x = (1 + cosh 2x)/2
        assert!(((1.0 + 0.1f64.cosh()) / 2.0 - lhs).abs() < 1e-15);
        assert!(r.rows[0].margin > 0.0 && r.holds());
    }

    #[test]
    fn out_of_range_t_rejected() {
        let spec = VariablesSpec::copies(BoundedVariable::Uniform { half_width: 2.0 }, 1, 0.05, 0);
        assert!(bernstein_mgf_check(&spec, &[0.03], 1).is_err());
        let wide = VariablesSpec { c: 0.1, ..spec };
        assert!(bernstein_mgf_check(&wide, &[0.0], 1).is_err());
    }

    #[test]
    fn condition_holds_for_synthetic_laws() {
        assert!(BoundedVariable::Rademacher.bernstein_condition(12));
        assert!(BoundedVariable::Uniform { half_width: 0.7 }.bernstein_condition(12));
        let e = BoundedVariable::empirical(&[0.1, -2.0, 0.4, 3.0, 0.2], 1.0).unwrap();
        assert!(e.h() <= 2.0);
    }

    #[test]
    fn sampled_sums_do_not_depend_on_threads() {
        let spec = VariablesSpec::copies(BoundedVariable::Rademacher, 4, 0.05, 3 * CHUNK + 17);
        let a = bernstein_mgf_check(&spec, &[0.01, 0.05], 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| bernstein_mgf_check(&spec, &[0.01, 0.05], 9).unwrap());
        assert_eq!(a, b);
    }
}
