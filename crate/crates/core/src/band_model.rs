//! One realization of the block-tridiagonal operator and its dense inversion oracle.

use serde::{Deserialize, Serialize};

use crate::ensembles::{goe_from_rng, gaussian_from_rng};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix, SymmetricMatrix};
use crate::rng::{SeedSpec, StreamKind};
use crate::scalar::Real;

/// Largest `N·W` the dense oracle accepts unless overridden.
pub const DENSE_GUARD: usize = 2000;

/// `H` with diagonal blocks `V_1..V_N`, couplings `T_1..T_{N−1}` and spectral parameter `E`.
///
/// Blocks are stored 0-based: `v[k]` is `V_{k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct BlockModel<T> {
    w: usize,
    n: usize,
    e: T,
    v: Vec<SymmetricMatrix<T>>,
    t: Vec<Matrix<T>>,
    seed: Option<SeedSpec>,
}

impl<T: Real> BlockModel<T> {
    pub fn new(e: T, v: Vec<SymmetricMatrix<T>>, t: Vec<Matrix<T>>) -> Result<Self> {
        let model = Self { w: v.first().map_or(0, |b| b.dim()), n: v.len(), e, v, t, seed: None };
        model.validate()?;
        Ok(model)
    }

    /// Samples every block from its own stream of `seed` (`V_k` from `VBlock, k`, `T_k` from `TBlock, k`).
    pub fn sample(w: usize, n: usize, e: T, seed: SeedSpec) -> Result<Self> {
        if w == 0 || n == 0 {
            return Err(Error::InvalidDimension(format!("need W >= 1 and N >= 1, got W={w}, N={n}")));
        }
        let v = (0..n)
            .map(|k| goe_from_rng(w, &mut seed.with_stream(StreamKind::VBlock, k as u64).rng()))
            .collect();
        let t = (0..n - 1)
            .map(|k| gaussian_from_rng(w, &mut seed.with_stream(StreamKind::TBlock, k as u64).rng()))
            .collect();
        Ok(Self { w, n, e, v, t, seed: Some(seed) })
    }

    fn validate(&self) -> Result<()> {
        if self.w == 0 || self.n == 0 {
            return Err(Error::InvalidDimension("a model needs at least one nonempty block".into()));
        }
        if self.t.len() + 1 != self.n {
            return Err(Error::InvalidDimension(format!("{} diagonal blocks need {} couplings, got {}", self.n, self.n - 1, self.t.len())));
        }
        if self.v.iter().any(|b| b.dim() != self.w) || self.t.iter().any(|b| b.rows() != self.w || b.cols() != self.w) {
            return Err(Error::InvalidDimension(format!("all blocks must be {0}x{0}", self.w)));
        }
        if self.v.iter().any(|b| b.asymmetry() != T::zero()) {
            return Err(Error::InvalidArgument("diagonal blocks must be exactly symmetric".into()));
        }
        if !self.e.is_finite() || self.v.iter().any(|b| !b.is_finite()) || self.t.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("non-finite model entry".into()));
        }
        Ok(())
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn e(&self) -> T {
        self.e
    }

    pub fn v(&self) -> &[SymmetricMatrix<T>] {
        &self.v
    }

    pub fn t(&self) -> &[Matrix<T>] {
        &self.t
    }

    pub fn seed(&self) -> Option<SeedSpec> {
        self.seed
    }

    pub fn with_energy(mut self, e: T) -> Self {
        self.e = e;
        self
    }

    /// Replaces `T_k` (0-based); used by tests and fault injection.
    pub fn set_coupling(&mut self, k: usize, t: Matrix<T>) -> Result<()> {
        if t.rows() != self.w || t.cols() != self.w || k >= self.t.len() {
            return Err(Error::InvalidDimension(format!("coupling {k} does not fit the model")));
        }
        self.t[k] = t;
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> BlockModel<U> {
        BlockModel {
            w: self.w,
            n: self.n,
            e: U::lit(self.e.as_f64()),
            v: self.v.iter().map(|b| b.cast()).collect(),
            t: self.t.iter().map(|b| b.cast()).collect(),
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("model json: {e}")))?;
        m.validate()?;
        Ok(m)
    }
}

/// The `(1, N)` block of `(H − E)⁻¹`, stored as `exp(log_scale) · matrix`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeBlock<T> {
    pub matrix: Matrix<T>,
    pub log_scale: f64,
    pub valid: bool,
    /// largest condition estimate met while computing the block
    pub cond_estimate: f64,
    /// 1-based site of the first singular factor, if any
    pub singular_site: Option<usize>,
}

impl<T: Real> EdgeBlock<T> {
    fn invalid(w: usize, cond: f64, site: Option<usize>) -> Self {
        Self { matrix: Matrix::zeros(w, w), log_scale: 0.0, valid: false, cond_estimate: cond, singular_site: site }
    }

    /// The block with its scale folded back in; may under/overflow for long chains.
    pub fn to_matrix(&self) -> Matrix<f64> {
        self.matrix.cast::<f64>().scale(self.log_scale.exp())
    }

    /// `‖self − other‖_F / ‖other‖_F` computed in a common scale.
    pub fn relative_error(&self, other: &Self) -> f64 {
        let shift = other.log_scale;
        let a = self.matrix.cast::<f64>().scale((self.log_scale - shift).exp());
        let b = other.matrix.cast::<f64>();
        a.sub(&b).frobenius_norm() / b.frobenius_norm()
    }
}

pub fn assemble_dense<T: Real>(model: &BlockModel<T>) -> Matrix<T> {
    let (w, n) = (model.w, model.n);
    let mut h = Matrix::zeros(n * w, n * w);
    for (k, v) in model.v.iter().enumerate() {
        h.set_block(k * w, k * w, v);
    }
    for (k, t) in model.t.iter().enumerate() {
        h.set_block(k * w, (k + 1) * w, t);
        h.set_block((k + 1) * w, k * w, &t.transpose());
    }
    h
}

/// Dense oracle for `G(1;N)` with the default size guard.
pub fn green_edge_block_dense<T: Real>(model: &BlockModel<T>) -> Result<EdgeBlock<T>> {
    green_edge_block_dense_guarded(model, DENSE_GUARD)
}

/// Dense oracle with an explicit guard on `N·W`.
pub fn green_edge_block_dense_guarded<T: Real>(model: &BlockModel<T>, guard: usize) -> Result<EdgeBlock<T>> {
    let (w, n) = (model.w, model.n);
    let dim = n * w;
    if dim > guard {
        return Err(Error::TooLarge { dim, guard });
    }
    let h = assemble_dense(model).shift_diagonal(model.e);
    let lu = match Lu::factor(&h) {
        Ok(lu) => lu,
        Err(_) => return Ok(EdgeBlock::invalid(w, f64::INFINITY, None)),
    };
    let cond = lu.condition_estimate().as_f64();
    let mut g = Matrix::zeros(w, w);
    for j in 0..w {
        let mut rhs = vec![T::zero(); dim];
        rhs[(n - 1) * w + j] = T::one();
        let col = lu.solve(&rhs);
        for i in 0..w {
            g[(i, j)] = col[i];
        }
    }
    let valid = cond.is_finite() && cond <= T::COND_CAP && g.is_finite();
    Ok(EdgeBlock { matrix: g, log_scale: 0.0, valid, cond_estimate: cond, singular_site: None })
}
