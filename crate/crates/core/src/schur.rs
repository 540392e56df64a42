//! Schur-complement transfer recursion and log-scale evaluation of the edge block.
//!
//! `U_1 = V_1 − E`, `U_n = V_n − E − T_{n−1}ᵗ U_{n−1}⁻¹ T_{n−1}` and
//! `G(1;N) = (−1)^{N−1} U_1⁻¹ T_1 U_2⁻¹ ⋯ T_{N−1} U_N⁻¹`.

use serde::{Deserialize, Serialize};

use crate::band_model::{BlockModel, EdgeBlock};
use crate::error::{Error, Result};
use crate::linalg::{norm2, operator_norm_exact, BunchKaufman, Matrix, QrFactors, SymmetricMatrix};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SchurChain<T> {
    /// `u[k]` is `U_{k+1}`; shorter than `N` when the chain was truncated
    pub u: Vec<SymmetricMatrix<T>>,
    pub u_inv: Vec<SymmetricMatrix<T>>,
    /// `‖U‖₁ ‖U⁻¹‖₁` per site
    pub cond: Vec<f64>,
    pub n: usize,
    /// 1-based site whose factor was singular
    pub truncated_at: Option<usize>,
}

impl<T: Real> SchurChain<T> {
    pub fn is_complete(&self) -> bool {
        self.truncated_at.is_none() && self.u_inv.len() == self.n
    }

    pub fn ill_conditioned(&self, site: usize) -> bool {
        self.cond[site] > T::COND_CAP
    }

    pub fn ill_conditioned_count(&self) -> usize {
        (0..self.cond.len()).filter(|&k| self.ill_conditioned(k)).count()
    }

    pub fn max_cond(&self) -> f64 {
        self.cond.iter().copied().fold(0.0, f64::max)
    }

    fn require_complete(&self) -> Result<()> {
        match self.truncated_at {
            Some(site) => Err(Error::SingularSite { site }),
            None => Ok(()),
        }
    }
}

fn invert_site<T: Real>(u: &SymmetricMatrix<T>) -> Option<(SymmetricMatrix<T>, f64)> {
    let bk = BunchKaufman::factor(u).ok()?;
    let inv = bk.inverse();
    if !inv.is_finite() {
        return None;
    }
    let cond = u.norm1().as_f64() * inv.norm1().as_f64();
    Some((SymmetricMatrix::from_matrix(inv), cond))
}

pub fn schur_chain<T: Real>(model: &BlockModel<T>) -> SchurChain<T> {
    schur_chain_with(model, |_, _| {})
}

/// Schur recursion with a hook that may edit each `U_n` (1-based `n`) before it is inverted.
pub fn schur_chain_with<T: Real>(model: &BlockModel<T>, mut hook: impl FnMut(usize, &mut Matrix<T>)) -> SchurChain<T> {
    let n = model.n();
    let mut chain = SchurChain { u: Vec::with_capacity(n), u_inv: Vec::with_capacity(n), cond: Vec::with_capacity(n), n, truncated_at: None };
    let mut next = model.v()[0].shift_diagonal(model.e());
    for site in 1..=n {
        hook(site, &mut next);
        let u = SymmetricMatrix::from_matrix(next);
        let Some((inv, cond)) = invert_site(&u) else {
            chain.u.push(u);
            chain.truncated_at = Some(site);
            return chain;
        };
        if site < n {
            let t = &model.t()[site - 1];
            let correction = t.tr_matmul(&inv.matmul(t));
            next = model.v()[site].shift_diagonal(model.e()).sub(&correction);
        } else {
            next = Matrix::zeros(0, 0);
        }
        chain.u.push(u);
        chain.u_inv.push(inv);
        chain.cond.push(cond);
    }
    chain
}

/// Rescale `m` to unit max-abs entry, returning the log of the removed factor.
fn renormalize<T: Real>(m: &mut Matrix<T>) -> f64 {
    let s = m.max_abs();
    if s == T::zero() || !s.is_finite() {
        return if s == T::zero() { f64::NEG_INFINITY } else { f64::NAN };
    }
    m.scale_in_place(T::one() / s);
    s.as_f64().ln()
}

/// `(−1)^{N−1} U_1⁻¹ T_1 ⋯ T_{N−1} U_N⁻¹`, renormalized after every factor.
pub fn edge_block_product<T: Real>(chain: &SchurChain<T>, t: &[Matrix<T>]) -> EdgeBlock<T> {
    let w = chain.u.first().map_or(0, |u| u.dim());
    if let Some(site) = chain.truncated_at {
        return EdgeBlock { matrix: Matrix::zeros(w, w), log_scale: 0.0, valid: false, cond_estimate: f64::INFINITY, singular_site: Some(site) };
    }
    let n = chain.n;
    let mut p = chain.u_inv[0].as_matrix().clone();
    let mut log_scale = renormalize(&mut p);
    for k in 1..n {
        p = p.matmul(&t[k - 1]);
        log_scale += renormalize(&mut p);
        p = p.matmul(&chain.u_inv[k]);
        log_scale += renormalize(&mut p);
    }
    if n % 2 == 0 {
        p.scale_in_place(-T::one());
    }
    EdgeBlock {
        valid: chain.ill_conditioned_count() == 0 && p.is_finite(),
        matrix: p,
        log_scale,
        cond_estimate: chain.max_cond(),
        singular_site: None,
    }
}

/// Per-factor breakdown of `log‖G(1;N) f‖`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogNormLedger<T> {
    pub total: f64,
    /// `log‖U_n⁻¹ g_n‖`, indexed by 0-based site
    pub inverse_terms: Vec<f64>,
    /// `log r_n = log‖T_n ĝ_{n+1}‖`, indexed by 0-based coupling
    pub coupling_terms: Vec<f64>,
    /// unit vector `g_n` fed into `U_n⁻¹`, indexed by 0-based site
    pub directions: Vec<Vec<T>>,
    /// final unit vector, the direction of `G(1;N) f` up to the overall sign
    pub direction: Vec<T>,
    pub ill_conditioned_sites: usize,
}

impl<T: Real> LogNormLedger<T> {
    pub fn term_sum(&self) -> f64 {
        self.inverse_terms.iter().sum::<f64>() + self.coupling_terms.iter().sum::<f64>()
    }
}

fn unit_step<T: Real>(v: Vec<T>) -> (Vec<T>, f64) {
    let nv = norm2(&v);
    (v.into_iter().map(|x| x / nv).collect(), nv.as_f64().ln())
}

pub fn vector_action_log_norm<T: Real>(model: &BlockModel<T>, f: &[T]) -> Result<LogNormLedger<T>> {
    let chain = schur_chain(model);
    vector_action_on_chain(&chain, model.t(), f)
}

/// Right-to-left application of the factors of `G(1;N)` to `f`, renormalizing after each one.
pub fn vector_action_on_chain<T: Real>(chain: &SchurChain<T>, t: &[Matrix<T>], f: &[T]) -> Result<LogNormLedger<T>> {
    chain.require_complete()?;
    let n = chain.n;
    let w = chain.u[0].dim();
    if f.len() != w {
        return Err(Error::InvalidDimension(format!("vector has length {}, blocks are {w}x{w}", f.len())));
    }
    if (norm2(f).as_f64() - 1.0).abs() > 1e-12f64.max(10.0 * T::epsilon().as_f64()) {
        return Err(Error::InvalidArgument("vector must have unit norm".into()));
    }
    let mut inverse_terms = vec![0.0; n];
    let mut coupling_terms = vec![0.0; n - 1];
    let mut directions = vec![Vec::new(); n];
    let mut g = f.to_vec();
    for site in (0..n).rev() {
        directions[site] = g.clone();
        let (gh, l) = unit_step(chain.u_inv[site].mul_vec(&g));
        inverse_terms[site] = l;
        g = gh;
        if site > 0 {
            let (next, l) = unit_step(t[site - 1].mul_vec(&g));
            coupling_terms[site - 1] = l;
            g = next;
        }
    }
    let mut ledger = LogNormLedger { total: 0.0, inverse_terms, coupling_terms, directions, direction: g, ill_conditioned_sites: chain.ill_conditioned_count() };
    ledger.total = ledger.term_sum();
    Ok(ledger)
}

/// `log‖G(1;N)‖` in the spectral norm.
///
/// A `W`-frame is pushed through the factors right to left and re-orthonormalized
/// by QR at every step; the triangular factors are accumulated with their own
/// log-scale and the norm of the final product is taken exactly.
pub fn edge_norm_log<T: Real>(model: &BlockModel<T>) -> Result<f64> {
    let chain = schur_chain(model);
    edge_norm_log_on_chain(&chain, model.t())
}

pub fn edge_norm_log_on_chain<T: Real>(chain: &SchurChain<T>, t: &[Matrix<T>]) -> Result<f64> {
    chain.require_complete()?;
    let n = chain.n;
    let mut acc = FrameAccumulator { r: None, log_scale: 0.0 };
    let mut q = acc.absorb(chain.u_inv[n - 1].as_matrix().clone());
    for site in (0..n - 1).rev() {
        q = acc.absorb(t[site].matmul(&q));
        q = acc.absorb(chain.u_inv[site].matmul(&q));
    }
    let r = acc.r.expect("at least one factor");
    Ok(acc.log_scale + operator_norm_exact(&r).as_f64().ln())
}

struct FrameAccumulator<T> {
    r: Option<Matrix<T>>,
    log_scale: f64,
}

impl<T: Real> FrameAccumulator<T> {
    /// QR the new frame, fold its `R` into the running product, return the orthonormal part.
    fn absorb(&mut self, frame: Matrix<T>) -> Matrix<T> {
        let qr = QrFactors::factor(&frame);
        let mut r = match self.r.take() {
            Some(acc) => qr.r.matmul(&acc),
            None => qr.r,
        };
        self.log_scale += renormalize(&mut r);
        self.r = Some(r);
        qr.q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band_model::green_edge_block_dense;
    use crate::linalg::basis;
    use crate::SeedSpec;

    fn scalar_model() -> BlockModel<f64> {
        let v = vec![
            SymmetricMatrix::from_matrix(Matrix::from_rows(&[&[2.0]])),
            SymmetricMatrix::from_matrix(Matrix::from_rows(&[&[3.0]])),
        ];
        BlockModel::new(0.0, v, vec![Matrix::from_rows(&[&[1.0]])]).unwrap()
    }

    #[test]
    fn scalar_chain_values() {
        let chain = schur_chain(&scalar_model());
        assert_eq!(chain.u[0][(0, 0)], 2.0);
        assert_eq!(chain.u[1][(0, 0)], 2.5);
    }

    #[test]
    fn scalar_edge_block_and_ledger() {
        let m = scalar_model();
        let g = edge_block_product(&schur_chain(&m), m.t());
        assert!((g.to_matrix()[(0, 0)] + 0.2).abs() < 1e-15);
        let ledger = vector_action_log_norm(&m, &[1.0]).unwrap();
        assert!((ledger.total - 0.2f64.ln()).abs() < 1e-14);
        assert!((ledger.total - (-1.6094379)).abs() < 1e-7);
    }

    #[test]
    fn zero_couplings_decouple() {
        let mut m = BlockModel::<f64>::sample(3, 4, 0.3, SeedSpec::new(2, 0, 0)).unwrap();
        for k in 0..3 {
            m.set_coupling(k, Matrix::zeros(3, 3)).unwrap();
        }
        let chain = schur_chain(&m);
        for k in 0..4 {
            assert_eq!(chain.u[k].as_matrix(), &m.v()[k].shift_diagonal(0.3));
        }
    }

    #[test]
    fn chain_blocks_are_exactly_symmetric() {
        let m = BlockModel::<f64>::sample(5, 6, 0.0, SeedSpec::new(3, 1, 0)).unwrap();
        for u in schur_chain(&m).u {
            assert_eq!(u.asymmetry(), 0.0);
        }
    }

    #[test]
    fn single_site_product_is_inverse() {
        let m = BlockModel::<f64>::sample(4, 1, 0.0, SeedSpec::new(4, 0, 0)).unwrap();
        let chain = schur_chain(&m);
        let g = edge_block_product(&chain, m.t());
        assert!(g.to_matrix().sub(chain.u_inv[0].as_matrix()).max_abs() < 1e-14 * chain.u_inv[0].max_abs());
    }

    #[test]
    fn product_matches_dense_oracle() {
        let m = BlockModel::<f64>::sample(4, 6, 0.0, SeedSpec::new(5, 0, 0)).unwrap();
        let schur = edge_block_product(&schur_chain(&m), m.t());
        let dense = green_edge_block_dense(&m).unwrap();
        assert!(schur.relative_error(&dense) < 1e-8);
    }

    #[test]
    fn sign_follows_parity() {
        // positive scalar blocks and couplings: the product is positive, so the sign is (−1)^{N−1}
        for n in 1..=4 {
            let v = vec![SymmetricMatrix::from_matrix(Matrix::from_rows(&[&[3.0]])); n];
            let t = vec![Matrix::from_rows(&[&[1.0]]); n - 1];
            let m = BlockModel::new(0.0, v, t).unwrap();
            let g = edge_block_product(&schur_chain(&m), m.t()).to_matrix()[(0, 0)];
            assert_eq!(g.signum(), if n % 2 == 1 { 1.0 } else { -1.0 });
        }
    }

    #[test]
    fn identity_action_has_zero_log() {
        let v = vec![SymmetricMatrix::from_matrix(Matrix::identity(3))];
        let m = BlockModel::new(0.0, v, vec![]).unwrap();
        assert_eq!(vector_action_log_norm(&m, &basis(3, 1)).unwrap().total, 0.0);
    }

    #[test]
    fn non_unit_vector_rejected() {
        let m = scalar_model();
        assert!(vector_action_log_norm(&m, &[2.0]).is_err());
    }

    #[test]
    fn ledger_matches_dense_action() {
        let m = BlockModel::<f64>::sample(4, 8, 0.0, SeedSpec::new(6, 0, 0)).unwrap();
        let f = [0.5, -0.5, 0.5, 0.5];
        let ledger = vector_action_log_norm(&m, &f).unwrap();
        let g = green_edge_block_dense(&m).unwrap().to_matrix();
        let dense = norm2(&g.mul_vec(&f)).ln();
        assert!((ledger.total - dense).abs() < 1e-8);
        assert!((ledger.total - ledger.term_sum()).abs() < 1e-12);
    }

    #[test]
    fn scalar_edge_norm() {
        let v = vec![SymmetricMatrix::from_matrix(Matrix::identity(3).scale(2.0))];
        let m = BlockModel::new(0.0, v, vec![]).unwrap();
        assert!((edge_norm_log(&m).unwrap() - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn edge_norm_matches_dense() {
        let m = BlockModel::<f64>::sample(2, 4, 0.0, SeedSpec::new(7, 0, 0)).unwrap();
        let dense = green_edge_block_dense(&m).unwrap().to_matrix();
        let expect = operator_norm_exact(&dense).ln();
        assert!((edge_norm_log(&m).unwrap() - expect).abs() < 1e-8);
    }

    #[test]
    fn singular_site_truncates() {
        let v = vec![SymmetricMatrix::from_matrix(Matrix::zeros(2, 2)), SymmetricMatrix::from_matrix(Matrix::identity(2))];
        let m = BlockModel::new(0.0, v, vec![Matrix::identity(2)]).unwrap();
        let chain = schur_chain(&m);
        assert_eq!(chain.truncated_at, Some(1));
        assert!(matches!(vector_action_log_norm(&m, &[1.0, 0.0]), Err(Error::SingularSite { site: 1 })));
        assert!(!edge_block_product(&chain, m.t()).valid);
    }
}
