//! Per-site decoupling of the vector action.
//!
//! For a site with inputs `(U_{n−1}, U_n, T_{n−1}, g)`, `Q1` rotates `U_n⁻¹g` onto `e₁`
//! and `Q2` diagonalizes `U_{n−1}⁻¹ = Q2 C Q2ᵗ`. In the rotated coupling
//! `S = Q2ᵗ T_{n−1} Q1ᵗ`, the first column `X₁ = r x` carries the whole dependence of
//! the next log-norm increment, and its radius `r` has conditional law
//! `r^{W−1} exp(−(W/2)(a²r⁴ + b r² + c r))`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::band_model::BlockModel;
use crate::error::{Error, Result};
use crate::linalg::{dot, householder_to_e1, norm2, symmetric_eigen, BunchKaufman, Matrix, SymmetricMatrix};
use crate::radial::RadialDensity;
use crate::rng::SeedSpec;
use crate::scalar::Real;
use crate::schur::{schur_chain, SchurChain};

/// Reflector taking `U_n⁻¹g / ‖U_n⁻¹g‖` to `+e₁`, as an explicit orthogonal matrix.
pub fn q1_of<T: Real>(u_n: &SymmetricMatrix<T>, g: &[T]) -> Result<Matrix<T>> {
    let (_, unit) = inverse_action(u_n, g)?;
    Ok(householder_to_e1(&unit).to_matrix())
}

/// `(‖U⁻¹g‖, U⁻¹g / ‖U⁻¹g‖)`.
fn inverse_action<T: Real>(u: &SymmetricMatrix<T>, g: &[T]) -> Result<(T, Vec<T>)> {
    let y = BunchKaufman::factor(u)?.solve(g);
    let ny = norm2(&y);
    if !(ny > T::zero() && ny.is_finite()) {
        return Err(Error::Singular { pivot: 0 });
    }
    Ok((ny, y.into_iter().map(|v| v / ny).collect()))
}

/// `Q2` and `λ` with `Q2ᵗ U_prev⁻¹ Q2 = diag(λ)`, `λ` descending, columns sign-fixed.
pub fn q2_of<T: Real>(u_prev: &SymmetricMatrix<T>) -> Result<(Matrix<T>, Vec<T>)> {
    let eig = symmetric_eigen(u_prev);
    if eig.values.iter().any(|&mu| mu == T::zero() || !mu.is_finite()) {
        return Err(Error::Singular { pivot: 0 });
    }
    let w = eig.values.len();
    let mut order: Vec<usize> = (0..w).collect();
    let inv: Vec<T> = eig.values.iter().map(|&mu| T::one() / mu).collect();
    order.sort_by(|&i, &j| inv[j].partial_cmp(&inv[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut q = Matrix::zeros(w, w);
    for (col, &src) in order.iter().enumerate() {
        q.set_column(col, &eig.vectors.column(src));
    }
    Ok((q, order.iter().map(|&i| inv[i]).collect()))
}

/// Both sides of the block formula for `Sᵗ Qᵗ A Q S` and of the column formula for
/// `Sᵗ C X₁`, with `Q` the eigenbasis of `A`; returns the largest deviation.
pub fn split_identity_check<T: Real>(a: &SymmetricMatrix<T>, s: &Matrix<T>) -> T {
    let w = a.dim();
    let eig = symmetric_eigen(a);
    let q = &eig.vectors;
    let lam = &eig.values;
    let direct = s.tr_matmul(&q.tr_matmul(&a.matmul(q)).matmul(s));

    let xi11 = s[(0, 0)];
    let y1: Vec<T> = (1..w).map(|j| s[(0, j)]).collect();
    let x1t: Vec<T> = (1..w).map(|i| s[(i, 0)]).collect();
    let s_check = s.block(1, 1, w - 1, w - 1);
    let c_check: Vec<T> = lam[1..].to_vec();
    let cx = |v: &[T]| -> Vec<T> { v.iter().zip(&c_check).map(|(&x, &l)| x * l).collect() };

    let top_left = lam[0] * xi11 * xi11 + dot(&cx(&x1t), &x1t);
    let cs_x = s_check.tr_mul_vec(&cx(&x1t));
    let top_right: Vec<T> = (0..w - 1).map(|j| lam[0] * xi11 * y1[j] + cs_x[j]).collect();
    let mut block = Matrix::zeros(w, w);
    block[(0, 0)] = top_left;
    for j in 1..w {
        block[(0, j)] = top_right[j - 1];
        block[(j, 0)] = top_right[j - 1];
        for k in 1..w {
            let mut v = lam[0] * y1[j - 1] * y1[k - 1];
            for i in 1..w {
                v += s_check[(i - 1, j - 1)] * c_check[i - 1] * s_check[(i - 1, k - 1)];
            }
            block[(j, k)] = v;
        }
    }
    let mut dev = direct.sub(&block).max_abs();

    // Sᵗ C X₁ = (λ₁ξ₁₁² + ⟨ČX̃₁, X̃₁⟩, λ₁ξ₁₁Ỹ₁ + ŠᵗČX̃₁)
    let c_full = Matrix::diagonal(lam);
    let x1 = s.column(0);
    let lhs = s.tr_mul_vec(&c_full.mul_vec(&x1));
    dev = dev.max((lhs[0] - top_left).abs());
    for j in 1..w {
        dev = dev.max((lhs[j] - top_right[j - 1]).abs());
    }
    dev
}

/// Everything the decoupling produces at one site.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitRecord<T> {
    /// 1-based index of `U_{n−1}`
    pub site: usize,
    pub g: Vec<T>,
    pub q1: Matrix<T>,
    pub q2: Matrix<T>,
    /// spectrum of `U_{n−1}⁻¹`, descending
    pub lambda: Vec<T>,
    /// `B = Q1 U_n Q1ᵗ`
    pub b_mat: Matrix<T>,
    /// `S = Q2ᵗ T_{n−1} Q1ᵗ`
    pub s: Matrix<T>,
    /// `‖U_n⁻¹g‖`
    pub inv_norm: T,
    pub r: T,
    pub x: Vec<T>,
    pub a2: T,
    pub b: T,
    pub c: T,
    pub beta2: T,
    pub gamma: T,
    /// principal vector `𝖡 = B e₁`
    pub principal_b: Vec<T>,
    /// principal vector `𝖹 = C X₁`
    pub principal_z: Vec<T>,
    /// `‖𝖹‖ / ‖X₁‖`
    pub zeta: T,
    /// `h = Q2 x`, the input direction for the predecessor site
    pub relay: Vec<T>,
}

pub fn split_record<T: Real>(
    u_prev: &SymmetricMatrix<T>,
    u_n: &SymmetricMatrix<T>,
    t_prev: &Matrix<T>,
    g: &[T],
) -> Result<SplitRecord<T>> {
    split_record_at(0, u_prev, u_n, t_prev, g)
}

fn split_record_at<T: Real>(
    site: usize,
    u_prev: &SymmetricMatrix<T>,
    u_n: &SymmetricMatrix<T>,
    t_prev: &Matrix<T>,
    g: &[T],
) -> Result<SplitRecord<T>> {
    let w = u_n.dim();
    let (inv_norm, unit) = inverse_action(u_n, g)?;
    let q1 = householder_to_e1(&unit).to_matrix();
    let (q2, lambda) = q2_of(u_prev)?;
    let s = q2.tr_matmul(&t_prev.matmul(&q1.transpose()));
    let mut b_mat = q1.matmul(&u_n.matmul(&q1.transpose()));
    b_mat.symmetrize();

    let x1 = s.column(0);
    let r = norm2(&x1);
    if r == T::zero() {
        return Err(Error::DegenerateSplit { site });
    }
    let x: Vec<T> = x1.iter().map(|&v| v / r).collect();
    let kappa: T = x.iter().zip(&lambda).map(|(&xi, &l)| l * xi * xi).sum();
    // v = λ₁x₁Ỹ₁ᵗ + ŠᵗČx̃, the tail of Sᵗ C x
    let cx: Vec<T> = x.iter().zip(&lambda).map(|(&xi, &l)| l * xi).collect();
    let v: Vec<T> = (1..w).map(|j| (0..w).map(|i| s[(i, j)] * cx[i]).sum()).collect();
    let b11 = b_mat[(0, 0)];
    let b_tail: Vec<T> = (1..w).map(|i| b_mat[(i, 0)]).collect();
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let a2 = half * kappa * kappa;
    let beta2 = dot(&v, &v);
    let gamma = b11 * kappa;
    let c = two * dot(&v, &b_tail);
    let b = T::one() + beta2 + gamma;
    let principal_b = b_mat.column(0);
    let principal_z: Vec<T> = x1.iter().zip(&lambda).map(|(&xi, &l)| l * xi).collect();
    let zeta = norm2(&principal_z) / r;
    let relay = q2.mul_vec(&x);
    Ok(SplitRecord {
        site,
        g: g.to_vec(),
        q1,
        q2,
        lambda,
        b_mat,
        s,
        inv_norm,
        r,
        x,
        a2,
        b,
        c,
        beta2,
        gamma,
        principal_b,
        principal_z,
        zeta,
        relay,
    })
}

impl<T: Real> SplitRecord<T> {
    /// `φ(X₁) = a²r⁴ + b r² + c r + (b₁₁²/2 + ‖B̃₁‖²)`.
    pub fn phi(&self) -> T {
        let r = self.r;
        let b11 = self.b_mat[(0, 0)];
        let tail: T = self.principal_b[1..].iter().map(|&v| v * v).sum();
        self.a2 * r.powi(4) + self.b * r * r + self.c * r + T::lit(0.5) * b11 * b11 + tail
    }

    /// Conditional law of `r` given every other coordinate of the site.
    ///
    /// The Gaussian and GOE weights contribute `exp(−(W/2)(a²r⁴ + b r² + c r))`, so the
    /// coefficients are halved to fit the `exp(−W(…))` convention of [`RadialDensity`].
    pub fn conditional_radial_density(&self) -> Result<RadialDensity> {
        let w = self.x.len();
        RadialDensity::new(w, 0.5 * self.a2.as_f64(), 0.5 * self.b.as_f64(), 0.5 * self.c.as_f64())
    }

    /// Relative residual of `Tr(B + SᵗCS)²` against its split around `X₁`, in both the
    /// block form and the coefficient form.
    pub fn exponent_split_residual(&self) -> T {
        let w = self.x.len();
        let c = Matrix::diagonal(&self.lambda);
        let m = self.b_mat.add(&self.s.tr_matmul(&c.matmul(&self.s)));
        let direct: T = m.as_slice().iter().map(|&v| v * v).sum();

        let r = self.r;
        let kappa: T = self.x.iter().zip(&self.lambda).map(|(&xi, &l)| l * xi * xi).sum();
        let cx: Vec<T> = self.x.iter().zip(&self.lambda).map(|(&xi, &l)| l * xi).collect();
        let v: Vec<T> = (1..w).map(|j| (0..w).map(|i| self.s[(i, j)] * cx[i]).sum()).collect();
        let b11 = self.b_mat[(0, 0)];
        let two = T::lit(2.0);
        let mut lower = T::zero();
        for j in 1..w {
            for k in 1..w {
                let mut e = self.b_mat[(j, k)] + self.lambda[0] * self.s[(0, j)] * self.s[(0, k)];
                for i in 1..w {
                    e += self.s[(i, j)] * self.lambda[i] * self.s[(i, k)];
                }
                lower += e * e;
            }
        }
        let corner = b11 + kappa * r * r;
        let edge: T = (1..w).map(|j| (self.b_mat[(j, 0)] + r * v[j - 1]).powi(2)).sum();
        let block_form = corner * corner + two * edge + lower;

        let tail: T = self.principal_b[1..].iter().map(|&v| v * v).sum();
        let coeff_form = two * (self.a2 * r.powi(4) + (self.b - T::one()) * r * r + self.c * r) + b11 * b11 + two * tail + lower;
        let scale = direct.abs().max(T::min_positive_value());
        ((block_form - direct).abs().max((coeff_form - direct).abs())) / scale
    }

    /// Flat row for CSV export.
    pub fn flat(&self) -> SplitRow {
        SplitRow {
            site: self.site,
            r: self.r.as_f64(),
            a2: self.a2.as_f64(),
            b: self.b.as_f64(),
            c: self.c.as_f64(),
            beta2: self.beta2.as_f64(),
            gamma: self.gamma.as_f64(),
            zeta: self.zeta.as_f64(),
            norm_b: norm2(&self.principal_b).as_f64(),
            norm_z: norm2(&self.principal_z).as_f64(),
            q1_defect: self.q1.orthogonality_defect().as_f64(),
            q2_defect: self.q2.orthogonality_defect().as_f64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub site: usize,
    pub r: f64,
    pub a2: f64,
    pub b: f64,
    pub c: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub zeta: f64,
    pub norm_b: f64,
    pub norm_z: f64,
    pub q1_defect: f64,
    pub q2_defect: f64,
}

/// `|‖𝖡_{n−2}‖ − ‖X_{1,n−1}‖/‖𝖹_{n−1}‖|` relative to the right side.
///
/// `prev` must have been built from the relay direction of `site`.
pub fn recurrence_check<T: Real>(prev: &SplitRecord<T>, site: &SplitRecord<T>) -> Result<f64> {
    let mismatch = prev.g.iter().zip(&site.relay).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max);
    if prev.g.len() != site.relay.len() || mismatch.as_f64() > 1e3 * T::epsilon().as_f64() {
        return Err(Error::ChainMismatch(format!("record at site {} was not fed the relay direction of site {}", prev.site, site.site)));
    }
    let lhs = norm2(&prev.principal_b).as_f64();
    let rhs = site.r.as_f64() / norm2(&site.principal_z).as_f64();
    Ok((lhs - rhs).abs() / rhs)
}

/// `|‖𝖡‖·‖U_n⁻¹g‖ − 1|`.
pub fn companion_check<T: Real>(record: &SplitRecord<T>) -> f64 {
    (norm2(&record.principal_b).as_f64() * record.inv_norm.as_f64() - 1.0).abs()
}

/// Split records along the whole vector action of `f`, from the right edge inward.
///
/// `records[0]` sits at `(U_{N−1}, U_N)` and uses `g = f`; every later record is fed the
/// relay direction of the one before it.
pub fn split_chain<T: Real>(model: &BlockModel<T>, f: &[T]) -> Result<(SchurChain<T>, Vec<SplitRecord<T>>)> {
    let chain = schur_chain(model);
    let records = split_chain_on(&chain, model.t(), f)?;
    Ok((chain, records))
}

pub fn split_chain_on<T: Real>(chain: &SchurChain<T>, t: &[Matrix<T>], f: &[T]) -> Result<Vec<SplitRecord<T>>> {
    if let Some(site) = chain.truncated_at {
        return Err(Error::SingularSite { site });
    }
    let n = chain.n;
    let mut records = Vec::with_capacity(n.saturating_sub(1));
    let mut g = f.to_vec();
    for site in (1..n).rev() {
        let rec = split_record_at(site, &chain.u[site - 1], &chain.u[site], &t[site - 1], &g)?;
        g = rec.relay.clone();
        records.push(rec);
    }
    Ok(records)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyParams {
    /// threshold `𝖠`
    pub a: f64,
    /// `𝖢`
    pub cfrak: f64,
    /// multiplier in `|b| < k·𝖢⁻¹|a|`
    pub sign_constant: f64,
}

impl Default for DichotomyParams {
    fn default() -> Self {
        Self { a: 1.0, cfrak: 1.0, sign_constant: 2.0 * std::f64::consts::SQRT_2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Dichotomy {
    /// `max(a², |b|, |c|) ≤ 𝖠` at the site
    CaseI,
    /// the predecessor's `r`-weighted bound and sign condition
    CaseII { weighted_ok: bool, sign_ok: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub case: Dichotomy,
    pub zeta: f64,
}

impl DichotomyReport {
    pub fn holds(&self) -> bool {
        match self.case {
            Dichotomy::CaseI => true,
            Dichotomy::CaseII { weighted_ok, sign_ok } => weighted_ok && sign_ok,
        }
    }
}

/// Classifies a site; `predecessor` is the record one site further in (built from this site's relay).
pub fn dichotomy_classify<T: Real>(record: &SplitRecord<T>, predecessor: Option<&SplitRecord<T>>, p: DichotomyParams) -> DichotomyReport {
    let (a2, b, c) = (record.a2.as_f64(), record.b.as_f64(), record.c.as_f64());
    let zeta = record.zeta.as_f64();
    if a2.max(b.abs()).max(c.abs()) <= p.a {
        return DichotomyReport { case: Dichotomy::CaseI, zeta };
    }
    let case = match predecessor {
        None => Dichotomy::CaseII { weighted_ok: false, sign_ok: false },
        Some(pre) => {
            let (pa2, pb, pc, rho) = (pre.a2.as_f64(), pre.b.as_f64(), pre.c.as_f64(), pre.r.as_f64());
            let weighted = (pa2 * rho.powi(4)).max(pb.abs() * rho * rho).max(pc.abs() * rho);
            let sign_ok = pb > 0.0 || pb.abs() < p.sign_constant / p.cfrak * pa2.sqrt();
            Dichotomy::CaseII { weighted_ok: weighted <= p.a, sign_ok }
        }
    };
    DichotomyReport { case, zeta }
}

/// Smallest threshold `𝖠` for which [`dichotomy_classify`] reports that the dichotomy
/// holds, with `𝖢` and the sign constant taken from `p`.
pub fn dichotomy_threshold<T: Real>(record: &SplitRecord<T>, predecessor: Option<&SplitRecord<T>>, p: DichotomyParams) -> f64 {
    let own = record.a2.as_f64().max(record.b.as_f64().abs()).max(record.c.as_f64().abs());
    let Some(pre) = predecessor else {
        return own;
    };
    let (pa2, pb, pc, rho) = (pre.a2.as_f64(), pre.b.as_f64(), pre.c.as_f64(), pre.r.as_f64());
    let sign_ok = pb > 0.0 || pb.abs() < p.sign_constant / p.cfrak * pa2.sqrt();
    if !sign_ok {
        return own;
    }
    let weighted = (pa2 * rho.powi(4)).max(pb.abs() * rho * rho).max(pc.abs() * rho);
    own.min(weighted)
}

/// Acceptance weight `exp(−(W/4) Tr[(U_n + Tᵗ U_prev⁻¹ T)²])` of a proposal.
pub fn acceptance_probability<T: Real>(u_prev_inv: &Matrix<T>, u_n: &SymmetricMatrix<T>, t: &Matrix<T>) -> f64 {
    let m = u_n.add(&t.tr_matmul(&u_prev_inv.matmul(t)));
    let tr2: f64 = m.as_slice().iter().map(|&v| v.as_f64() * v.as_f64()).sum();
    (-(u_n.dim() as f64) / 4.0 * tr2).exp()
}

/// Largest block size the rejection sampler accepts.
pub const SAMPLER_MAX_W: usize = 6;

/// Exact draw of `T_{n−1}` given `U_{n−1}, U_n`: Gaussian proposals accepted with
/// probability [`acceptance_probability`]. Returns the draw and the number of proposals.
pub fn conditional_t_sampler<T: Real>(
    u_prev: &SymmetricMatrix<T>,
    u_n: &SymmetricMatrix<T>,
    seed: SeedSpec,
    max_attempts: u64,
) -> Result<(Matrix<T>, u64)> {
    let w = u_n.dim();
    if w > SAMPLER_MAX_W {
        return Err(Error::InvalidDimension(format!("rejection sampler is limited to W <= {SAMPLER_MAX_W}, got {w}")));
    }
    let inv = BunchKaufman::factor(u_prev)?.inverse();
    let mut rng = seed.rng();
    let sd = (1.0 / w as f64).sqrt();
    let mut weight_sum = 0.0;
    for attempt in 1..=max_attempts {
        let t = Matrix::from_fn(w, w, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal) * sd));
        let p = acceptance_probability(&inv, u_n, &t);
        weight_sum += p;
        if rng.random::<f64>() < p {
            return Ok((t, attempt));
        }
    }
    Err(Error::SamplerExhausted { attempts: max_attempts, rate: weight_sum / max_attempts.max(1) as f64 })
}
