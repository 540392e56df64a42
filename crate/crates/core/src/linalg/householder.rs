use crate::scalar::Real;

use super::{dot, norm2, Matrix};

/// Elementary reflector `H = I − τ v vᵗ`.
#[derive(Clone, Debug)]
pub struct Householder<T> {
    pub v: Vec<T>,
    pub tau: T,
}

impl<T: Real> Householder<T> {
    pub fn identity(n: usize) -> Self {
        Self { v: vec![T::zero(); n], tau: T::zero() }
    }

    pub fn apply(&self, x: &mut [T]) {
        if self.tau == T::zero() {
            return;
        }
        let s = self.tau * dot(&self.v, x);
        for (xi, &vi) in x.iter_mut().zip(&self.v) {
            *xi -= s * vi;
        }
    }

    pub fn to_matrix(&self) -> Matrix<T> {
        let n = self.v.len();
        Matrix::from_fn(n, n, |i, j| {
            let id = if i == j { T::one() } else { T::zero() };
            id - self.tau * self.v[i] * self.v[j]
        })
    }
}

/// Reflector mapping the unit vector `x` to `+e₁`.
///
/// The first component of `v` is formed without cancellation when `x₁ > 0`.
pub fn householder_to_e1<T: Real>(x: &[T]) -> Householder<T> {
    let n = x.len();
    let tail_sq: T = x[1..].iter().map(|&t| t * t).sum();
    if tail_sq == T::zero() {
        if x[0] >= T::zero() {
            return Householder::identity(n);
        }
        // x = -e1: reflect through the hyperplane orthogonal to e1
        let mut v = vec![T::zero(); n];
        v[0] = T::one();
        return Householder { v, tau: T::lit(2.0) };
    }
    let mut v = x.to_vec();
    let x1 = x[0];
    v[0] = if x1 > T::zero() { -tail_sq / (x1 + T::one()) } else { x1 - T::one() };
    let vv = v[0] * v[0] + tail_sq;
    Householder { v, tau: T::lit(2.0) / vv }
}

/// Householder QR of a square matrix: `A = Q R` with `diag(R) ≥ 0`.
#[derive(Clone, Debug)]
pub struct QrFactors<T> {
    pub q: Matrix<T>,
    pub r: Matrix<T>,
}

impl<T: Real> QrFactors<T> {
    pub fn factor(a: &Matrix<T>) -> Self {
        let (m, n) = (a.rows(), a.cols());
        let mut r = a.clone();
        let mut reflectors = Vec::with_capacity(n.min(m));
        for k in 0..n.min(m) {
            let col: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
            let alpha = norm2(&col);
            let refl = if alpha == T::zero() {
                Householder::identity(m - k)
            } else {
                let unit: Vec<T> = col.iter().map(|&c| c / alpha).collect();
                householder_to_e1(&unit)
            };
            for j in k..n {
                let mut c: Vec<T> = (k..m).map(|i| r[(i, j)]).collect();
                refl.apply(&mut c);
                for (off, &ci) in c.iter().enumerate() {
                    r[(k + off, j)] = ci;
                }
            }
            for i in k + 1..m {
                r[(i, k)] = T::zero();
            }
            reflectors.push(refl);
        }
        // Q = H_0 H_1 ... applied to the identity from the right end
        let mut q = Matrix::identity(m);
        for (k, refl) in reflectors.iter().enumerate().rev() {
            for j in 0..m {
                let mut c: Vec<T> = (k..m).map(|i| q[(i, j)]).collect();
                refl.apply(&mut c);
                for (off, &ci) in c.iter().enumerate() {
                    q[(k + off, j)] = ci;
                }
            }
        }
        Self { q, r }
    }
}
