use crate::error::{Error, Result};
use crate::scalar::Real;

use super::Matrix;

/// Bunch–Kaufman `PAPᵗ = LDLᵗ` for symmetric indefinite matrices.
///
/// `D` is block diagonal with 1×1 and 2×2 blocks. The Schur factors `U_n` are
/// symmetric but not definite, so this is the solver used along the chain.
#[derive(Clone, Debug)]
pub struct BunchKaufman<T> {
    n: usize,
    /// unit lower triangular factor, strictly lower part used
    l: Matrix<T>,
    /// diagonal of D
    d: Vec<T>,
    /// subdiagonal of D, nonzero only at the first row of a 2×2 block
    e: Vec<T>,
    /// `block[k] == 2` for the first index of a 2×2 pivot, 0 for its second index, 1 otherwise
    block: Vec<u8>,
    perm: Vec<usize>,
}

impl<T: Real> BunchKaufman<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidDimension(format!("LDLt of {}x{} matrix", a.rows(), a.cols())));
        }
        let n = a.rows();
        let alpha = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        let mut block = vec![1u8; n];

        let swap_sym = |w: &mut Matrix<T>, perm: &mut Vec<usize>, i: usize, j: usize| {
            if i == j {
                return;
            }
            for c in 0..n {
                let t = w[(i, c)];
                w[(i, c)] = w[(j, c)];
                w[(j, c)] = t;
            }
            for r in 0..n {
                let t = w[(r, i)];
                w[(r, i)] = w[(r, j)];
                w[(r, j)] = t;
            }
            perm.swap(i, j);
        };

        let mut k = 0;
        while k < n {
            let akk = w[(k, k)].abs();
            let (r, colmax) = (k + 1..n)
                .map(|i| (i, w[(i, k)].abs()))
                .fold((k, T::zero()), |b, c| if c.1 > b.1 { c } else { b });
            if akk.max(colmax) == T::zero() || !akk.max(colmax).is_finite() {
                return Err(Error::Singular { pivot: k });
            }
            let mut two_by_two = false;
            if akk < alpha * colmax {
                let rowmax = (k..n)
                    .filter(|&j| j != r)
                    .map(|j| w[(r, j)].abs())
                    .fold(T::zero(), T::max);
                if akk * rowmax >= alpha * colmax * colmax {
                    // 1×1 pivot at k
                } else if w[(r, r)].abs() >= alpha * rowmax {
                    swap_sym(&mut w, &mut perm, k, r);
                } else {
                    swap_sym(&mut w, &mut perm, k + 1, r);
                    two_by_two = true;
                }
            }

            if !two_by_two {
                let dk = w[(k, k)];
                d[k] = dk;
                for i in k + 1..n {
                    w[(i, k)] /= dk;
                }
                for i in k + 1..n {
                    let lik = w[(i, k)];
                    for j in k + 1..=i {
                        let v = w[(i, j)] - lik * dk * w[(j, k)];
                        w[(i, j)] = v;
                        w[(j, i)] = v;
                    }
                }
                k += 1;
            } else {
                let d11 = w[(k, k)];
                let d21 = w[(k + 1, k)];
                let d22 = w[(k + 1, k + 1)];
                let det = d11 * d22 - d21 * d21;
                if det == T::zero() || !det.is_finite() {
                    return Err(Error::Singular { pivot: k });
                }
                d[k] = d11;
                d[k + 1] = d22;
                e[k] = d21;
                block[k] = 2;
                block[k + 1] = 0;
                for i in k + 2..n {
                    let a1 = w[(i, k)];
                    let a2 = w[(i, k + 1)];
                    // [l1 l2] = [a1 a2] D⁻¹
                    w[(i, k)] = (a1 * d22 - a2 * d21) / det;
                    w[(i, k + 1)] = (a2 * d11 - a1 * d21) / det;
                }
                for i in k + 2..n {
                    let (li1, li2) = (w[(i, k)], w[(i, k + 1)]);
                    let ai1 = li1 * d11 + li2 * d21;
                    let ai2 = li1 * d21 + li2 * d22;
                    for j in k + 2..=i {
                        let v = w[(i, j)] - ai1 * w[(j, k)] - ai2 * w[(j, k + 1)];
                        w[(i, j)] = v;
                        w[(j, i)] = v;
                    }
                }
                k += 2;
            }
        }
        Ok(Self { n, l: w, d, e, block, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        // L y = Pb
        let mut k = 0;
        while k < n {
            let step = if self.block[k] == 2 { 2 } else { 1 };
            for i in k + step..n {
                for c in k..k + step {
                    let v = x[i] - self.l[(i, c)] * x[c];
                    x[i] = v;
                }
            }
            k += step;
        }
        // D z = y
        let mut k = 0;
        while k < n {
            if self.block[k] == 2 {
                let (d11, d21, d22) = (self.d[k], self.e[k], self.d[k + 1]);
                let det = d11 * d22 - d21 * d21;
                let (y1, y2) = (x[k], x[k + 1]);
                x[k] = (d22 * y1 - d21 * y2) / det;
                x[k + 1] = (d11 * y2 - d21 * y1) / det;
                k += 2;
            } else {
                x[k] /= self.d[k];
                k += 1;
            }
        }
        // Lᵗ w = z
        let mut k = n;
        while k > 0 {
            let start = if k >= 2 && self.block[k - 2] == 2 { k - 2 } else { k - 1 };
            for c in start..k {
                let mut s = x[c];
                for i in k..n {
                    s -= self.l[(i, c)] * x[i];
                }
                x[c] = s;
            }
            k = start;
        }
        let mut out = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        out
    }

    pub fn inverse(&self) -> Matrix<T> {
        let mut inv = Matrix::zeros(self.n, self.n);
        let mut unit = vec![T::zero(); self.n];
        for j in 0..self.n {
            unit[j] = T::one();
            inv.set_column(j, &self.solve(&unit));
            unit[j] = T::zero();
        }
        inv.symmetrize();
        inv
    }

    /// Signature `(positive, negative)` counts from the block diagonal (Sylvester inertia).
    pub fn inertia(&self) -> (usize, usize) {
        let (mut pos, mut neg) = (0, 0);
        let mut k = 0;
        while k < self.n {
            if self.block[k] == 2 {
                // a 2×2 Bunch–Kaufman block always has one eigenvalue of each sign
                pos += 1;
                neg += 1;
                k += 2;
            } else {
                if self.d[k] > T::zero() {
                    pos += 1;
                } else {
                    neg += 1;
                }
                k += 1;
            }
        }
        (pos, neg)
    }
}
