use crate::scalar::Real;

use super::{norm2, symmetric_eigen, Matrix};

#[derive(Clone, Copy, Debug)]
pub struct PowerIteration {
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self { max_iter: 200, rel_tol: 1e-10 }
    }
}

/// Spectral norm by power iteration on `MᵗM`; used in hot Monte Carlo loops.
pub fn operator_norm_power<T: Real>(m: &Matrix<T>, opts: PowerIteration) -> T {
    let n = m.cols();
    if n == 0 {
        return T::zero();
    }
    // deterministic start with no special alignment to the coordinate axes
    let mut x: Vec<T> = (0..n).map(|i| T::one() + T::lit(0.1 * i as f64)).collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma2 = T::zero();
    for _ in 0..opts.max_iter {
        let y = m.tr_mul_vec(&m.mul_vec(&x));
        let ny = norm2(&y);
        if ny == T::zero() {
            return T::zero();
        }
        let prev = sigma2;
        sigma2 = ny;
        x = y.into_iter().map(|v| v / ny).collect();
        if (sigma2 - prev).abs() <= T::lit(opts.rel_tol) * sigma2 {
            break;
        }
    }
    // Rayleigh quotient on the converged vector
    norm2(&m.mul_vec(&x))
}

/// Spectral norm from the full symmetric eigendecomposition of `MᵗM`.
pub fn operator_norm_exact<T: Real>(m: &Matrix<T>) -> T {
    if m.cols() == 0 {
        return T::zero();
    }
    let scale = m.max_abs();
    if scale == T::zero() {
        return T::zero();
    }
    let ms = m.scale(T::one() / scale);
    let gram = ms.tr_matmul(&ms);
    let eig = symmetric_eigen(&gram);
    scale * eig.values[0].max(T::zero()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_agree_on_fixed_matrix() {
        let m = Matrix::from_rows(&[&[3.0, 0.0], &[4.0, 5.0]]);
        // singular values of [[3,0],[4,5]]: sqrt(45) and sqrt(5)
        let exact = operator_norm_exact(&m);
        assert!((exact - 45f64.sqrt()).abs() < 1e-13);
        let power = operator_norm_power(&m, PowerIteration::default());
        assert!((power - exact).abs() < 1e-9 * exact);
    }
}
