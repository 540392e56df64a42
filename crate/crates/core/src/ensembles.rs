//! Seeded samplers for the GOE and the non-symmetric Gaussian ensemble.
//!
//! Normalization: GOE diagonal entries have variance `2/W`, off-diagonal entries
//! variance `1/W`; the Gaussian ensemble has `W²` independent entries of
//! variance `1/W`. Normals come from the ziggurat sampler in `rand_distr`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricMatrix};
use crate::rng::SeedSpec;
use crate::scalar::Real;

fn check_dim(w: usize) -> Result<()> {
    if w == 0 {
        return Err(Error::InvalidDimension("block dimension W must be at least 1".into()));
    }
    Ok(())
}

pub fn sample_goe<T: Real>(w: usize, seed: SeedSpec) -> Result<SymmetricMatrix<T>> {
    check_dim(w)?;
    let mut rng = seed.rng();
    Ok(goe_from_rng(w, &mut rng))
}

pub(crate) fn goe_from_rng<T: Real, R: Rng + ?Sized>(w: usize, rng: &mut R) -> SymmetricMatrix<T> {
    let off_sd = (1.0 / w as f64).sqrt();
    let diag_sd = (2.0 / w as f64).sqrt();
    let mut m = Matrix::zeros(w, w);
    for i in 0..w {
        for j in i..w {
            let z: f64 = rng.sample(StandardNormal);
            let v = T::lit(z * if i == j { diag_sd } else { off_sd });
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymmetricMatrix::try_from_exact(m).expect("constructed symmetric")
}

pub fn sample_gaussian<T: Real>(w: usize, seed: SeedSpec) -> Result<Matrix<T>> {
    check_dim(w)?;
    let mut rng = seed.rng();
    Ok(gaussian_from_rng(w, &mut rng))
}

pub(crate) fn gaussian_from_rng<T: Real, R: Rng + ?Sized>(w: usize, rng: &mut R) -> Matrix<T> {
    let sd = (1.0 / w as f64).sqrt();
    Matrix::from_fn(w, w, |_, _| T::lit(rng.sample::<f64, _>(StandardNormal) * sd))
}

/// One draw of `χ²_n`, the sum of `n` squared standard normals.
pub fn sample_chi_squared(n: usize, seed: SeedSpec) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("chi-squared needs n >= 1 degrees of freedom".into()));
    }
    let mut rng = seed.rng();
    Ok((0..n).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum())
}

/// Laurent–Massart upper deviation threshold `n + 2√(nx) + 2x`.
pub fn laurent_massart_threshold(n: usize, x: f64) -> f64 {
    let n = n as f64;
    n + 2.0 * (n * x).sqrt() + 2.0 * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_tag, StreamKind};

    #[test]
    fn zero_dimension_rejected() {
        let s = SeedSpec::new(1, 0, 0);
        assert!(sample_goe::<f64>(0, s).is_err());
        assert!(sample_gaussian::<f64>(0, s).is_err());
        assert!(sample_chi_squared(0, s).is_err());
    }

    #[test]
    fn goe_is_exactly_symmetric_and_deterministic() {
        for trial in 0..20 {
            let s = SeedSpec::new(11, trial, stream_tag(StreamKind::VBlock, 0));
            let v = sample_goe::<f64>(7, s).unwrap();
            assert_eq!(v.asymmetry(), 0.0);
            assert_eq!(v, sample_goe::<f64>(7, s).unwrap());
        }
    }

    #[test]
    fn gaussian_same_seed_bit_identical() {
        let s = SeedSpec::new(5, 9, stream_tag(StreamKind::TBlock, 3));
        assert_eq!(sample_gaussian::<f64>(6, s).unwrap(), sample_gaussian::<f64>(6, s).unwrap());
    }

    #[test]
    fn w1_goe_has_variance_two() {
        let n = 40_000;
        let xs: Vec<f64> = (0..n)
            .map(|t| sample_goe::<f64>(1, SeedSpec::new(3, t, 0)).unwrap()[(0, 0)])
            .collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        // sd of the variance estimate is 2·sqrt(2/n) ≈ 0.014
        assert!((var - 2.0).abs() < 0.06, "{var}");
    }

    #[test]
    fn w1_gaussian_has_unit_variance() {
        let n = 40_000;
        let var = (0..n)
            .map(|t| sample_gaussian::<f64>(1, SeedSpec::new(4, t, 0)).unwrap()[(0, 0)].powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((var - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn chi_squared_one_is_a_squared_normal() {
        let s = SeedSpec::new(8, 1, 0);
        let mut rng = s.rng();
        let z: f64 = rng.sample(StandardNormal);
        assert_eq!(sample_chi_squared(1, s).unwrap(), z * z);
    }
}
