//! Numerical laboratory for random band GOE matrices.
//!
//! The operator is block tridiagonal with `N` diagonal `W × W` GOE blocks `V_k`
//! and non-symmetric Gaussian couplings `T_k`. The edge-to-edge Green function
//! block `G(1;N) = [(H − E)⁻¹]_{1,N}` factors through the Schur complements
//! `U_n = V_n − E − T_{n−1}ᵗ U_{n−1}⁻¹ T_{n−1}`; its log-norm and its
//! per-site radial decomposition are the central observables.
//!
//! Linear algebra and the transfer machinery are generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix the scalar to `f64`, which is what the
//! quadrature-based radial analysis and the Monte Carlo estimators use.

pub mod band_model;
pub mod ensembles;
pub mod error;
pub mod estimators;
pub mod ks;
pub mod linalg;
pub mod quad;
pub mod radial;
pub mod rng;
pub mod scalar;
pub mod schur;
pub mod split;
pub mod stats;

pub use error::{Error, Result};
pub use rng::SeedSpec;
pub use scalar::Real;

pub type Matrix = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type BlockModel = band_model::BlockModel<f64>;
pub type BlockModel32 = band_model::BlockModel<f32>;
pub type EdgeBlock = band_model::EdgeBlock<f64>;
pub type SchurChain = schur::SchurChain<f64>;
pub type LogNormLedger = schur::LogNormLedger<f64>;
pub type SplitRecord = split::SplitRecord<f64>;
pub use radial::{QuantileLadder, RadialDensity};
