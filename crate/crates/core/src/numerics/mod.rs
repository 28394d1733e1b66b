//! Dense positive-definite linear algebra: ridge solves, inverse-quadratic
//! norms and spectral quantities, all through factorizations.

mod cholesky;
mod eigen;
mod matrix;
mod ridge;

pub use cholesky::Cholesky;
pub use eigen::{Svd, SymmetricEigen};
pub use matrix::{axpy, dot, norm, Matrix};
pub use ridge::{inv_quad_norm, inv_sqrt_spectral_norm, ridge_fit, CovarianceMatrix, RidgeAccumulator, RidgeFit};
