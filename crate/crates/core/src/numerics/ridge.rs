use crate::error::{Error, Result};
use crate::numerics::cholesky::Cholesky;
use crate::numerics::eigen::SymmetricEigen;
use crate::numerics::matrix::{add_outer_upper, axpy, dot, norm, Matrix};
use crate::scalar::Scalar;

/// Regularised empirical covariance `V = (λ/n) I + (1/n) Σ φᵢφᵢᵀ`.
///
/// The matrix is symmetrised on construction and carries its Cholesky factor;
/// every `V⁻¹` application goes through that factor.
#[derive(Clone, Debug)]
pub struct CovarianceMatrix<T> {
    entries: Matrix<T>,
    ridge_floor: T,
    chol: Cholesky<T>,
}

impl<T: Scalar> CovarianceMatrix<T> {
    /// `ridge_floor` is the `λ/n` already folded into `entries`.
    pub fn new(mut entries: Matrix<T>, ridge_floor: T) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::Dimension {
                expected: entries.rows(),
                found: entries.cols(),
            });
        }
        if !entries.is_finite() {
            return Err(Error::input("covariance entries must be finite"));
        }
        if ridge_floor < T::zero() {
            return Err(Error::input("ridge floor must be nonnegative"));
        }
        entries.symmetrize();
        let chol = Cholesky::factor(&entries, T::tolerance())?;
        Ok(Self {
            entries,
            ridge_floor,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn ridge_floor(&self) -> T {
        self.ridge_floor
    }

    pub fn factor(&self) -> &Cholesky<T> {
        &self.chol
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.chol.solve(b)
    }

    /// `‖x‖_{V⁻¹} = √(xᵀ V⁻¹ x)`.
    pub fn inv_quad_norm(&self, x: &[T]) -> Result<T> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("vector must be finite"));
        }
        Ok(self.chol.inv_quad(x)?.sqrt())
    }

    /// `‖V^{-1/2}‖ = λ_min(V)^{-1/2}`.
    pub fn inv_sqrt_spectral_norm(&self) -> Result<T> {
        let eig = SymmetricEigen::new(&self.entries)?;
        let lmin = eig.min();
        let scale = eig.max().abs().max(eig.min().abs());
        if !(lmin > T::tolerance() * scale) {
            let dim = eig
                .vectors
                .column(0)
                .iter()
                .enumerate()
                .fold(
                    (0, T::zero()),
                    |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) },
                )
                .0;
            return Err(Error::Singular {
                dim,
                pivot: lmin.to_f64_lossy(),
            });
        }
        Ok(T::one() / lmin.sqrt())
    }

    /// The covariance of the first `k` coordinates (top-left block).
    pub fn leading(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(Error::input(format!("block size {k} outside 1..={}", self.dim())));
        }
        Self::new(self.entries.leading_block(k), self.ridge_floor)
    }
}

pub fn inv_quad_norm<T: Scalar>(cov: &CovarianceMatrix<T>, x: &[T]) -> Result<T> {
    cov.inv_quad_norm(x)
}

pub fn inv_sqrt_spectral_norm<T: Scalar>(cov: &CovarianceMatrix<T>) -> Result<T> {
    cov.inv_sqrt_spectral_norm()
}

/// A ridge-regression fit `θ̂ = V⁻¹ (1/n) Σ φᵢ yᵢ`.
#[derive(Clone, Debug)]
pub struct RidgeFit<T> {
    pub theta_hat: Vec<T>,
    pub cov: CovarianceMatrix<T>,
    pub n: usize,
    pub lambda: T,
}

impl<T: Scalar> RidgeFit<T> {
    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn predict(&self, phi: &[T]) -> T {
        dot(phi, &self.theta_hat)
    }

    /// `V θ̂ − b` for the right-hand side `b` the fit was solved against.
    pub fn normal_equation_residual(&self, rhs: &[T]) -> Result<T> {
        let vt = self.cov.entries().matvec(&self.theta_hat)?;
        let r: Vec<T> = vt.iter().zip(rhs).map(|(&a, &b)| a - b).collect();
        Ok(norm(&r))
    }
}

/// Sufficient statistics for ridge regression: `Σ φφᵀ`, `Σ φy` and the row
/// count. Rows sharing a feature vector can be pushed in one go.
#[derive(Clone, Debug)]
pub struct RidgeAccumulator<T> {
    gram_upper: Matrix<T>,
    xty: Vec<T>,
    n: usize,
}

impl<T: Scalar> RidgeAccumulator<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            gram_upper: Matrix::zeros(dim, dim),
            xty: vec![T::zero(); dim],
            n: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.xty.len()
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn push(&mut self, phi: &[T], y: T) -> Result<()> {
        self.push_repeated(phi, y, 1)
    }

    /// Adds `count` rows with features `phi` whose rewards sum to `y_sum`.
    pub fn push_repeated(&mut self, phi: &[T], y_sum: T, count: usize) -> Result<()> {
        if phi.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: phi.len(),
            });
        }
        if !y_sum.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("features and rewards must be finite"));
        }
        if count == 0 {
            return Ok(());
        }
        add_outer_upper(&mut self.gram_upper, phi, T::from_count(count));
        axpy(y_sum, phi, &mut self.xty);
        self.n += count;
        Ok(())
    }

    /// Right-hand side `(1/n) Σ φᵢ yᵢ`.
    pub fn rhs(&self) -> Vec<T> {
        let inv_n = T::one() / T::from_count(self.n.max(1));
        self.xty.iter().map(|&v| v * inv_n).collect()
    }

    pub fn fit(&self, lambda: T) -> Result<RidgeFit<T>> {
        if self.n == 0 {
            return Err(Error::input("ridge fit needs at least one row"));
        }
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::input("lambda must be finite and nonnegative"));
        }
        let n = T::from_count(self.n);
        let mut v = self.gram_upper.clone();
        v.mirror_upper();
        v.scale(T::one() / n);
        let floor = lambda / n;
        v.add_diagonal(floor);
        let cov = CovarianceMatrix::new(v, floor)?;
        let theta_hat = cov.solve(&self.rhs())?;
        Ok(RidgeFit {
            theta_hat,
            cov,
            n: self.n,
            lambda,
        })
    }
}

/// Ridge regression with regulariser `λ/n` on an `n×d` design.
pub fn ridge_fit<T: Scalar>(features: &Matrix<T>, rewards: &[T], lambda: T) -> Result<RidgeFit<T>> {
    if features.rows() != rewards.len() {
        return Err(Error::Dimension {
            expected: features.rows(),
            found: rewards.len(),
        });
    }
    let mut acc = RidgeAccumulator::new(features.cols());
    for (row, &y) in features.row_iter().zip(rewards) {
        acc.push(row, y)?;
    }
    acc.fit(lambda)
}
