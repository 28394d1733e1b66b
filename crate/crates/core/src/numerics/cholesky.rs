use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, Matrix};
use crate::scalar::Scalar;

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    lower: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    /// Factors a symmetric matrix, reading only its lower triangle.
    ///
    /// A pivot at or below `rel_tol · scale` is reported as a singularity at
    /// that coordinate, where `scale` is the largest diagonal entry.
    pub fn factor(a: &Matrix<T>, rel_tol: T) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let scale = (0..n).map(|i| a[(i, i)].abs()).fold(T::zero(), T::max);
        let threshold = rel_tol * scale;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let pivot = {
                let lj = &l.row(j)[..j];
                a[(j, j)] - dot(lj, lj)
            };
            if !(pivot > threshold) || !pivot.is_finite() {
                return Err(Error::Singular {
                    dim: j,
                    pivot: pivot.to_f64_lossy(),
                });
            }
            let diag = pivot.sqrt();
            l[(j, j)] = diag;
            for i in (j + 1)..n {
                let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
                l[(i, j)] = (a[(i, j)] - s) / diag;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix<T> {
        &self.lower
    }

    /// Solves `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.lower.row(i);
            let s = dot(&row[..i], &b[..i]);
            b[i] = (b[i] - s) / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_in_place(&self, y: &mut [T]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.lower[(k, i)] * y[k];
            }
            y[i] = s / self.lower[(i, i)];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.check_len(b.len())?;
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        Ok(x)
    }

    /// `xᵀ A⁻¹ x`, computed as `‖L⁻¹ x‖²`.
    pub fn inv_quad(&self, x: &[T]) -> Result<T> {
        self.check_len(x.len())?;
        let mut y = x.to_vec();
        self.forward_in_place(&mut y);
        Ok(dot(&y, &y))
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: len,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_spd_matrix() {
        let a = Matrix::<f64>::from_rows(&[[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]]).unwrap();
        let c = Cholesky::factor(&a, 1e-12).unwrap();
        let l = c.lower();
        let back = l.matmul(&l.transpose()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
        let x = c.solve(&[1.0, 2.0, 3.0]).unwrap();
        let ax = a.matvec(&x).unwrap();
        for (u, v) in ax.iter().zip([1.0, 2.0, 3.0]) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_names_dimension() {
        let a = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        match Cholesky::factor(&a, 1e-12) {
            Err(Error::Singular { dim, .. }) => assert_eq!(dim, 1),
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
