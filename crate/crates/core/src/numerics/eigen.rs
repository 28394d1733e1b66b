//! Symmetric eigen-solve (cyclic Jacobi) and thin SVD (one-sided Jacobi).
//! Both are exact enough for the moderate dimensions used here and need
//! nothing beyond `Scalar`.

use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, Matrix};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix. Eigenvalues ascending; column
/// `i` of `vectors` pairs with `values[i]`.
#[derive(Clone, Debug)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: a.rows(),
                found: a.cols(),
            });
        }
        let n = a.rows();
        let mut m = a.clone();
        m.symmetrize();
        let mut v = Matrix::identity(n);
        let eps = T::epsilon();

        for _ in 0..MAX_SWEEPS {
            let off: T = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .fold(T::zero(), |s, (i, j)| s + m[(i, j)] * m[(i, j)]);
            let diag: T = (0..n).fold(T::zero(), |s, i| s + m[(i, i)] * m[(i, i)]);
            if off <= eps * eps * diag || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    rotate_symmetric(&mut m, p, q, c, s);
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| m[(i, i)].partial_cmp(&m[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Ok(Self { values, vectors })
    }

    pub fn min(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }
}

/// Applies the Jacobi rotation `Jᵀ M J` on the (p, q) plane.
fn rotate_symmetric<T: Scalar>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ` of an `m×n` matrix,
/// computed by orthogonalising the columns of `A`.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    /// Columns are the (unnormalised, i.e. `σ_i u_i`) left vectors, `m×n`.
    scaled_left: Matrix<T>,
    pub singular_values: Vec<T>,
    pub right: Matrix<T>,
}

impl<T: Scalar> Svd<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (rows, cols) = (a.rows(), a.cols());
        // Work on columns stored contiguously.
        let mut w: Vec<Vec<T>> = (0..cols).map(|j| a.column(j)).collect();
        let mut v = Matrix::identity(cols);
        let eps = T::epsilon();

        for _ in 0..MAX_SWEEPS {
            let mut rotated = false;
            for p in 0..cols {
                for q in (p + 1)..cols {
                    let alpha = dot(&w[p], &w[p]);
                    let beta = dot(&w[q], &w[q]);
                    let gamma = dot(&w[p], &w[q]);
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    let (wp, wq) = two_mut(&mut w, p, q);
                    for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
                        let (xp, xq) = (*x, *y);
                        *x = c * xp - s * xq;
                        *y = s * xp + c * xq;
                    }
                    for k in 0..cols {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }

        let singular_values = w.iter().map(|col| dot(col, col).sqrt()).collect();
        let scaled_left = Matrix::from_fn(rows, cols, |i, j| w[j][i]);
        Self {
            scaled_left,
            singular_values,
            right: v,
        }
    }

    pub fn max_singular(&self) -> T {
        self.singular_values.iter().copied().fold(T::zero(), T::max)
    }

    /// Minimum-norm least-squares solution of `A x = b`, discarding singular
    /// values at or below `rcond · σ_max`.
    pub fn solve_min_norm(&self, b: &[T], rcond: T) -> Result<Vec<T>> {
        if b.len() != self.scaled_left.rows() {
            return Err(Error::Dimension {
                expected: self.scaled_left.rows(),
                found: b.len(),
            });
        }
        let cutoff = rcond * self.max_singular();
        let n = self.singular_values.len();
        let mut x = vec![T::zero(); n];
        for (j, &sigma) in self.singular_values.iter().enumerate() {
            if !(sigma > cutoff) {
                continue;
            }
            // uⱼᵀ b / σⱼ with uⱼ = wⱼ / σⱼ
            let proj = (0..b.len()).fold(T::zero(), |s, i| s + self.scaled_left[(i, j)] * b[i]) / (sigma * sigma);
            for k in 0..n {
                x[k] += self.right[(k, j)] * proj;
            }
        }
        Ok(x)
    }
}

fn two_mut<T>(v: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (head, tail) = v.split_at_mut(q);
    (&mut head[p], &mut tail[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_eigenvalues_sorted() {
        let a = Matrix::from_diagonal(&[9.0, 1.0, 4.0]);
        let e = SymmetricEigen::new(&a).unwrap();
        assert_eq!(e.values, vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let a = Matrix::<f64>::from_rows(&[[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]).unwrap();
        let e = SymmetricEigen::new(&a).unwrap();
        for k in 0..3 {
            let v = e.vectors.column(k);
            let av = a.matvec(&v).unwrap();
            for i in 0..3 {
                assert!((av[i] - e.values[k] * v[i]).abs() < 1e-12);
            }
        }
        // 2 - sqrt(2), 2, 2 + sqrt(2)
        assert!((e.min() - (2.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn svd_min_norm_on_rank_deficient_system() {
        // Two identical columns: min-norm solution splits the weight evenly.
        let a = Matrix::<f64>::from_rows(&[[1.0, 1.0], [2.0, 2.0]]).unwrap();
        let svd = Svd::new(&a);
        let x = svd.solve_min_norm(&[1.0, 2.0], 1e-10).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }
}
