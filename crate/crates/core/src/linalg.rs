//! Dense symmetric-positive-definite solves used by the classifiers and pruners.
//!
//! Everything here works on row-major `ndarray` buffers. Systems are small
//! (at most a few hundred rows on the dual path), so a plain Cholesky
//! factorization is all we need.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub struct Cholesky {
    l: Vec<f64>,
    n: usize,
}

impl Cholesky {
    /// Factor `a = L Lᵀ`. Fails if `a` is not (numerically) positive definite.
    pub fn new(a: &ArrayView2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "cholesky expects a square matrix",
                got: a.ncols(),
                expected: n,
            });
        }
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                l[i * n + j] = a[(i, j)];
            }
        }
        for j in 0..n {
            let (head, tail) = l.split_at_mut((j + 1) * n);
            let row_j = &mut head[j * n..j * n + n];
            let mut d = row_j[j];
            for k in 0..j {
                d -= row_j[k] * row_j[k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Singular);
            }
            let diag = d.sqrt();
            row_j[j] = diag;
            for v in row_j[j + 1..].iter_mut() {
                *v = 0.0;
            }
            let row_j = &head[j * n..j * n + j];
            for i in j + 1..n {
                let row_i = &mut tail[(i - j - 1) * n..(i - j - 1) * n + n];
                let mut s = row_i[j];
                for k in 0..j {
                    s -= row_i[k] * row_j[k];
                }
                row_i[j] = s / diag;
            }
        }
        Ok(Self { l, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` for a matrix right-hand side.
    pub fn solve(&self, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
        let n = self.n;
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "cholesky solve rhs rows",
                got: b.nrows(),
                expected: n,
            });
        }
        let c = b.ncols();
        let mut y = vec![0.0f64; n * c];
        for i in 0..n {
            for k in 0..c {
                y[i * c + k] = b[(i, k)];
            }
        }
        // forward: L y = b
        for i in 0..n {
            let (done, rest) = y.split_at_mut(i * c);
            let row_l = &self.l[i * n..i * n + i];
            let yi = &mut rest[..c];
            for (k, &lik) in row_l.iter().enumerate() {
                let yk = &done[k * c..k * c + c];
                for (v, &w) in yi.iter_mut().zip(yk) {
                    *v -= lik * w;
                }
            }
            let d = self.l[i * n + i];
            for v in yi.iter_mut() {
                *v /= d;
            }
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let (head, rest) = y.split_at_mut((i + 1) * c);
            let yi = &mut head[i * c..];
            for k in i + 1..n {
                let lki = self.l[k * n + i];
                let yk = &rest[(k - i - 1) * c..(k - i - 1) * c + c];
                for (v, &w) in yi.iter_mut().zip(yk) {
                    *v -= lki * w;
                }
            }
            let d = self.l[i * n + i];
            for v in yi.iter_mut() {
                *v /= d;
            }
        }
        Array2::from_shape_vec((n, c), y).map_err(|_| Error::Singular)
    }

    /// Dense inverse `A⁻¹`, formed by solving against the identity.
    pub fn inverse(&self) -> Result<Array2<f64>> {
        let eye = Array2::eye(self.n);
        self.solve(&eye.view())
    }
}

/// Solve the SPD system `a x = b`.
pub fn solve_spd(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<Array2<f64>> {
    Cholesky::new(a)?.solve(b)
}

/// Frobenius norm.
pub fn fro_norm(a: &ArrayView2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `a + scale * I`, consuming `a`.
pub fn add_scaled_identity(mut a: Array2<f64>, scale: f64) -> Array2<f64> {
    let n = a.nrows().min(a.ncols());
    for i in 0..n {
        a[(i, i)] += scale;
    }
    a
}

pub fn all_finite(a: &ArrayView2<f64>) -> bool {
    a.iter().all(|v| v.is_finite())
}
