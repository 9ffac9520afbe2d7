//! Small dense symmetric-matrix helpers used when constructing test
//! problems: Cholesky factorization, triangular solves, and extreme
//! eigenvalues by (inverse) power iteration. Matrices here are desk-scale
//! (a few hundred rows at most).

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
}

impl Cholesky {
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::invalid("matrix must be square"));
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::PreconditionViolation(
                    "matrix is not positive definite".into(),
                ));
            }
            l[(j, j)] = d.sqrt();
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / l[(j, j)];
            }
        }
        Ok(Self { l })
    }

    /// Solves `A x = b` using the stored factor.
    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.l.nrows();
        let mut y = b.to_owned();
        for i in 0..n {
            for k in 0..i {
                let t = self.l[(i, k)] * y[k];
                y[i] -= t;
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let t = self.l[(k, i)] * y[k];
                y[i] -= t;
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }
}

/// Largest absolute eigenvalue of a symmetric matrix (its spectral norm) by
/// power iteration with a fixed deterministic start.
pub fn spectral_norm_sym(a: ArrayView2<f64>, iters: usize) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = Array1::from_iter((0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()));
    let mut norm = v.dot(&v).sqrt();
    v /= norm;
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = a.dot(&v);
        norm = w.dot(&w).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = v.dot(&w).abs();
        v = w / norm;
    }
    lambda.max(norm)
}

/// Smallest eigenvalue of a symmetric positive-definite matrix via inverse
/// power iteration on its Cholesky factor.
pub fn min_eig_spd(a: ArrayView2<f64>, iters: usize) -> Result<f64> {
    let chol = Cholesky::new(a)?;
    let n = a.nrows();
    let mut v = Array1::from_iter((0..n).map(|i| 1.0 + (i as f64 * 0.3).cos()));
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut rayleigh = v.dot(&a.dot(&v));
    for _ in 0..iters {
        let w = chol.solve(v.view());
        let norm = w.dot(&w).sqrt();
        v = w / norm;
        rayleigh = v.dot(&a.dot(&v));
    }
    Ok(rayleigh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
        let chol = Cholesky::new(a.view()).unwrap();
        let b = array![1.0, 2.0, 3.0];
        let x = chol.solve(b.view());
        let r = &a.dot(&x) - &b;
        assert!(r.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            Cholesky::new(a.view()),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn extreme_eigenvalues_of_known_spectrum() {
        // Householder rotation of a diagonal keeps the spectrum.
        let d = array![0.5, 1.5, 4.0];
        let n = d.len();
        let u = {
            let mut u: Array1<f64> = Array1::from(vec![1.0, 2.0, -1.0]);
            let norm = u.dot(&u).sqrt();
            u /= norm;
            u
        };
        let mut a = Array2::<f64>::zeros((n, n));
        // H = I - 2uu^T, A = H diag(d) H
        let mut h = Array2::<f64>::eye(n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] -= 2.0 * u[i] * u[j];
            }
        }
        let hd = h.dot(&Array2::from_diag(&d));
        a.assign(&hd.dot(&h));
        assert!((spectral_norm_sym(a.view(), 400) - 4.0).abs() < 1e-9);
        assert!((min_eig_spd(a.view(), 400).unwrap() - 0.5).abs() < 1e-9);
    }
}
