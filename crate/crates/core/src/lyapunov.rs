//! Continuous Lyapunov equations by complex Schur elimination.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::ReductionError;

/// Largest real part of the spectrum of `a`.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Solve `A X + X A^T + Q = 0` for Hurwitz `A` and symmetric `Q`.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, ReductionError> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(ReductionError::Numerical("dimension mismatch".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let (u, t) = ac
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| ReductionError::Numerical("Schur decomposition did not converge".into()))?
        .unpack();
    let max_re = (0..n).map(|k| t[(k, k)].re).fold(f64::NEG_INFINITY, f64::max);
    if !(max_re < 0.0) {
        return Err(ReductionError::NotStable(max_re));
    }
    let qc = q.map(|v| Complex64::new(v, 0.0));
    let qt = u.adjoint() * qc * &u;
    // T Y + Y T^H = -Qt, columns from last to first
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for j in (0..n).rev() {
        let mut rhs: Vec<Complex64> = (0..n).map(|i| -qt[(i, j)]).collect();
        for k in j + 1..n {
            let tjk = t[(j, k)].conj();
            if tjk != Complex64::new(0.0, 0.0) {
                for i in 0..n {
                    rhs[i] -= tjk * y[(i, k)];
                }
            }
        }
        let shift = t[(j, j)].conj();
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for k in i + 1..n {
                s -= t[(i, k)] * y[(k, j)];
            }
            y[(i, j)] = s / (t[(i, i)] + shift);
        }
    }
    let x = &u * y * u.adjoint();
    let xr = x.map(|z| z.re);
    Ok((&xr + xr.transpose()) * 0.5)
}

/// `||A X + X A^T + Q|| / ||Q||`.
pub fn lyapunov_residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    let r = a * x + x * a.transpose() + q;
    r.norm() / q.norm().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_identity() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let q = DMatrix::<f64>::identity(2, 2) * 2.0;
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!((x - DMatrix::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn decoupled_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![-1.0, -2.0]);
        let x = solve_lyapunov(&a, &DMatrix::identity(2, 2)).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((x[(1, 1)] - 0.25).abs() < 1e-14);
        assert!(x[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn complex_pair_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-0.1, 5.0, 0.3, -5.0, -0.1, 1.0, 0.0, 0.0, -2.0]);
        let q = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.1, 0.0, 0.1, 0.5]);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!(lyapunov_residual(&a, &x, &q) < 1e-13);
    }

    #[test]
    fn unstable_is_rejected() {
        let a = DMatrix::from_diagonal(&nalgebra::dvector![-1.0, 0.5]);
        assert!(matches!(solve_lyapunov(&a, &DMatrix::identity(2, 2)), Err(ReductionError::NotStable(_))));
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(solve_lyapunov(&z, &DMatrix::identity(2, 2)).is_err());
    }
}
