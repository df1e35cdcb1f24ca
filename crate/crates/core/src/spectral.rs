//! Chebyshev–Gauss–Lobatto collocation.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::ModelError;

/// Collocation nodes with first and second differentiation matrices.
#[derive(Debug, Clone)]
pub struct DiffMatrix {
    /// Polynomial order; there are `order + 1` nodes.
    pub order: usize,
    /// Nodes in ascending order, endpoints included.
    pub nodes: Vec<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
}

impl DiffMatrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Chebyshev–Gauss–Lobatto nodes on `[a, b]` with differentiation matrices.
///
/// Nodes are `a + (b-a)(1 - cos(j pi / n))/2`, ascending. Diagonal entries use
/// the negative row sum so that constants are differentiated exactly.
pub fn cheb_diff_matrix(n: usize, a: f64, b: f64) -> Result<DiffMatrix, ModelError> {
    if n < 2 {
        return Err(ModelError::InvalidOrder(n));
    }
    if !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(ModelError::InvalidInterval { a, b });
    }
    let m = n + 1;
    let xi: Vec<f64> = (0..m).map(|j| -(PI * j as f64 / n as f64).cos()).collect();
    let c: Vec<f64> = (0..m)
        .map(|j| {
            let w = if j == 0 || j == n { 2.0 } else { 1.0 };
            if j % 2 == 0 { w } else { -w }
        })
        .collect();
    let mut d = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let mut s = 0.0;
        for j in 0..m {
            if i != j {
                let v = c[i] / c[j] / (xi[i] - xi[j]);
                d[(i, j)] = v;
                s += v;
            }
        }
        d[(i, i)] = -s;
    }
    let scale = 2.0 / (b - a);
    let d1 = d * scale;
    let mut d2 = &d1 * &d1;
    // exact row sums for D2 as well
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| d2[(i, j)]).sum();
        d2[(i, i)] = -off;
    }
    let nodes = xi.iter().map(|x| a + (b - a) * (x + 1.0) / 2.0).collect();
    Ok(DiffMatrix { order: n, nodes, d1, d2 })
}

/// Clenshaw–Curtis quadrature weights on the nodes of `cheb_diff_matrix(n, a, b)`.
pub fn clenshaw_curtis_weights(n: usize, a: f64, b: f64) -> DVector<f64> {
    let m = n + 1;
    let mut w = DVector::zeros(m);
    let nf = n as f64;
    for j in 0..m {
        let theta = PI * j as f64 / nf;
        let mut s = 0.0;
        for k in 0..=n / 2 {
            let bk = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            let kk = 2.0 * k as f64;
            s += bk / (1.0 - kk * kk) * (kk * theta).cos();
        }
        let cj = if j == 0 || j == n { 1.0 } else { 2.0 };
        w[j] = cj / nf * s;
    }
    w * ((b - a) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lagrange_derivative(nodes: &[f64], i: usize, j: usize) -> f64 {
        // d/dx of the j-th Lagrange basis polynomial evaluated at nodes[i]
        let n = nodes.len();
        let lj = |x: f64| -> f64 {
            let mut total = 0.0;
            for k in 0..n {
                if k == j {
                    continue;
                }
                let mut p = 1.0 / (nodes[j] - nodes[k]);
                for m in 0..n {
                    if m != j && m != k {
                        p *= (x - nodes[m]) / (nodes[j] - nodes[m]);
                    }
                }
                total += p;
            }
            total
        };
        lj(nodes[i])
    }

    #[test]
    fn n2_matches_lagrange() {
        let d = cheb_diff_matrix(2, -1.0, 1.0).unwrap();
        assert!((d.nodes[0] + 1.0).abs() < 1e-15 && d.nodes[1].abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                let o = lagrange_derivative(&d.nodes, i, j);
                assert!((d.d1[(i, j)] - o).abs() < 1e-13, "{i},{j}");
            }
        }
        assert!((d.d1[(1, 0)] + 0.5).abs() < 1e-15);
        assert!((d.d1[(1, 2)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lagrange_oracle_higher_order() {
        let d = cheb_diff_matrix(7, 0.3, 1.1).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let o = lagrange_derivative(&d.nodes, i, j);
                assert!((d.d1[(i, j)] - o).abs() < 1e-9 * (1.0 + o.abs()));
            }
        }
    }

    #[test]
    fn second_derivative_of_square() {
        let d = cheb_diff_matrix(8, 0.0, 1.0).unwrap();
        let v = DVector::from_iterator(9, d.nodes.iter().map(|x| x * x));
        let r = &d.d2 * v;
        for x in r.iter() {
            assert!((x - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn constants_vanish() {
        let d = cheb_diff_matrix(5, 2.0, 3.0).unwrap();
        let r = &d.d1 * DVector::from_element(6, 4.2);
        assert!(r.amax() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(cheb_diff_matrix(1, 0.0, 1.0).unwrap_err(), ModelError::InvalidOrder(1));
        assert!(cheb_diff_matrix(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_integrates_polynomials() {
        let (a, b) = (0.5, 2.0);
        let w = clenshaw_curtis_weights(6, a, b);
        let d = cheb_diff_matrix(6, a, b).unwrap();
        for k in 0..=6 {
            let q: f64 = d.nodes.iter().zip(w.iter()).map(|(x, w)| w * x.powi(k)).sum();
            let exact = (b.powi(k + 1) - a.powi(k + 1)) / (k + 1) as f64;
            assert!((q - exact).abs() < 1e-12 * exact.abs().max(1.0), "k={k}");
        }
    }
}
