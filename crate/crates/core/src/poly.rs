//! Real polynomials as ascending coefficient vectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn degree(p: &[f64]) -> Option<usize> {
    p.iter().rposition(|c| *c != 0.0)
}

pub fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.len() > 1 && *p.last().unwrap() == 0.0 {
        p.pop();
    }
    p
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n).map(|k| a.get(k).copied().unwrap_or(0.0) + b.get(k).copied().unwrap_or(0.0)).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|c| c * s).collect()
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c)
}

/// Monic polynomial with the given roots; imaginary round-off is dropped.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (k, c) in p.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c * r;
        }
        p = next;
    }
    p.iter().map(|c| c.re).collect()
}

/// Roots via companion-matrix eigenvalues, polished by Newton steps.
pub fn roots(p: &[f64]) -> Vec<Complex64> {
    let Some(n) = degree(p) else { return vec![] };
    // factor out exact zero roots
    let lead = p.iter().position(|c| *c != 0.0).unwrap();
    let mut out = vec![Complex64::new(0.0, 0.0); lead];
    let q: Vec<f64> = p[lead..=n].to_vec();
    let m = q.len() - 1;
    if m == 0 {
        return out;
    }
    // substitute s = rho t so the root magnitudes cluster around one
    let rho = (q[0] / q[m]).abs().powf(1.0 / m as f64);
    let rho = if rho.is_finite() && rho > 0.0 { rho } else { 1.0 };
    let qs: Vec<f64> = q.iter().enumerate().map(|(k, c)| c * rho.powi(k as i32)).collect();
    let an = qs[m];
    let mut comp = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        comp[(0, k)] = -qs[m - 1 - k] / an;
    }
    for k in 1..m {
        comp[(k, k - 1)] = 1.0;
    }
    let dq: Vec<f64> = (1..=m).map(|k| q[k] * k as f64).collect();
    for z0 in comp.complex_eigenvalues().iter() {
        let mut z = *z0 * rho;
        for _ in 0..8 {
            let f = eval(&q, z);
            let d = eval(&dq, z);
            if d.norm() == 0.0 {
                break;
            }
            let step = f / d;
            let cand = z - step;
            if eval(&q, cand).norm() <= f.norm() {
                z = cand;
            } else {
                break;
            }
        }
        if z.im.abs() <= 1e-12 * z.norm() {
            z.im = 0.0;
        }
        out.push(z);
    }
    out
}
