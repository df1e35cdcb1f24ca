//! Linearisation of the cell about an equilibrium concentration.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::ModelError;
use crate::specmodel::{NonlinearOde, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateLabel {
    Concentration,
    PotentialDifference,
    Integrator,
    /// State of a balanced (mixed) realisation.
    Balanced,
}

/// Single-input single-output state-space model `x' = Ax + Bi`, `V = Cx + Di`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    pub labels: Vec<StateLabel>,
    /// Linearisation concentration, if the system came from the cell model.
    pub c_e: Option<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, d: f64) -> Self {
        let n = a.nrows();
        assert_eq!(a.ncols(), n, "A must be square");
        assert_eq!(b.len(), n, "B length mismatch");
        assert_eq!(c.len(), n, "C length mismatch");
        Self { a, b, c, d, labels: vec![StateLabel::Balanced; n], c_e: None }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Transfer function value `C (sI - A)^-1 B + D`.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        let n = self.dim();
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        let m = DMatrix::from_fn(n, n, |r, c| {
            let v = Complex64::new(-self.a[(r, c)], 0.0);
            if r == c { v + s } else { v }
        });
        let rhs = DVector::from_iterator(n, self.b.iter().map(|v| Complex64::new(*v, 0.0)));
        match m.lu().solve(&rhs) {
            Some(x) => x.iter().zip(self.c.iter()).map(|(xi, ci)| xi * *ci).sum::<Complex64>() + self.d,
            None => Complex64::new(f64::INFINITY, 0.0),
        }
    }

    /// State transformation `x = T z`.
    pub fn similarity(&self, t: &DMatrix<f64>) -> Option<Self> {
        let ti = t.clone().try_inverse()?;
        Some(Self {
            a: &ti * &self.a * t,
            b: &ti * &self.b,
            c: &self.c * t,
            d: self.d,
            labels: vec![StateLabel::Balanced; self.dim()],
            c_e: self.c_e,
        })
    }

    /// Eigenvalues of A.
    pub fn poles(&self) -> Vec<Complex64> {
        if self.dim() == 0 {
            return vec![];
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }

    /// Number of eigenvalues with modulus below `rel_tol * max|lambda|`.
    pub fn integrator_count(&self, rel_tol: f64) -> usize {
        let ev = self.poles();
        let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
        ev.iter().filter(|z| z.norm() <= rel_tol * scale).count()
    }

    /// Output at each time for the constant input `i` from the zero state,
    /// using the exact exponential of the augmented matrix.
    pub fn step_response(&self, i: f64, times: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&self.a);
        aug.view_mut((0, n), (n, 1)).copy_from(&self.b);
        times
            .iter()
            .map(|&t| {
                let e = (&aug * t).exp();
                let x = e.view((0, n), (n, 1)) * i;
                (&self.c * x)[0] + self.d * i
            })
            .collect()
    }
}

/// Where tracking re-linearises the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearizationPoint {
    /// Uniform concentration with the same ionic content as the current state.
    SpatialMean,
    /// The actual concentration profile and potentials.
    #[default]
    Profile,
}

fn labels_for(ode: &NonlinearOde) -> Vec<StateLabel> {
    let l = &ode.layout;
    (0..l.dim())
        .map(|k| if l.c.contains(&k) { StateLabel::Concentration } else { StateLabel::PotentialDifference })
        .collect()
}

/// Linearise about uniform concentration `c_e` and zero potential difference.
///
/// States of the result are deviations from that point.
pub fn linearize(ode: &NonlinearOde, c_e: f64) -> Result<LtiSystem, ModelError> {
    if !(c_e > 0.0) || !c_e.is_finite() {
        return Err(ModelError::Domain(format!("linearisation concentration must be positive, got {c_e}")));
    }
    let x = ode.model.uniform_state(c_e);
    let m = ode.matrices_at(&x)?;
    let l = &ode.layout;
    let mut a = m.am.clone();
    let mut c = m.c_out.clone();
    for k in 0..l.n_c() {
        let mut col = a.column_mut(l.c.start + k);
        col.axpy(1.0 / c_e, &m.b1m.column(k), 1.0);
        c[l.c.start + k] += m.d_ln[k] / c_e;
    }
    Ok(LtiSystem { a, b: m.b2m.clone(), c, d: m.d_i, labels: labels_for(ode), c_e: Some(c_e) })
}

/// Linearise about an arbitrary state `x` (absolute concentrations).
pub fn linearize_at(ode: &NonlinearOde, x: &DVector<f64>, point: LinearizationPoint) -> Result<LtiSystem, ModelError> {
    let l = &ode.layout;
    match point {
        LinearizationPoint::SpatialMean => {
            let volume = ode.ionic_content(&ode.model.uniform_state(1.0));
            linearize(ode, ode.ionic_content(x) / volume)
        }
        LinearizationPoint::Profile => {
            let c = x.rows(l.c.start, l.n_c());
            if let Some(v) = c.iter().find(|v| !(**v > 0.0)) {
                return Err(ModelError::Domain(format!("non-positive concentration {v}")));
            }
            let a = ode.jacobian(x, 0.0)?;
            let (b, cc, d) = if ode.variant == Variant::Baseline {
                let mut cc = ode.m.c_out.clone();
                for k in 0..l.n_c() {
                    cc[l.c.start + k] += ode.m.d_ln[k] / c[k];
                }
                (ode.m.b2m.clone(), cc, ode.m.d_i)
            } else {
                let m = ode.matrices_at(x)?;
                let n = ode.dim();
                let mut cc = RowDVector::zeros(n);
                for k in 0..n {
                    let h = 1e-6 * x[k].abs().max(if l.c.contains(&k) { 1.0 } else { 1e-3 });
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[k] += h;
                    xm[k] -= h;
                    cc[k] = (ode.output(&xp, 0.0)? - ode.output(&xm, 0.0)?) / (2.0 * h);
                }
                (m.b2m.clone(), cc, m.d_i)
            };
            let c_mean = ode.ionic_content(x) / ode.ionic_content(&ode.model.uniform_state(1.0));
            Ok(LtiSystem { a, b, c: cc, d, labels: labels_for(ode), c_e: Some(c_mean) })
        }
    }
}
