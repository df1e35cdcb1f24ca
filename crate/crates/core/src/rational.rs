//! Rational impedance functions in coefficient and zero-pole-gain form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::SynthesisError;
use crate::linearize::LtiSystem;
use crate::poly;

/// Relative root distance below which a zero cancels a pole.
pub const TOL_CANCEL: f64 = 1e-7;
/// Relative distance below which a surviving pair is reported as nearly cancelling.
pub const NEAR_CANCEL: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub zero: (f64, f64),
    pub pole: (f64, f64),
    pub relative_distance: f64,
}

/// `G(s) = gain * prod(s - z) / prod(s - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFunction {
    /// Numerator coefficients, ascending powers.
    pub num: Vec<f64>,
    /// Monic denominator coefficients, ascending powers.
    pub den: Vec<f64>,
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub gain: f64,
    /// Pairs removed during normalisation.
    pub cancellations: Vec<RootPair>,
    /// Pairs kept but closer than [`NEAR_CANCEL`].
    pub near_cancellations: Vec<RootPair>,
}

fn c2(z: Complex64) -> (f64, f64) {
    (z.re, z.im)
}

impl RationalFunction {
    /// Build from zeros, poles and gain, cancelling common roots within `tol`.
    pub fn from_zpk_tol(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64, tol: f64) -> Result<Self, SynthesisError> {
        if zeros.len() > poles.len() {
            return Err(SynthesisError::Improper);
        }
        if gain == 0.0 {
            return Ok(Self::constant(0.0));
        }
        let scale = zeros.iter().chain(poles.iter()).map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let floor = 1e-6 * scale;
        let mut zeros = zeros;
        let mut poles = poles;
        let mut cancellations = Vec::new();
        loop {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, z) in zeros.iter().enumerate() {
                for (j, p) in poles.iter().enumerate() {
                    let rel = (z - p).norm() / z.norm().max(p.norm()).max(floor);
                    if rel <= tol && best.is_none_or(|b| rel < b.2) {
                        best = Some((i, j, rel));
                    }
                }
            }
            match best {
                Some((i, j, rel)) => {
                    let z = zeros.remove(i);
                    let p = poles.remove(j);
                    cancellations.push(RootPair { zero: c2(z), pole: c2(p), relative_distance: rel });
                }
                None => break,
            }
        }
        let mut near_cancellations = Vec::new();
        for z in &zeros {
            for p in &poles {
                let rel = (z - p).norm() / z.norm().max(p.norm()).max(floor);
                if rel < NEAR_CANCEL {
                    near_cancellations.push(RootPair { zero: c2(*z), pole: c2(*p), relative_distance: rel });
                }
            }
        }
        let num = poly::scale(&poly::from_roots(&zeros), gain);
        let den = poly::from_roots(&poles);
        Ok(Self { num, den, zeros, poles, gain, cancellations, near_cancellations })
    }

    pub fn from_zpk(zeros: Vec<Complex64>, poles: Vec<Complex64>, gain: f64) -> Result<Self, SynthesisError> {
        Self::from_zpk_tol(zeros, poles, gain, TOL_CANCEL)
    }

    /// Convenience for real roots given as positive time-constant rates: `(s + a)`.
    pub fn from_real_factors(zero_rates: &[f64], pole_rates: &[f64], gain: f64) -> Result<Self, SynthesisError> {
        let z = zero_rates.iter().map(|a| Complex64::new(-a, 0.0)).collect();
        let p = pole_rates.iter().map(|a| Complex64::new(-a, 0.0)).collect();
        Self::from_zpk(z, p, gain)
    }

    /// Build from ascending coefficients.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self, SynthesisError> {
        let dn = poly::degree(num);
        let dd = poly::degree(den).ok_or_else(|| SynthesisError::PoleStructure("zero denominator".into()))?;
        let Some(dn) = dn else { return Ok(Self::constant(0.0)) };
        if dn > dd {
            return Err(SynthesisError::Improper);
        }
        let gain = num[dn] / den[dd];
        Self::from_zpk(poly::roots(&num[..=dn]), poly::roots(&den[..=dd]), gain)
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
            zeros: vec![],
            poles: vec![],
            gain: k,
            cancellations: vec![],
            near_cancellations: vec![],
        }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let mut v = Complex64::new(self.gain, 0.0);
        for z in &self.zeros {
            v *= s - z;
        }
        for p in &self.poles {
            v /= s - p;
        }
        v
    }

    /// `lim_{s -> inf} G(s)`.
    pub fn value_at_infinity(&self) -> f64 {
        if self.zeros.len() == self.poles.len() { self.gain } else { 0.0 }
    }

    pub fn num_degree(&self) -> usize {
        self.zeros.len()
    }

    pub fn den_degree(&self) -> usize {
        self.poles.len()
    }

    /// Largest root modulus, or 1 for constants.
    pub fn scale(&self) -> f64 {
        let s = self.zeros.iter().chain(self.poles.iter()).map(|z| z.norm()).fold(0.0, f64::max);
        if s > 0.0 { s } else { 1.0 }
    }
}

/// Exact rational equivalent of a SISO state-space model.
pub fn ss_to_tf(sys: &LtiSystem) -> RationalFunction {
    let n = sys.dim();
    if n == 0 {
        return RationalFunction::constant(sys.d);
    }
    let poles = sys.poles();
    let result = if sys.d != 0.0 {
        // zeros are the eigenvalues of A - B C / D
        let bc = &sys.b * &sys.c;
        let az: DMatrix<f64> = &sys.a - bc / sys.d;
        let zeros: Vec<Complex64> = az.complex_eigenvalues().iter().copied().collect();
        RationalFunction::from_zpk(zeros, poles, sys.d)
    } else {
        // numerator = det(sI - A + BC) - det(sI - A)
        let bc = &sys.b * &sys.c;
        let az: DMatrix<f64> = &sys.a - bc;
        let pz: Vec<Complex64> = az.complex_eigenvalues().iter().copied().collect();
        let num_full = poly::add(&poly::from_roots(&pz), &poly::scale(&poly::from_roots(&poles), -1.0));
        let cmax = num_full.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        // Markov parameters give the true relative degree
        let mut k_lead = None;
        let mut v = sys.b.clone();
        let scale_ab = sys.a.norm().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let mk = (&sys.c * &v)[0];
            let ref_mag = sys.c.norm() * v.norm();
            if mk.abs() > 1e-10 * ref_mag && ref_mag > 0.0 {
                k_lead = Some(k);
                break;
            }
            v = &sys.a * v / scale_ab;
        }
        match k_lead {
            None => Ok(RationalFunction::constant(0.0)),
            Some(k) if cmax > 0.0 => {
                let deg = n - 1 - k;
                let num = &num_full[..=deg];
                let gain = num[deg];
                Ok(RationalFunction::from_zpk(poly::roots(num), poles, gain).expect("proper by construction"))
            }
            Some(_) => Ok(RationalFunction::constant(0.0)),
        }
    };
    result.expect("state-space models are proper")
}
