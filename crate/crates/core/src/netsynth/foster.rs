//! Foster-I partial fractions of RC impedances.

use serde::Serialize;

use crate::error::SynthesisError;
use crate::netsynth::passivity::residue;
use crate::rational::RationalFunction;

/// `G(s) = k0/s + sum k_i/(s + sigma_i) + k_inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FosterExpansion {
    pub k0: f64,
    /// `(k_i, sigma_i)` sorted by decreasing `sigma_i`.
    pub terms: Vec<(f64, f64)>,
    pub k_inf: f64,
}

/// Pole checks shared by the Foster and Cauer expansions: real, simple, not positive.
/// Returns the pole rates `-p` (0 for the origin) in pole order.
pub(crate) fn rc_pole_rates(g: &RationalFunction) -> Result<Vec<f64>, SynthesisError> {
    let scale = g.scale();
    let tol = 1e-9 * scale;
    let mut rates = Vec::with_capacity(g.poles.len());
    for p in &g.poles {
        if p.im.abs() > tol {
            return Err(SynthesisError::PoleStructure(format!("complex pole {p}")));
        }
        if p.re > tol {
            return Err(SynthesisError::PoleStructure(format!("right half-plane pole {p}")));
        }
        rates.push(if p.norm() <= tol { 0.0 } else { -p.re });
    }
    for i in 0..rates.len() {
        for j in i + 1..rates.len() {
            if (rates[i] - rates[j]).abs() <= tol.max(1e-9 * rates[i].max(rates[j])) {
                return Err(SynthesisError::PoleStructure(format!("repeated pole at {}", -rates[i])));
            }
        }
    }
    Ok(rates)
}

pub fn foster_expand(g: &RationalFunction) -> Result<FosterExpansion, SynthesisError> {
    let rates = rc_pole_rates(g)?;
    let mut k0 = 0.0;
    let mut terms = Vec::new();
    for (idx, &sigma) in rates.iter().enumerate() {
        let k = residue(g, idx).re;
        if !(k > 0.0) {
            return Err(SynthesisError::NotRc(format!("residue {k:e} at pole {:e}", -sigma)));
        }
        if sigma == 0.0 {
            k0 = k;
        } else {
            terms.push((k, sigma));
        }
    }
    let k_inf = g.value_at_infinity();
    if k_inf < 0.0 {
        return Err(SynthesisError::NotRc(format!("negative high-frequency resistance {k_inf:e}")));
    }
    terms.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    Ok(FosterExpansion { k0, terms, k_inf })
}
