//! Positive-real test.

use num_complex::Complex64;
use serde::Serialize;

use crate::mor::log_grid;
use crate::rational::RationalFunction;

/// Absolute floor on `Re G(jw)`.
pub const TOL_PR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum PrVerdict {
    Pass,
    Fail(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrReport {
    pub verdict: PrVerdict,
    /// `Re G(s) >= 0` on the sampled non-negative real axis.
    pub real_axis_condition: bool,
    /// Smallest sampled `Re G(jw)`.
    pub min_real_part: f64,
}

impl PrReport {
    pub fn passed(&self) -> bool {
        self.verdict == PrVerdict::Pass
    }
}

/// Residue of a simple pole `p` in zero-pole-gain form.
pub fn residue(g: &RationalFunction, index: usize) -> Complex64 {
    let p = g.poles[index];
    let mut v = Complex64::new(g.gain, 0.0);
    for z in &g.zeros {
        v *= p - z;
    }
    for (k, q) in g.poles.iter().enumerate() {
        if k != index {
            v /= p - q;
        }
    }
    v
}

fn sample_frequencies(g: &RationalFunction) -> Vec<f64> {
    let mags: Vec<f64> = g.zeros.iter().chain(g.poles.iter()).map(|z| z.norm()).filter(|m| *m > 0.0).collect();
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min).min(1.0) * 1e-3;
    let hi = mags.iter().copied().fold(0.0, f64::max).max(1.0) * 1e3;
    let mut w = log_grid(lo, hi, 2000);
    w.extend(mags.iter().copied());
    w.extend(g.zeros.iter().chain(g.poles.iter()).map(|z| z.im.abs()).filter(|m| *m > 0.0));
    w.push(0.0);
    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
    w
}

/// Standard positive-real test for a proper real rational function.
pub fn is_positive_real(g: &RationalFunction) -> PrReport {
    let scale = g.scale();
    let axis_tol = 1e-9 * scale;
    let mut reason = None;

    if g.gain < 0.0 && g.zeros.is_empty() && g.poles.is_empty() {
        reason = Some(format!("negative constant {}", g.gain));
    }
    if let Some(p) = g.poles.iter().find(|p| p.re > axis_tol) {
        reason.get_or_insert_with(|| format!("pole in the right half-plane at {p}"));
    }
    let axis: Vec<usize> = (0..g.poles.len()).filter(|&k| g.poles[k].re.abs() <= axis_tol).collect();
    for &k in &axis {
        let p = g.poles[k];
        let repeated = g.poles.iter().enumerate().any(|(j, q)| j != k && (q - p).norm() <= axis_tol.max(1e-9 * p.norm()));
        if repeated {
            reason.get_or_insert_with(|| format!("repeated imaginary-axis pole at {p}"));
            continue;
        }
        let r = residue(g, k);
        let tol = 1e-9 * r.norm().max(f64::MIN_POSITIVE);
        if !(r.re > 0.0) || r.im.abs() > tol.max(1e-6 * r.re.abs()) {
            reason.get_or_insert_with(|| format!("imaginary-axis pole at {p} has residue {r}"));
        }
    }

    let on_pole = |w: f64| axis.iter().any(|&k| (g.poles[k].im.abs() - w).abs() <= 1e-9 * w.max(scale * 1e-9));
    let mut min_re = f64::INFINITY;
    let mut arg = 0.0;
    for w in sample_frequencies(g) {
        if on_pole(w) {
            continue;
        }
        let v = g.eval(Complex64::new(0.0, w)).re;
        if v < min_re {
            min_re = v;
            arg = w;
        }
    }
    let inf = g.value_at_infinity();
    if inf < min_re {
        min_re = inf;
        arg = f64::INFINITY;
    }
    if min_re < -TOL_PR {
        reason.get_or_insert_with(|| format!("Re G(jw) = {min_re:e} < 0 at w = {arg:e}"));
    }

    let mut real_axis_condition = true;
    let mut sigmas = log_grid(1e-3 * scale.min(1.0), 1e3 * scale.max(1.0), 400);
    sigmas.push(0.0);
    for s in sigmas {
        if g.poles.iter().any(|p| (p - Complex64::new(s, 0.0)).norm() <= 1e-12 * scale) {
            continue;
        }
        let v = g.eval(Complex64::new(s, 0.0));
        if v.re < -TOL_PR || v.im.abs() > 1e-9 * v.norm().max(1.0) {
            real_axis_condition = false;
        }
    }

    PrReport {
        verdict: match reason {
            None => PrVerdict::Pass,
            Some(r) => PrVerdict::Fail(r),
        },
        real_axis_condition,
        min_real_part: min_re,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allpass_like_fails() {
        let g = RationalFunction::from_real_factors(&[-1.0], &[1.0], 1.0).unwrap();
        let r = is_positive_real(&g);
        assert!(!r.passed());
        assert!(r.min_real_part < 0.0);
    }

    #[test]
    fn constant_resistance_passes() {
        assert!(is_positive_real(&RationalFunction::constant(2.5)).passed());
        assert!(!is_positive_real(&RationalFunction::constant(-1.0)).passed());
    }

    #[test]
    fn integrator_passes_and_unstable_fails() {
        let g = RationalFunction::from_real_factors(&[], &[0.0], 1.0).unwrap();
        assert!(is_positive_real(&g).passed());
        let g = RationalFunction::from_real_factors(&[], &[-1.0], 1.0).unwrap();
        assert!(!is_positive_real(&g).passed());
        let g = RationalFunction::from_real_factors(&[], &[0.0, 0.0], 1.0).unwrap();
        assert!(!is_positive_real(&g).passed());
        let g = RationalFunction::from_real_factors(&[], &[0.0], -1.0).unwrap();
        assert!(!is_positive_real(&g).passed());
    }

    #[test]
    fn slow_pole_with_negative_residue_fails() {
        // residue at -3.27e-6 is about -3.5, so Re G(jw) < 0 below ~1e-3 rad/s
        let g = RationalFunction::from_real_factors(&[4.76, 0.3, 2.95e-5, 3.27e-5], &[0.0, 3.74, 2.9e-5, 3.27e-6], 1.0).unwrap();
        let r = is_positive_real(&g);
        assert!(!r.passed());
        assert!((r.min_real_part + 1.0712e6).abs() < 1e3);
    }

    #[test]
    fn origin_cancellation_then_pass() {
        let ac = RationalFunction::from_real_factors(
            &[0.0, 0.0, 6.04, 1.46, 0.27, 0.0031],
            &[0.0, 0.0, 0.0, 5.17, 1.29, 0.003],
            1.0,
        )
        .unwrap();
        assert_eq!(ac.cancellations.len(), 2);
        // slow zero sits just above its pole: residue -1.18e-2 at -0.003
        let r = is_positive_real(&ac);
        assert!(!r.passed() && r.min_real_part < -2.6);
        let interlaced = RationalFunction::from_real_factors(&[6.56, 1.59, 0.29], &[0.0, 5.62, 1.4], 1.0).unwrap();
        assert!(is_positive_real(&interlaced).passed());
    }
}
