#![allow(dead_code)]

use circsynth_core::{DMatrix, DVector, LtiSystem, RationalFunction, RowDVector};
use rand::Rng;

/// Random RC impedance with `n` poles: interlaced real roots, lowest critical
/// frequency a pole, optional origin pole and optional high-frequency resistance.
pub fn random_rc<R: Rng>(rng: &mut R, n: usize) -> RationalFunction {
    let origin = rng.gen_bool(0.5);
    let k_inf = rng.gen_bool(0.5);
    let n_pos = if origin { n - 1 } else { n };
    let n_zero = if k_inf { n } else { n - 1 };
    let mut rates: Vec<f64> = (0..n_pos + n_zero).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut poles = Vec::new();
    let mut zeros = Vec::new();
    if origin {
        poles.push(0.0);
    }
    let mut pole_next = !origin;
    for r in rates {
        if pole_next { poles.push(r) } else { zeros.push(r) }
        pole_next = !pole_next;
    }
    RationalFunction::from_real_factors(&zeros, &poles, 10f64.powf(rng.gen_range(-3.0..1.0))).unwrap()
}

/// Random stable SISO system with spectral abscissa <= -0.05.
pub fn random_stable<R: Rng>(rng: &mut R, n: usize) -> LtiSystem {
    let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let abscissa = a.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let shift = abscissa + 0.05 + rng.gen_range(0.0..1.0);
    for k in 0..n {
        a[(k, k)] -= shift;
    }
    let b = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let c = RowDVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    LtiSystem::new(a, b, c, rng.gen_range(-1.0..1.0))
}

/// Relative error of `f` against `g` at `s`.
pub fn rel_err(f: circsynth_core::Complex64, g: circsynth_core::Complex64) -> f64 {
    (f - g).norm() / g.norm()
}
