//! Fixtures shared by the criterion benches.

use circsynth_core::{build_ode, linearize, LtiSystem, ModelParams, RationalFunction, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Linearised cell at rest on the default grid.
pub fn cell_system() -> LtiSystem {
    let p = ModelParams::default();
    linearize(&build_ode(&p, Variant::Baseline).unwrap(), p.c_init).unwrap()
}

/// RC impedance with `n` finite poles, a pole at the origin and a series resistance.
pub fn rc_impedance(n: usize, seed: u64) -> RationalFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rates: Vec<f64> = (0..2 * n).map(|_| 10f64.powf(rng.gen_range(-2.0..2.0))).collect();
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut poles = vec![0.0];
    poles.extend(rates.iter().skip(1).step_by(2));
    let zeros: Vec<f64> = rates.iter().step_by(2).copied().collect();
    RationalFunction::from_real_factors(&zeros, &poles, 1e-2).unwrap()
}
