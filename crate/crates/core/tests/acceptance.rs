//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

mod common;

use std::time::Instant;

use circsynth_core::freqsim::{bode, default_grid, simulate, track_parameters, Profile, SimOptions, TrackOptions};
use circsynth_core::mor::{balance_and_truncate, hinf_distance, lump_integrators, split_integrators, TOL_INT};
use circsynth_core::netsynth::{
    cauer_expand, circuit_impedance, foster_expand, is_positive_real, synth_dynamic, CauerKind, Circuit,
};
use circsynth_core::spectral::cheb_diff_matrix;
use circsynth_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn baseline() -> (ModelParams, NonlinearOde, LtiSystem) {
    let p = ModelParams::default();
    let ode = build_ode(&p, Variant::Baseline).unwrap();
    let sys = linearize(&ode, p.c_init).unwrap();
    (p, ode, sys)
}

fn round_trip() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut all_positive = true;
    let mut failures = Vec::new();
    for k in 0..100 {
        let n = 1 + k % 8;
        let g = common::random_rc(&mut rng, n);
        let points: Vec<Complex64> = (0..64)
            .map(|_| Complex64::new(rng.gen_range(0.0..1.0) * 10f64.powf(rng.gen_range(-3.0..2.0)), 10f64.powf(rng.gen_range(-3.0..3.0))))
            .collect();
        let circuits: [Result<Circuit, _>; 3] =
            [synth_dynamic(&g), cauer_expand(&g, CauerKind::First), cauer_expand(&g, CauerKind::Second)];
        for c in circuits {
            match c {
                Ok(c) => {
                    all_positive &= c.is_valid();
                    let z = circuit_impedance(&c);
                    for s in &points {
                        worst = worst.max(common::rel_err(z.eval(*s), g.eval(*s)));
                    }
                }
                Err(e) => failures.push(format!("order {n}: {e}")),
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        failures.is_empty() && all_positive && worst < 1e-9 && secs < 10.0,
        format!(
            "worst rel err {worst:.2e} (< 1e-9), components positive {all_positive}, synthesis failures {}, {secs:.2} s (< 10 s)",
            failures.len()
        ),
    )
}

fn reference_impedance() -> RationalFunction {
    RationalFunction::from_real_factors(&[6.56, 1.59, 0.29], &[0.0, 5.62, 1.4], 1.0).unwrap()
}

fn foster_rules() -> Verdict {
    let f = foster_expand(&reference_impedance()).unwrap();
    let mut taus: Vec<f64> = f.terms.iter().map(|(_, s)| 1.0 / s).collect();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let algebra = (f.k_inf - 1.0).abs() < 1e-6
        && taus.len() == 2
        && (taus[0] - 1.0 / 5.62).abs() < 1e-6
        && (taus[1] - 1.0 / 1.4).abs() < 1e-6;
    // reference branch products R1*C1 and R2*C2
    let table = [3.75e-4 * 475.0, 3.15e-4 * 2.26e3];
    let consistent = taus.len() == 2 && (0..2).all(|k| (taus[k] / table[k] - 1.0).abs() < 0.01);
    verdict(
        algebra && consistent,
        format!("k_inf {:.9}, time constants {:?} s, table products {:?} s", f.k_inf, taus, table),
    )
}

fn pipeline_poles() -> Verdict {
    let start = Instant::now();
    let (_, _, sys) = baseline();
    let (red, _) = reduce(&sys, 3).unwrap();
    let mut rates: Vec<f64> = red.poles().iter().filter(|p| p.norm() > 1e-6).map(|p| -p.re).collect();
    rates.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let secs = start.elapsed().as_secs_f64();
    let ok = rates.len() >= 2 && (rates[0] / 5.62 - 1.0).abs() < 0.25 && (rates[1] / 1.4 - 1.0).abs() < 0.25 && secs < 30.0;
    verdict(ok, format!("dominant stable poles {:?} vs [5.62, 1.4] (25%), {secs:.2} s", &rates[..rates.len().min(2)]))
}

fn bound_holds(sys: &LtiSystem) -> Result<(usize, f64), String> {
    let (_, bal) = balance_and_truncate(sys, 1).map_err(|e| e.to_string())?;
    let mut checked = 0;
    let mut slack = f64::INFINITY;
    for r in 1..sys.dim() {
        // capping or tie extension may change the kept order; the bound uses the kept one
        let (red, b) = balance_and_truncate(sys, r).map_err(|e| e.to_string())?;
        let sigma = bal.hsv_all.get(b.r).copied().unwrap_or(0.0);
        let err = hinf_distance(sys, &red);
        slack = slack.min(err - sigma);
        checked += 1;
        if err < sigma - 1e-9 {
            return Err(format!("r = {}: error {err:e} < sigma {sigma:e}", b.r));
        }
    }
    Ok((checked, slack))
}

fn bt_bound() -> Verdict {
    let (_, _, sys) = baseline();
    let split = split_integrators(&sys, TOL_INT).unwrap();
    let mut problems = Vec::new();
    let mut checked = 0;
    let mut slack = f64::INFINITY;
    match bound_holds(&split.hurwitz) {
        Ok((c, s)) => {
            checked += c;
            slack = slack.min(s);
        }
        Err(e) => problems.push(format!("physical: {e}")),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..50 {
        let sys = common::random_stable(&mut rng, 2 + k % 7);
        match bound_holds(&sys) {
            Ok((c, s)) => {
                checked += c;
                slack = slack.min(s);
            }
            Err(e) => problems.push(format!("random #{k}: {e}")),
        }
    }
    verdict(
        problems.is_empty(),
        format!("{checked} (system, r) pairs, min(error - sigma_r+1) {slack:.2e}{}", if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }),
    )
}

fn integrators() -> Verdict {
    let (_, _, sys) = baseline();
    let count = sys.integrator_count(TOL_INT);
    let (_, rep) = reduce(&sys, 3).unwrap();
    let ok = count == 3 && rep.lumped_c > 0.0 && rep.lumped_c / 1.05e3 < 3.0 && 1.05e3 / rep.lumped_c < 3.0;
    verdict(ok, format!("{count} integrator eigenvalues, lumped C {:.1} F (1.05e3 within x3)", rep.lumped_c))
}

fn observability() -> Verdict {
    let p = ModelParams { t_plus: 0.5, ..Default::default() };
    let sys = linearize(&build_ode(&p, Variant::Baseline).unwrap(), p.c_init).unwrap();
    let split = split_integrators(&sys, TOL_INT).unwrap();
    match balance_and_truncate(&split.hurwitz, 3) {
        Err(ReductionError::Degenerate { grammian: "observability", ratio }) => {
            verdict(true, format!("t+ = t- = 0.5 rejected, observability ratio {ratio:.2e}"))
        }
        other => verdict(false, format!("expected observability degeneracy, got {:?}", other.map(|r| r.1.hsv))),
    }
}

fn bode_agreement() -> Verdict {
    let (_, _, sys) = baseline();
    let (red, _) = reduce(&sys, 4).unwrap();
    let circuit = synth_dynamic(&ss_to_tf(&lump_integrators(&red))).unwrap();
    let w = default_grid();
    let full = bode(&sys, &w).unwrap();
    let circ = bode(&circuit, &w).unwrap();
    let (dm, dp) = full.max_difference(&circ);
    verdict(
        circuit.branch_count() == 4 && dm < 1.0 && dp < 5.0 && sys.dim() == 20,
        format!("{} branches, {} states, max |dMag| {dm:.2e} dB (< 1), max |dPhase| {dp:.2e} deg (< 5)", circuit.branch_count(), sys.dim()),
    )
}

fn pr_gate() -> Verdict {
    let allpass = RationalFunction::from_real_factors(&[-1.0], &[1.0], 1.0).unwrap();
    let kappa = RationalFunction::from_real_factors(&[4.76, 0.3, 2.95e-5, 3.27e-5], &[0.0, 3.74, 2.9e-5, 3.27e-6], 1.0).unwrap();
    let ac = RationalFunction::from_real_factors(&[0.0, 0.0, 6.04, 1.46, 0.27, 0.0031], &[0.0, 0.0, 0.0, 5.17, 1.29, 0.003], 1.0).unwrap();
    let base = is_positive_real(&reference_impedance());
    let ap = is_positive_real(&allpass);
    let rk = is_positive_real(&kappa);
    let ra = is_positive_real(&ac);
    let derived: Vec<String> = [Variant::KappaOfC, Variant::ACOfPhi]
        .iter()
        .map(|v| {
            let p = ModelParams::default();
            let sys = linearize(&build_ode(&p, *v).unwrap(), p.c_init).unwrap();
            let g = ss_to_tf(&lump_integrators(&reduce(&sys, 3).unwrap().0));
            format!("{v:?} {}", if is_positive_real(&g).passed() { "pass" } else { "fail" })
        })
        .collect();
    let show = |r: &circsynth_core::netsynth::PrReport| {
        if r.passed() { "pass".to_string() } else { format!("fail (min Re {:.3e})", r.min_real_part) }
    };
    verdict(
        base.passed() && !ap.passed() && rk.passed() && ra.passed(),
        format!(
            "baseline {}, (s-1)/(s+1) {}, kappa variant {}, aC variant {} (reference factors; model-derived: {})",
            show(&base),
            show(&ap),
            show(&rk),
            show(&ra),
            derived.join(", ")
        ),
    )
}

fn spectral() -> Verdict {
    let mut worst: f64 = 0.0;
    for (a, b) in [(-1.0, 1.0), (0.0, 1.0), (0.0, 5e-5), (2.0, 5.0)] {
        for n in 2..=16 {
            let d = cheb_diff_matrix(n, a, b).unwrap();
            for k in 0..=n {
                let p = DVector::from_iterator(d.len(), d.nodes.iter().map(|x| x.powi(k as i32)));
                let kf = k as f64;
                let dp = DVector::from_iterator(d.len(), d.nodes.iter().map(|x| if k >= 1 { kf * x.powi(k as i32 - 1) } else { 0.0 }));
                let ddp =
                    DVector::from_iterator(d.len(), d.nodes.iter().map(|x| if k >= 2 { kf * (kf - 1.0) * x.powi(k as i32 - 2) } else { 0.0 }));
                let h = b - a;
                let scale1 = p.amax().max(1e-300) / h;
                let scale2 = p.amax().max(1e-300) / (h * h);
                worst = worst.max((&d.d1 * &p - dp).amax() / scale1);
                worst = worst.max((&d.d2 * &p - ddp).amax() / scale2);
            }
        }
    }
    verdict(worst < 1e-10, format!("orders 2-16 on 4 intervals, worst scaled error {worst:.2e} (< 1e-10)"))
}

fn conservation() -> Verdict {
    let (_, ode, _) = baseline();
    let tr = simulate(&ode, &Profile::constant(10.0), 100.0, &SimOptions::default()).unwrap();
    let drift = tr.content_drift();
    verdict(drift < 1e-3, format!("ionic content drift {drift:.2e} over 100 s at 10 A/m2 (< 1e-3)"))
}

fn tracking() -> Verdict {
    let (_, ode, _) = baseline();
    let trace = track_parameters(&ode, &Profile::sinusoid(10.0, 10.0, 0.1), 300.0, 10.0, &TrackOptions::default()).unwrap();
    let Some(dev) = trace.final_deviation() else {
        return verdict(false, "no valid sample".into());
    };
    let slow = dev[dev.len() - 1].abs();
    let fast = dev[..dev.len() - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ratio = slow / fast;
    verdict(
        trace.failures.is_empty() && dev.len() == 3 && ratio >= 5.0,
        format!("final deviations {:?} %, slow/fast ratio {ratio:.1} (>= 5), invalid samples {}", dev, trace.failures.len()),
    )
}

type Check = fn() -> Verdict;

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("round-trip identity", round_trip),
        ("Foster rules on the reference impedance", foster_rules),
        ("pipeline pole reproduction", pipeline_poles),
        ("balanced-truncation lower bound", bt_bound),
        ("integrator structure", integrators),
        ("observability degeneracy", observability),
        ("Bode agreement", bode_agreement),
        ("positive-real gatekeeping", pr_gate),
        ("spectral accuracy", spectral),
        ("conservation", conservation),
        ("parameter-tracking ordering", tracking),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let v = std::panic::catch_unwind(f).unwrap_or_else(|_| verdict(false, "panicked".into()));
        println!("{} {:>2} {}: {}", if v.pass { "PASS" } else { "FAIL" }, k + 1, name, v.detail);
        if !v.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
