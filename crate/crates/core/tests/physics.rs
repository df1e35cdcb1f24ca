use circsynth_core::freqsim::TrackOptions;
use circsynth_core::mor::lump_integrators;
use circsynth_core::netsynth::foster_expand;
use circsynth_core::specmodel::{assemble_cell_with, AssemblyOptions, NodeRef};
use circsynth_core::*;

const VARIANTS: [Variant; 3] = [Variant::Baseline, Variant::KappaOfC, Variant::ACOfPhi];

fn params(ne: usize, ns: usize) -> ModelParams {
    ModelParams { n_electrode: ne, n_separator: ns, ..Default::default() }
}

fn with_reference(p: &ModelParams, r: NodeRef) -> NonlinearOde {
    let desc = assemble_cell_with(p, Variant::Baseline, AssemblyOptions { reference: Some(r) }).unwrap();
    to_ode(&eliminate_phi2(&desc).unwrap()).unwrap()
}

/// Equilibrium plus a smooth concentration bump.
fn perturbed(ode: &NonlinearOde, c0: f64) -> DVector<f64> {
    let mut x = ode.equilibrium();
    for (k, &pos) in ode.layout.c.clone().zip(&ode.layout.c_positions) {
        x[k] += 0.05 * c0 * (pos * 3e4).sin();
    }
    x
}

#[test]
fn equilibrium_is_stationary() {
    for v in VARIANTS {
        let p = ModelParams::default();
        let ode = build_ode(&p, v).unwrap();
        let x0 = ode.equilibrium();
        assert!(ode.rhs(&x0, 0.0).unwrap().amax() < 1e-9, "{v:?}");
        assert!(ode.output(&x0, 0.0).unwrap().abs() < 1e-12, "{v:?}");
    }
}

#[test]
fn step_response_converges_under_refinement() {
    let times = [0.1, 1.0, 10.0, 100.0];
    let c0 = ModelParams::default().c_init;
    let coarse = linearize(&build_ode(&params(8, 6), Variant::Baseline).unwrap(), c0).unwrap();
    let fine = linearize(&build_ode(&params(16, 12), Variant::Baseline).unwrap(), c0).unwrap();
    let a = coarse.step_response(1.0, &times);
    let b = fine.step_response(1.0, &times);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-3 * y.abs(), "{x} vs {y}");
    }
}

#[test]
fn mirror_image_of_the_cell() {
    let p = ModelParams::default();
    let ode = build_ode(&p, Variant::Baseline).unwrap();
    let sys = linearize(&ode, p.c_init).unwrap();
    let l = &ode.layout;
    let total = 2.0 * p.l_electrode + p.l_separator;
    let pos: Vec<f64> = l.c_positions.iter().chain(&l.eta_positions).copied().collect();
    let n = l.dim();
    let is_c = |k: usize| l.c.contains(&k);
    let perm: Vec<usize> = (0..n)
        .map(|k| (0..n).find(|&j| is_c(j) == is_c(k) && (pos[j] - (total - pos[k])).abs() < 1e-9 * total).unwrap())
        .collect();
    // the mirrored cell has the same dynamics and the current enters from the other side
    let pap = DMatrix::from_fn(n, n, |r, c| sys.a[(perm[r], perm[c])]);
    let pb = DVector::from_fn(n, |r, _| sys.b[perm[r]]);
    let pc = RowDVector::from_fn(n, |_, c| sys.c[perm[c]]);
    assert!((&pap - &sys.a).amax() <= 1e-9 * sys.a.amax());
    assert!((&pb + &sys.b).amax() <= 1e-9 * sys.b.amax());
    assert!((&pc + &sys.c).amax() <= 1e-9 * sys.c.amax());
}

#[test]
fn potential_reference_is_arbitrary() {
    let p = params(4, 3);
    let base = build_ode(&p, Variant::Baseline).unwrap();
    let x = perturbed(&base, p.c_init);
    let v0 = base.output(&x, 5.0).unwrap();
    let f0 = base.rhs(&x, 5.0).unwrap();
    for r in [NodeRef { domain: 1, node: 2 }, NodeRef { domain: 2, node: p.n_electrode }] {
        let ode = with_reference(&p, r);
        assert!((ode.output(&x, 5.0).unwrap() - v0).abs() < 1e-9, "{r:?}");
        assert!((ode.rhs(&x, 5.0).unwrap() - &f0).amax() <= 1e-9 * f0.amax(), "{r:?}");
    }
}

#[test]
fn full_linear_model_is_marginally_stable() {
    for v in VARIANTS {
        let p = ModelParams::default();
        let sys = linearize(&build_ode(&p, v).unwrap(), p.c_init).unwrap();
        let poles = sys.poles();
        let rho = poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(poles.iter().all(|z| z.re <= 1e-9 * rho), "{v:?}");
        assert_eq!(sys.integrator_count(1e-9), 3, "{v:?}");
    }
}

#[test]
fn small_current_follows_the_linear_model() {
    let p = ModelParams::default();
    let ode = build_ode(&p, Variant::Baseline).unwrap();
    let sys = linearize(&ode, p.c_init).unwrap();
    let opts = SimOptions { output_interval: Some(1.0), ..Default::default() };
    let tr = simulate(&ode, &Profile::constant(1.0), 10.0, &opts).unwrap();
    // the equilibrium voltage is zero, so V(t) itself is the response
    let lin = sys.step_response(1.0, &tr.times[1..]);
    for (v, l) in tr.voltage[1..].iter().zip(&lin) {
        assert!((v - l).abs() <= 5e-3 * l.abs(), "{v} vs {l}");
    }
}

#[test]
fn late_voltage_slope_is_current_over_capacitance() {
    let p = ModelParams::default();
    let ode = build_ode(&p, Variant::Baseline).unwrap();
    let (_, report) = reduce(&linearize(&ode, p.c_init).unwrap(), 3).unwrap();
    let opts = SimOptions { output_interval: Some(10.0), ..Default::default() };
    let tr = simulate(&ode, &Profile::constant(10.0), 100.0, &opts).unwrap();
    let n = tr.times.len();
    let slope = (tr.voltage[n - 1] - tr.voltage[n - 2]) / (tr.times[n - 1] - tr.times[n - 2]);
    let want = 10.0 / report.lumped_c;
    assert!((slope / want - 1.0).abs() < 0.02, "{slope} vs {want}");
}

#[test]
fn every_variant_conserves_ionic_content() {
    for v in VARIANTS {
        let ode = build_ode(&params(4, 3), v).unwrap();
        let opts = SimOptions { output_interval: Some(5.0), ..Default::default() };
        let tr = simulate(&ode, &Profile::constant(5.0), 20.0, &opts).unwrap();
        assert!(tr.content_drift() < 1e-6, "{v:?} {}", tr.content_drift());
        assert!(tr.voltage.windows(2).all(|w| w[1] > w[0]), "{v:?}");
    }
}

#[test]
fn series_resistance_is_the_feedthrough() {
    let p = ModelParams::default();
    let sys = linearize(&build_ode(&p, Variant::Baseline).unwrap(), p.c_init).unwrap();
    let (red, _) = reduce(&sys, 3).unwrap();
    assert!((red.d - sys.d).abs() <= 1e-12 * sys.d.abs());
    let g = ss_to_tf(&lump_integrators(&red));
    let f = foster_expand(&g).unwrap();
    assert!((f.k_inf - sys.d).abs() <= 1e-9 * sys.d.abs());
}

#[test]
fn slow_branch_tracks_the_state_of_charge() {
    let ode = build_ode(&ModelParams::default(), Variant::Baseline).unwrap();
    let opts = TrackOptions::default();
    let mut slow = Vec::new();
    for amp in [5.0, 10.0] {
        let tr = track_parameters(&ode, &Profile::sinusoid(amp, amp, 0.1), 100.0, 50.0, &opts).unwrap();
        assert!(tr.failures.is_empty(), "{:?}", tr.failures);
        for dev in tr.deviations.iter().flatten() {
            assert!(dev[..dev.len() - 1].iter().all(|d| d.abs() < 1.0), "{dev:?}");
        }
        slow.push(tr.final_deviation().unwrap().last().unwrap().abs());
    }
    assert!(slow[1] > slow[0], "{slow:?}");
}
