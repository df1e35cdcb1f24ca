//! Subcommand implementations. Every artifact is written with fixed formatting.

use std::fs;
use std::path::Path;

use circsynth_core::freqsim::{bode, simulate, track_parameters, SimOptions, TrackOptions};
use circsynth_core::mor::{log_grid, lump_integrators};
use circsynth_core::netsynth::{
    cauer_expand, export_netlist, is_positive_real, synth_classical, synth_dynamic, CauerKind, Circuit, Kind,
    Topology,
};
use circsynth_core::specmodel::assemble_cell;
use circsynth_core::{build_ode, linearize, reduce, ss_to_tf, Complex64, LtiSystem, NonlinearOde, RationalFunction};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{variant_name, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Assemble,
    Reduce,
    Synth,
    Bode,
    Simulate,
    Track,
}

/// Run one subcommand; returns the written file names.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    fs::create_dir_all(&cfg.out_dir)?;
    let out = Output { dir: &cfg.out_dir, written: vec![] };
    match cmd {
        Command::Assemble => assemble(cfg, out),
        Command::Reduce => reduce_cmd(cfg, out),
        Command::Synth => synth(cfg, out),
        Command::Bode => bode_cmd(cfg, out),
        Command::Simulate => simulate_cmd(cfg, out),
        Command::Track => track(cfg, out),
    }
}

struct Output<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl Output<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.dir.join(name), body)?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.text(name, &s)
    }
}

fn model(cfg: &RunConfig) -> Result<NonlinearOde, CliError> {
    Ok(build_ode(&cfg.params, cfg.variant)?)
}

fn full_system(cfg: &RunConfig, ode: &NonlinearOde) -> Result<LtiSystem, CliError> {
    Ok(linearize(ode, cfg.params.c_init)?)
}

fn roots_json(z: &[Complex64]) -> Value {
    json!(z.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn impedance_json(g: &RationalFunction) -> Value {
    json!({
        "gain": g.gain,
        "zeros": roots_json(&g.zeros),
        "poles": roots_json(&g.poles),
        "near_cancellations": g.near_cancellations,
    })
}

/// Reduced impedance with the integrators lumped into one series capacitor.
fn impedance(sys: &LtiSystem, r_stable: usize) -> Result<RationalFunction, CliError> {
    let (red, _) = reduce(sys, r_stable)?;
    Ok(ss_to_tf(&lump_integrators(&red)))
}

fn assemble(cfg: &RunConfig, mut out: Output) -> Result<Vec<String>, CliError> {
    let desc = assemble_cell(&cfg.params, cfg.variant)?;
    let ode = model(cfg)?;
    let l = &ode.layout;
    let n_phi2 = desc.algebraic.as_ref().map_or(0, |a| a.gphi.ncols());
    let report = json!({
        "variant": variant_name(cfg.variant),
        "n_electrode": cfg.params.n_electrode,
        "n_separator": cfg.params.n_separator,
        "concentration_states": l.n_c(),
        "potential_states": l.n_eta(),
        "states": l.dim(),
        "algebraic_phi2": n_phi2,
        "descriptor_dim": desc.dim(),
        "mass_condition_warning": ode.warning.as_ref().map(|w| w.condition),
    });
    out.json("assemble.json", &report)?;
    out.json("descriptor.json", &desc.to_json())?;
    Ok(out.written)
}

fn reduce_cmd(cfg: &RunConfig, mut out: Output) -> Result<Vec<String>, CliError> {
    let ode = model(cfg)?;
    let sys = full_system(cfg, &ode)?;
    let (red, report) = reduce(&sys, cfg.r_stable)?;
    let g = ss_to_tf(&lump_integrators(&red));
    out.json("reduction.json", &json!({ "report": report, "impedance": impedance_json(&g) }))?;
    let mut csv = String::from("index,hsv\n");
    for (k, s) in report.hsv.iter().enumerate() {
        csv += &format!("{},{:.10e}\n", k + 1, s);
    }
    out.text("hsv.csv", &csv)?;
    Ok(out.written)
}

fn file_stem(t: Topology) -> &'static str {
    t.name()
}

/// Circuits for each requested topology. The classical circuit is built from the
/// single-branch reduction; the others from `r_stable`.
fn circuits(cfg: &RunConfig, sys: &LtiSystem) -> Result<Vec<(Topology, RationalFunction, Circuit)>, CliError> {
    let g = impedance(sys, cfg.r_stable)?;
    let pr = is_positive_real(&g);
    if !pr.passed() {
        return Err(CliError::Synthesis(format!("reduced impedance is not positive real: {:?}", pr.verdict)));
    }
    let mut out = Vec::new();
    for &t in &cfg.topologies {
        let (src, c) = match t {
            Topology::Classical => {
                let g1 = impedance(sys, 1.min(cfg.r_stable))?;
                let c = synth_classical(&g1)?;
                (g1, c)
            }
            Topology::Dynamic => (g.clone(), synth_dynamic(&g)?),
            Topology::LadderCauer1 => (g.clone(), cauer_expand(&g, CauerKind::First)?),
            Topology::LadderCauer2 => (g.clone(), cauer_expand(&g, CauerKind::Second)?),
        };
        out.push((t, src, c));
    }
    Ok(out)
}

fn component_table(c: &Circuit, g: &RationalFunction) -> Value {
    let rows: Vec<Value> = c
        .components()
        .iter()
        .map(|x| {
            json!({
                "component": x.name,
                "value": x.value,
                "unit": match x.kind { Kind::R => "ohm", Kind::C => "F" },
            })
        })
        .collect();
    json!({
        "topology": c.topology.name(),
        "components": rows,
        "branches": c.branch_count(),
        "time_constants_s": c.time_constants(),
        "warnings": c.warnings,
        "impedance": impedance_json(g),
    })
}

fn synth(cfg: &RunConfig, mut out: Output) -> Result<Vec<String>, CliError> {
    let ode = model(cfg)?;
    let sys = full_system(cfg, &ode)?;
    let label = variant_name(cfg.variant);
    for (t, g, c) in circuits(cfg, &sys)? {
        out.json(&format!("{}.json", file_stem(t)), &component_table(&c, &g))?;
        out.text(&format!("{}.cir", file_stem(t)), &export_netlist(&c, label))?;
    }
    Ok(out.written)
}

fn bode_cmd(cfg: &RunConfig, mut out: Output) -> Result<Vec<String>, CliError> {
    let ode = model(cfg)?;
    let sys = full_system(cfg, &ode)?;
    let grid = log_grid(cfg.omega_min, cfg.omega_max, cfg.omega_points);
    out.text("bode_full.csv", &bode(&sys, &grid)?.to_csv())?;
    let (red, _) = reduce(&sys, cfg.r_stable)?;
    out.text("bode_reduced.csv", &bode(&red, &grid)?.to_csv())?;
    for (t, _, c) in circuits(cfg, &sys)? {
        out.text(&format!("bode_{}.csv", file_stem(t)), &bode(&c, &grid)?.to_csv())?;
    }
    Ok(out.written)
}

fn sim_options(cfg: &RunConfig, interval: f64) -> SimOptions {
    SimOptions { output_interval: Some(interval), ..cfg.sim.clone() }
}

fn simulate_cmd(cfg: &RunConfig, mut out: Output) -> Result<Vec<String>, CliError> {
    let ode = model(cfg)?;
    let tr = simulate(&ode, &cfg.profile, cfg.t_end, &sim_options(cfg, cfg.output_interval))?;
    out.text("trajectory.csv", &tr.to_csv())?;
    Ok(out.written)
}

fn track(cfg: &RunConfig, mut out: Output) -> Result<Vec<String>, CliError> {
    let ode = model(cfg)?;
    let opts = TrackOptions { r_stable: cfg.r_stable, point: cfg.point, sim: cfg.sim.clone() };
    let trace = track_parameters(&ode, &cfg.profile, cfg.t_end, cfg.sample_interval, &opts)?;
    if trace.taus.iter().all(Option::is_none) {
        let why = trace.failures.first().map_or("no samples".to_string(), |f| f.1.clone());
        return Err(CliError::Synthesis(format!("no valid tracking sample: {why}")));
    }
    out.text("params.csv", &trace.to_csv())?;
    Ok(out.written)
}
