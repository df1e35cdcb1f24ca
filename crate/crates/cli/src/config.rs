//! Run configuration: model parameters at top level plus a `[run]` section.

use std::path::{Path, PathBuf};

use circsynth_core::freqsim::{Profile, SimOptions};
use circsynth_core::params::{parse_entries, parse_params, ConfigEntry};
use circsynth_core::{LinearizationPoint, ModelParams, Topology, Variant};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Constant,
    Sinusoid,
    File,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams,
    pub variant: Variant,
    pub r_stable: usize,
    pub topologies: Vec<Topology>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_points: usize,
    pub profile: Profile,
    pub t_end: f64,
    pub output_interval: f64,
    pub sample_interval: f64,
    pub point: LinearizationPoint,
    pub sim: SimOptions,
    pub out_dir: PathBuf,
}

pub const RUN_KEYS: &[&str] = &[
    "params",
    "variant",
    "order",
    "topology",
    "omega_min",
    "omega_max",
    "omega_points",
    "profile",
    "current",
    "offset",
    "amplitude",
    "omega",
    "profile_file",
    "t_end",
    "output_interval",
    "sample_interval",
    "linearization",
    "rtol",
    "atol",
    "c_floor",
    "out",
];

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            variant: Variant::Baseline,
            r_stable: 3,
            topologies: vec![Topology::Classical, Topology::Dynamic, Topology::LadderCauer1],
            omega_min: 1e-4,
            omega_max: 1e2,
            omega_points: 200,
            profile: Profile::constant(10.0),
            t_end: 100.0,
            output_interval: 1.0,
            sample_interval: 10.0,
            point: LinearizationPoint::Profile,
            sim: SimOptions::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

pub fn parse_variant(s: &str) -> Result<Variant, CliError> {
    s.parse().map_err(|_| CliError::Config(format!("unknown variant `{s}` (baseline, kappa_of_c, aC_of_phi)")))
}

pub fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Baseline => "baseline",
        Variant::KappaOfC => "kappa_of_c",
        Variant::ACOfPhi => "aC_of_phi",
    }
}

pub fn parse_topologies(s: &str) -> Result<Vec<Topology>, CliError> {
    let mut out = Vec::new();
    for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        let t = match name {
            "classical" => Topology::Classical,
            "dynamic" => Topology::Dynamic,
            "ladder" | "ladder_cauer1" | "cauer1" => Topology::LadderCauer1,
            "ladder_cauer2" | "cauer2" => Topology::LadderCauer2,
            other => return Err(CliError::Config(format!("unknown topology `{other}`"))),
        };
        if !out.contains(&t) {
            out.push(t);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("topology list is empty".into()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(e: &ConfigEntry) -> Result<T, CliError> {
    e.value.parse().map_err(|_| CliError::Config(format!("invalid value `{}` for `{}` (line {})", e.value, e.key, e.line)))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

impl RunConfig {
    /// Parse a config file; relative paths inside it resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_text(&read(path)?, &base)
    }

    pub fn from_text(text: &str, base: &Path) -> Result<Self, CliError> {
        let entries = parse_entries(text)?;
        let mut cfg = RunConfig::default();
        let run: Vec<&ConfigEntry> = entries.iter().filter(|e| e.section == "run").collect();
        if let Some(e) = entries.iter().find(|e| !e.section.is_empty() && e.section != "run") {
            return Err(CliError::Config(format!("unknown section `[{}]` (line {})", e.section, e.line)));
        }

        // parameters: optional base file, then this file's top-level block
        let mut param_text = String::new();
        if let Some(e) = run.iter().find(|e| e.key == "params") {
            param_text = read(&base.join(&e.value))?;
            param_text.push('\n');
        }
        let own: Vec<String> = text
            .lines()
            .take_while(|l| !l.trim_start().starts_with('['))
            .map(str::to_string)
            .collect();
        param_text.push_str(&own.join("\n"));
        let (params, rest) = parse_params(&param_text)?;
        if let Some(e) = rest.first() {
            return Err(CliError::Config(format!("unexpected section `[{}]` in parameter file", e.section)));
        }
        params.validate()?;
        cfg.params = params;

        let mut kind = ProfileKind::Constant;
        let (mut current, mut offset, mut amplitude, mut omega) = (10.0, 10.0, 10.0, 0.1);
        let mut profile_file = None;
        for e in run {
            match e.key.as_str() {
                "params" => {}
                "variant" => cfg.variant = parse_variant(&e.value)?,
                "order" => cfg.r_stable = num(e)?,
                "topology" => cfg.topologies = parse_topologies(&e.value)?,
                "omega_min" => cfg.omega_min = num(e)?,
                "omega_max" => cfg.omega_max = num(e)?,
                "omega_points" => cfg.omega_points = num(e)?,
                "profile" => {
                    kind = match e.value.as_str() {
                        "constant" => ProfileKind::Constant,
                        "sinusoid" => ProfileKind::Sinusoid,
                        "file" => ProfileKind::File,
                        other => return Err(CliError::Config(format!("unknown profile `{other}` (line {})", e.line))),
                    }
                }
                "current" => current = num(e)?,
                "offset" => offset = num(e)?,
                "amplitude" => amplitude = num(e)?,
                "omega" => omega = num(e)?,
                "profile_file" => profile_file = Some(base.join(&e.value)),
                "t_end" => cfg.t_end = num(e)?,
                "output_interval" => cfg.output_interval = num(e)?,
                "sample_interval" => cfg.sample_interval = num(e)?,
                "linearization" => {
                    cfg.point = match e.value.as_str() {
                        "profile" => LinearizationPoint::Profile,
                        "mean" => LinearizationPoint::SpatialMean,
                        other => return Err(CliError::Config(format!("unknown linearization point `{other}`"))),
                    }
                }
                "rtol" => cfg.sim.rtol = num(e)?,
                "atol" => cfg.sim.atol = num(e)?,
                "c_floor" => cfg.sim.c_floor = num(e)?,
                "out" => cfg.out_dir = base.join(&e.value),
                other => return Err(CliError::Config(format!("unknown key `{other}` in [run] (line {})", e.line))),
            }
        }
        cfg.profile = match kind {
            ProfileKind::Constant => Profile::constant(current),
            ProfileKind::Sinusoid => Profile::sinusoid(offset, amplitude, omega),
            ProfileKind::File => {
                let path = profile_file.ok_or_else(|| CliError::Config("profile = file needs profile_file".into()))?;
                Profile::parse_samples(&read(&path)?)?
            }
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        let bad = |what: &str| Err(CliError::Config(what.to_string()));
        if !(self.omega_min > 0.0 && self.omega_max > self.omega_min && self.omega_max.is_finite()) {
            return bad("frequency grid needs 0 < omega_min < omega_max");
        }
        if self.omega_points < 2 {
            return bad("omega_points must be at least 2");
        }
        if !(self.t_end > 0.0 && self.output_interval > 0.0 && self.sample_interval > 0.0) {
            return bad("t_end, output_interval and sample_interval must be positive");
        }
        if !(self.sim.rtol > 0.0 && self.sim.atol > 0.0 && self.sim.c_floor > 0.0) {
            return bad("rtol, atol and c_floor must be positive");
        }
        Ok(())
    }
}
