//! Physical, geometric and discretisation parameters plus the flat config format.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Model parameters in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(rename = "aC")]
    pub a_c: f64,
    pub sigma: f64,
    pub kappa_electrode: f64,
    pub kappa_separator: f64,
    #[serde(rename = "D_electrode")]
    pub d_electrode: f64,
    #[serde(rename = "D_separator")]
    pub d_separator: f64,
    pub eps_electrode: f64,
    pub eps_separator: f64,
    pub t_plus: f64,
    pub dq_plus_dq: f64,
    pub dq_minus_dq: f64,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(rename = "F_const")]
    pub faraday: f64,
    #[serde(rename = "R_const")]
    pub gas_constant: f64,
    #[serde(rename = "L_electrode")]
    pub l_electrode: f64,
    #[serde(rename = "L_separator")]
    pub l_separator: f64,
    pub area: f64,
    pub c_init: f64,
    pub kappa0: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "N_electrode")]
    pub n_electrode: usize,
    #[serde(rename = "N_separator")]
    pub n_separator: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        let kappa_electrode = 0.0195;
        let c_init = 930.0;
        Self {
            a_c: 42e6,
            sigma: 0.0521,
            kappa_electrode,
            kappa_separator: 0.0312,
            d_electrode: 2.09e-12,
            d_separator: 3.34e-12,
            eps_electrode: 0.67,
            eps_separator: 0.6,
            t_plus: 0.55,
            dq_plus_dq: -0.5,
            dq_minus_dq: -0.5,
            temperature: 298.0,
            faraday: 96485.33212,
            gas_constant: 8.314462618,
            l_electrode: 50e-6,
            l_separator: 25e-6,
            area: 1.0,
            c_init,
            kappa0: kappa_electrode / c_init,
            alpha: 42e6,
            beta: 10e6,
            n_electrode: 4,
            n_separator: 4,
        }
    }
}

/// Names accepted by [`ModelParams::set`], in config spelling.
pub const PARAM_KEYS: &[&str] = &[
    "aC", "sigma", "kappa_electrode", "kappa_separator", "D_electrode", "D_separator",
    "eps_electrode", "eps_separator", "t_plus", "dq_plus_dq", "dq_minus_dq", "T", "F_const",
    "R_const", "L_electrode", "L_separator", "area", "c_init", "kappa0", "alpha", "beta",
    "N_electrode", "N_separator",
];

impl ModelParams {
    /// Anion transference number.
    pub fn t_minus(&self) -> f64 {
        1.0 - self.t_plus
    }

    /// Diffusion-potential coefficient RT(t+ - t-)/F in volts.
    pub fn theta(&self) -> f64 {
        self.gas_constant * self.temperature * (self.t_plus - self.t_minus()) / self.faraday
    }

    /// Surface-charge coupling t- dq+/dq + t+ dq-/dq.
    pub fn gamma(&self) -> f64 {
        self.t_minus() * self.dq_plus_dq + self.t_plus * self.dq_minus_dq
    }

    /// Set one parameter from its config spelling.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidParam { name: key.to_string(), reason };
        if key == "N_electrode" || key == "N_separator" {
            let v: usize = value.trim().parse().map_err(|_| bad(format!("not an integer: {value}")))?;
            if key == "N_electrode" {
                self.n_electrode = v;
            } else {
                self.n_separator = v;
            }
            return Ok(());
        }
        let v: f64 = value.trim().parse().map_err(|_| bad(format!("not a number: {value}")))?;
        let slot = match key {
            "aC" => &mut self.a_c,
            "sigma" => &mut self.sigma,
            "kappa_electrode" => &mut self.kappa_electrode,
            "kappa_separator" => &mut self.kappa_separator,
            "D_electrode" => &mut self.d_electrode,
            "D_separator" => &mut self.d_separator,
            "eps_electrode" => &mut self.eps_electrode,
            "eps_separator" => &mut self.eps_separator,
            "t_plus" => &mut self.t_plus,
            "dq_plus_dq" => &mut self.dq_plus_dq,
            "dq_minus_dq" => &mut self.dq_minus_dq,
            "T" => &mut self.temperature,
            "F_const" => &mut self.faraday,
            "R_const" => &mut self.gas_constant,
            "L_electrode" => &mut self.l_electrode,
            "L_separator" => &mut self.l_separator,
            "area" => &mut self.area,
            "c_init" => &mut self.c_init,
            "kappa0" => &mut self.kappa0,
            "alpha" => &mut self.alpha,
            "beta" => &mut self.beta,
            _ => return Err(bad("unknown key".into())),
        };
        *slot = v;
        Ok(())
    }

    /// Check the parameter invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("aC", self.a_c),
            ("sigma", self.sigma),
            ("kappa_electrode", self.kappa_electrode),
            ("kappa_separator", self.kappa_separator),
            ("D_electrode", self.d_electrode),
            ("D_separator", self.d_separator),
            ("eps_electrode", self.eps_electrode),
            ("eps_separator", self.eps_separator),
            ("T", self.temperature),
            ("F_const", self.faraday),
            ("R_const", self.gas_constant),
            ("L_electrode", self.l_electrode),
            ("L_separator", self.l_separator),
            ("area", self.area),
            ("c_init", self.c_init),
            ("kappa0", self.kappa0),
            ("alpha", self.alpha),
            ("beta", self.beta),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidParam { name: name.into(), reason: format!("must be positive, got {v}") });
            }
        }
        for (name, v) in [("dq_plus_dq", self.dq_plus_dq), ("dq_minus_dq", self.dq_minus_dq)] {
            if !v.is_finite() {
                return Err(ModelError::InvalidParam { name: name.into(), reason: "not finite".into() });
            }
        }
        if !(self.t_plus > 0.0 && self.t_plus < 1.0) {
            return Err(ModelError::InvalidParam { name: "t_plus".into(), reason: "must lie in (0, 1)".into() });
        }
        if self.n_electrode < 3 {
            return Err(ModelError::InvalidParam { name: "N_electrode".into(), reason: "must be >= 3".into() });
        }
        if self.n_separator < 2 {
            return Err(ModelError::InvalidParam { name: "N_separator".into(), reason: "must be >= 2".into() });
        }
        Ok(())
    }
}

/// One `key = value` entry of a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEntry {
    /// Section name; empty for the top-level block.
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Split a flat config file into entries. `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<Vec<ConfigEntry>, ModelError> {
    let mut section = String::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| ModelError::InvalidParam {
                name: format!("line {}", idx + 1),
                reason: "malformed section header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ModelError::InvalidParam {
            name: format!("line {}", idx + 1),
            reason: "expected `key = value`".into(),
        })?;
        out.push(ConfigEntry { section: section.clone(), key: k.trim().to_string(), value: v.trim().to_string(), line: idx + 1 });
    }
    Ok(out)
}

/// Parse model parameters from the top-level block; other sections are returned untouched.
pub fn parse_params(text: &str) -> Result<(ModelParams, Vec<ConfigEntry>), ModelError> {
    let mut p = ModelParams::default();
    let mut kappa0_given = false;
    let mut rest = Vec::new();
    for e in parse_entries(text)? {
        if !e.section.is_empty() {
            rest.push(e);
            continue;
        }
        if e.key == "kappa0" {
            kappa0_given = true;
        }
        p.set(&e.key, &e.value).map_err(|err| match err {
            ModelError::InvalidParam { name, reason } => {
                ModelError::InvalidParam { name, reason: format!("{reason} (line {})", e.line) }
            }
            other => other,
        })?;
    }
    if !kappa0_given {
        p.kappa0 = p.kappa_electrode / p.c_init;
    }
    p.validate()?;
    Ok((p, rest))
}
