//! Re-synthesis of the dynamic circuit along a simulated charge.

use serde::Serialize;

use crate::error::{Error, SimError};
use crate::freqsim::fmt_num;
use crate::freqsim::sim::{simulate, Profile, SimOptions};
use crate::linearize::{linearize_at, LinearizationPoint};
use crate::mor::{lump_integrators, reduce};
use crate::netsynth::synth_dynamic;
use crate::rational::ss_to_tf;
use crate::specmodel::NonlinearOde;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackOptions {
    pub r_stable: usize,
    pub point: LinearizationPoint,
    pub sim: SimOptions,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self { r_stable: 3, point: LinearizationPoint::Profile, sim: SimOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamTrace {
    pub times: Vec<f64>,
    /// Branch time constants `R_i C_i` per sample, fastest first; `None` marks an invalid sample.
    pub taus: Vec<Option<Vec<f64>>>,
    /// Percentage change from the first valid sample.
    pub deviations: Vec<Option<Vec<f64>>>,
    /// Reason for each invalid sample.
    pub failures: Vec<(f64, String)>,
}

impl ParamTrace {
    /// Number of tracked time constants.
    pub fn width(&self) -> usize {
        self.taus.iter().flatten().map(|t| t.len()).next().unwrap_or(0)
    }

    /// Last valid deviation row.
    pub fn final_deviation(&self) -> Option<&[f64]> {
        self.deviations.iter().rev().flatten().next().map(|v| v.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let w = self.width();
        let mut cols = vec!["t_s".to_string()];
        cols.extend((1..=w).map(|k| format!("tau{k}_s")));
        cols.extend((1..=w).map(|k| format!("dev{k}_pct")));
        let mut out = cols.join(",") + "\n";
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_num(*t)];
            match (&self.taus[k], &self.deviations[k]) {
                (Some(tau), Some(dev)) => {
                    row.extend(tau.iter().map(|v| fmt_num(*v)));
                    row.extend(dev.iter().map(|v| fmt_num(*v)));
                }
                _ => row.extend(std::iter::repeat_n("nan".to_string(), 2 * w)),
            }
            out += &(row.join(",") + "\n");
        }
        out
    }
}

fn time_constants_at(ode: &NonlinearOde, x: &nalgebra::DVector<f64>, opts: &TrackOptions) -> Result<Vec<f64>, Error> {
    let sys = linearize_at(ode, x, opts.point)?;
    let (red, _) = reduce(&sys, opts.r_stable)?;
    let g = ss_to_tf(&lump_integrators(&red));
    Ok(synth_dynamic(&g)?.time_constants())
}

/// Simulate the profile, then re-linearize, reduce and synthesize at every sample time.
pub fn track_parameters(
    ode: &NonlinearOde,
    profile: &Profile,
    t_end: f64,
    sample_interval: f64,
    opts: &TrackOptions,
) -> Result<ParamTrace, SimError> {
    if !(sample_interval > 0.0) {
        return Err(SimError::Setup("sample interval must be positive".into()));
    }
    let sim = SimOptions { output_interval: Some(sample_interval), ..opts.sim.clone() };
    let traj = simulate(ode, profile, t_end, &sim)?;
    let mut taus = Vec::with_capacity(traj.times.len());
    let mut failures = Vec::new();
    let mut reference: Option<Vec<f64>> = None;
    let mut deviations = Vec::with_capacity(traj.times.len());
    for (t, x) in traj.times.iter().zip(&traj.states) {
        match time_constants_at(ode, x, opts) {
            Ok(tau) => {
                let r = reference.get_or_insert_with(|| tau.clone());
                if r.len() != tau.len() {
                    failures.push((*t, format!("{} time constants, expected {}", tau.len(), r.len())));
                    taus.push(None);
                    deviations.push(None);
                    continue;
                }
                deviations.push(Some(tau.iter().zip(r.iter()).map(|(a, b)| 100.0 * (a - b) / b).collect()));
                taus.push(Some(tau));
            }
            Err(e) => {
                log::warn!("tracking sample at t = {t} s invalid: {e}");
                failures.push((*t, e.to_string()));
                taus.push(None);
                deviations.push(None);
            }
        }
    }
    Ok(ParamTrace { times: traj.times, taus, deviations, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use crate::specmodel::{build_ode, Variant};

    #[test]
    fn zero_current_has_no_deviation() {
        let ode = build_ode(&ModelParams { n_electrode: 3, n_separator: 2, ..Default::default() }, Variant::Baseline).unwrap();
        let tr = track_parameters(&ode, &Profile::constant(0.0), 10.0, 5.0, &TrackOptions::default()).unwrap();
        assert_eq!(tr.times.len(), 3);
        assert!(tr.failures.is_empty(), "{:?}", tr.failures);
        for d in tr.deviations.iter().flatten() {
            assert!(d.iter().all(|v| v.abs() < 1e-6), "{d:?}");
        }
        let csv = tr.to_csv();
        assert!(csv.starts_with("t_s,tau1_s,tau2_s,tau3_s,dev1_pct,dev2_pct,dev3_pct\n"));
    }
}
