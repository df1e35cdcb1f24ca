//! Frequency response, nonlinear time stepping and circuit-parameter tracking.

pub mod bode;
pub mod sim;
pub mod track;

pub use bode::{bode, default_grid, FrequencyResponse, BodeData};
pub use sim::{simulate, simulate_from, Profile, SimOptions, Trajectory};
pub use track::{track_parameters, ParamTrace, TrackOptions};

/// Fixed-width scientific formatting used by all CSV writers.
pub(crate) fn fmt_num(v: f64) -> String {
    if v.is_finite() { format!("{v:.10e}") } else { "nan".to_string() }
}
