//! Porous-electrode supercapacitor model reduction and RC circuit synthesis.
//!
//! Pipeline: [`specmodel`] assembles the discretised cell, [`linearize`] turns
//! it into an LTI system, [`mor`] reduces it by balanced truncation,
//! [`netsynth`] synthesises RC networks and [`freqsim`] evaluates frequency
//! and time responses.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod error;
pub mod freqsim;
pub mod params;
pub mod linearize;
pub mod lyapunov;
pub mod mor;
pub mod netsynth;
pub mod poly;
pub mod rational;
pub mod spectral;
pub mod specmodel;

pub use error::{Error, ModelError, ReductionError, SimError, SynthesisError};
pub use nalgebra::{DMatrix, DVector, RowDVector};
pub use num_complex::Complex64;
pub use linearize::{linearize, linearize_at, LinearizationPoint, LtiSystem, StateLabel};
pub use lyapunov::solve_lyapunov;
pub use mor::{balance_and_truncate, lumped_capacitance, reduce, split_integrators, ReductionReport};
pub use freqsim::{bode, simulate, track_parameters, BodeData, ParamTrace, Profile, SimOptions, Trajectory};
pub use netsynth::{
    cauer_expand, circuit_impedance, export_netlist, foster_expand, is_positive_real, synth_classical, synth_dynamic,
    CauerKind, Circuit, Topology,
};
pub use params::ModelParams;
pub use rational::{ss_to_tf, RationalFunction};
pub use specmodel::{assemble_cell, build_ode, eliminate_phi2, to_ode, DescriptorSystem, NonlinearOde, Variant};
pub use spectral::{cheb_diff_matrix, DiffMatrix};
