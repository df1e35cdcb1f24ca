//! Passive RC network synthesis from positive-real impedances.

pub mod cauer;
pub mod circuit;
pub mod foster;
pub mod passivity;

pub use cauer::{cauer_element_count, cauer_expand, CauerKind};
pub use circuit::{
    circuit_impedance, circuit_state_space, export_netlist, synth_classical, synth_dynamic, Circuit, Component,
    Element, Kind, Topology,
};
pub use foster::{foster_expand, FosterExpansion};
pub use passivity::{is_positive_real, residue, PrReport, PrVerdict, TOL_PR};
