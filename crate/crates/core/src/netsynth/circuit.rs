//! RC circuit topologies, impedance and netlists.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::SynthesisError;
use crate::linearize::LtiSystem;
use crate::netsynth::foster::{foster_expand, FosterExpansion};
use crate::netsynth::passivity::is_positive_real;
use crate::poly;
use crate::rational::RationalFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Classical,
    Dynamic,
    LadderCauer1,
    LadderCauer2,
}

impl Topology {
    pub fn name(self) -> &'static str {
        match self {
            Topology::Classical => "classical",
            Topology::Dynamic => "dynamic",
            Topology::LadderCauer1 => "ladder_cauer1",
            Topology::LadderCauer2 => "ladder_cauer2",
        }
    }

    pub fn is_ladder(self) -> bool {
        matches!(self, Topology::LadderCauer1 | Topology::LadderCauer2)
    }
}

/// Circuit element in schematic order.
///
/// Foster circuits are a series chain of `SeriesR`, `SeriesC` and `ParallelRc`.
/// Ladders alternate series and shunt elements; a trailing series element
/// returns to ground and a trailing shunt element leaves the far end open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Element {
    SeriesR(f64),
    SeriesC(f64),
    ParallelRc { r: f64, c: f64 },
    ShuntR(f64),
    ShuntC(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Kind {
    R,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub name: String,
    pub kind: Kind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Circuit {
    pub topology: Topology,
    pub elements: Vec<Element>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Circuit {
    pub fn new(topology: Topology, elements: Vec<Element>) -> Self {
        Self { topology, elements, warnings: vec![] }
    }

    /// Parallel RC branches (Foster) or shunt sections (ladder).
    pub fn branch_count(&self) -> usize {
        self.elements
            .iter()
            .filter(|e| match self.topology {
                Topology::Classical | Topology::Dynamic => matches!(e, Element::ParallelRc { .. }),
                _ => matches!(e, Element::ShuntC(_) | Element::ShuntR(_)),
            })
            .count()
    }

    /// Named component values. Foster circuits use `R`/`C` for the series parts
    /// and `R_i`/`C_i` for branch `i`; ladders number each kind in schematic order.
    pub fn components(&self) -> Vec<Component> {
        let mut out = Vec::new();
        let (mut nr, mut nc, mut nb) = (0, 0, 0);
        for e in &self.elements {
            match *e {
                Element::SeriesR(v) | Element::ShuntR(v) if self.topology.is_ladder() => {
                    nr += 1;
                    out.push(Component { name: format!("R{nr}"), kind: Kind::R, value: v });
                }
                Element::SeriesC(v) | Element::ShuntC(v) if self.topology.is_ladder() => {
                    nc += 1;
                    out.push(Component { name: format!("C{nc}"), kind: Kind::C, value: v });
                }
                Element::SeriesR(v) => out.push(Component { name: "R".into(), kind: Kind::R, value: v }),
                Element::SeriesC(v) => out.push(Component { name: "C".into(), kind: Kind::C, value: v }),
                Element::ParallelRc { r, c } => {
                    nb += 1;
                    out.push(Component { name: format!("R{nb}"), kind: Kind::R, value: r });
                    out.push(Component { name: format!("C{nb}"), kind: Kind::C, value: c });
                }
                Element::ShuntR(v) => out.push(Component { name: "Rshunt".into(), kind: Kind::R, value: v }),
                Element::ShuntC(v) => out.push(Component { name: "Cshunt".into(), kind: Kind::C, value: v }),
            }
        }
        out
    }

    /// All values finite and strictly positive.
    pub fn is_valid(&self) -> bool {
        self.components().iter().all(|c| c.value > 0.0 && c.value.is_finite())
    }

    /// Impedance evaluated directly from the element values.
    pub fn impedance_at(&self, s: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        if !self.topology.is_ladder() {
            return self
                .elements
                .iter()
                .map(|e| match *e {
                    Element::SeriesR(r) => Complex64::new(r, 0.0),
                    Element::SeriesC(c) => one / (s * c),
                    Element::ParallelRc { r, c } => r / (one + s * (r * c)),
                    Element::ShuntR(_) | Element::ShuntC(_) => Complex64::new(f64::NAN, 0.0),
                })
                .sum();
        }
        // from the far end: z is the impedance looking right; None = open circuit
        let mut z: Option<Complex64> = None;
        for e in self.elements.iter().rev() {
            z = Some(match *e {
                Element::SeriesR(r) => z.unwrap_or_default() + r,
                Element::SeriesC(c) => z.unwrap_or_default() + one / (s * c),
                Element::ShuntR(r) => {
                    let y = z.map_or(Complex64::default(), |z| one / z) + 1.0 / r;
                    one / y
                }
                Element::ShuntC(c) => {
                    let y = z.map_or(Complex64::default(), |z| one / z) + s * c;
                    one / y
                }
                Element::ParallelRc { .. } => Complex64::new(f64::NAN, 0.0),
            });
        }
        z.unwrap_or_default()
    }

    /// Branch time constants `R_i C_i`, slowest last.
    pub fn time_constants(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .elements
            .iter()
            .filter_map(|e| match e {
                Element::ParallelRc { r, c } => Some(r * c),
                _ => None,
            })
            .collect();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t
    }
}

/// Impedance as (numerator, denominator) ascending coefficients.
type Frac = (Vec<f64>, Vec<f64>);

fn frac_add(a: &Frac, b: &Frac) -> Frac {
    (poly::add(&poly::mul(&a.0, &b.1), &poly::mul(&b.0, &a.1)), poly::mul(&a.1, &b.1))
}

fn frac_inv(a: &Frac) -> Frac {
    (a.1.clone(), a.0.clone())
}

fn element_frac(e: &Element) -> Frac {
    match *e {
        Element::SeriesR(r) => (vec![r], vec![1.0]),
        Element::SeriesC(c) => (vec![1.0], vec![0.0, c]),
        Element::ParallelRc { r, c } => (vec![r], vec![1.0, r * c]),
        // admittances
        Element::ShuntR(r) => (vec![1.0], vec![r]),
        Element::ShuntC(c) => (vec![0.0, c], vec![1.0]),
    }
}

/// Impedance by series/parallel composition.
pub fn circuit_impedance(c: &Circuit) -> RationalFunction {
    let frac = if c.topology.is_ladder() {
        // walk from the far end; `acc` is an impedance after series and an admittance after shunt
        let mut acc: Option<(Frac, bool)> = None;
        for e in c.elements.iter().rev() {
            let is_series = matches!(e, Element::SeriesR(_) | Element::SeriesC(_));
            let f = element_frac(e);
            acc = Some(match acc {
                None => (f, is_series),
                Some((prev, prev_is_z)) => {
                    let prev = if prev_is_z == is_series { prev } else { frac_inv(&prev) };
                    (frac_add(&f, &prev), is_series)
                }
            });
        }
        match acc {
            None => (vec![0.0], vec![1.0]),
            Some((f, true)) => f,
            Some((f, false)) => frac_inv(&f),
        }
    } else {
        c.elements.iter().map(element_frac).fold((vec![0.0], vec![1.0]), |a, b| frac_add(&a, &b))
    };
    let (num, den) = (poly::trim(frac.0), poly::trim(frac.1));
    RationalFunction::from_coeffs(&num, &den).expect("passive circuits have proper impedance")
}

/// State-space realisation: diagonal for Foster circuits, tridiagonal for Cauer-I ladders.
pub fn circuit_state_space(c: &Circuit) -> Option<LtiSystem> {
    match c.topology {
        Topology::Classical | Topology::Dynamic => {
            let mut d = 0.0;
            let mut diag = Vec::new();
            let mut b = Vec::new();
            for e in &c.elements {
                match *e {
                    Element::SeriesR(r) => d += r,
                    Element::SeriesC(cap) => {
                        diag.push(0.0);
                        b.push(1.0 / cap);
                    }
                    Element::ParallelRc { r, c: cap } => {
                        diag.push(-1.0 / (r * cap));
                        b.push(1.0 / cap);
                    }
                    _ => return None,
                }
            }
            let n = diag.len();
            Some(LtiSystem::new(
                DMatrix::from_diagonal(&DVector::from_vec(diag)),
                DVector::from_vec(b),
                RowDVector::from_element(n, 1.0),
                d,
            ))
        }
        Topology::LadderCauer1 => {
            let mut r_first = 0.0;
            let mut caps = Vec::new();
            // resistor after each capacitor; None = open end
            let mut r_after: Vec<Option<f64>> = Vec::new();
            for e in &c.elements {
                match *e {
                    Element::SeriesR(r) if caps.is_empty() => r_first = r,
                    Element::SeriesR(r) => *r_after.last_mut()? = Some(r),
                    Element::ShuntC(cap) => {
                        caps.push(cap);
                        r_after.push(None);
                    }
                    _ => return None,
                }
            }
            let m = caps.len();
            let mut a = DMatrix::zeros(m, m);
            for k in 0..m {
                if let Some(r) = r_after[k] {
                    a[(k, k)] -= 1.0 / (r * caps[k]);
                    if k + 1 < m {
                        a[(k, k + 1)] += 1.0 / (r * caps[k]);
                        a[(k + 1, k + 1)] -= 1.0 / (r * caps[k + 1]);
                        a[(k + 1, k)] += 1.0 / (r * caps[k + 1]);
                    }
                }
            }
            let mut b = DVector::zeros(m);
            b[0] = 1.0 / caps[0];
            let mut cr = RowDVector::zeros(m);
            cr[0] = 1.0;
            Some(LtiSystem::new(a, b, cr, r_first))
        }
        Topology::LadderCauer2 => None,
    }
}

fn circuit_from_foster(topology: Topology, f: &FosterExpansion, terms: &[(f64, f64)]) -> Circuit {
    let mut elements = Vec::new();
    if f.k_inf > 0.0 {
        elements.push(Element::SeriesR(f.k_inf));
    }
    if f.k0 > 0.0 {
        elements.push(Element::SeriesC(1.0 / f.k0));
    }
    for &(k, sigma) in terms {
        elements.push(Element::ParallelRc { r: k / sigma, c: 1.0 / k });
    }
    Circuit::new(topology, elements)
}

/// Foster-I circuit: series R and C plus one parallel RC branch per stable pole.
pub fn synth_dynamic(g: &RationalFunction) -> Result<Circuit, SynthesisError> {
    let f = foster_expand(g)?;
    Ok(circuit_from_foster(Topology::Dynamic, &f, &f.terms))
}

/// Series R and C plus the single branch with the largest `k_i / sigma_i`.
pub fn synth_classical(g: &RationalFunction) -> Result<Circuit, SynthesisError> {
    let pr = is_positive_real(g);
    if let crate::netsynth::passivity::PrVerdict::Fail(reason) = pr.verdict {
        return Err(SynthesisError::NotPositiveReal(reason));
    }
    let f = foster_expand(g)?;
    let best = f.terms.iter().copied().reduce(|a, b| {
        let (ea, eb) = (a.0 / a.1, b.0 / b.1);
        if eb > ea * (1.0 + 1e-12) || ((eb - ea).abs() <= 1e-12 * ea && b.1 < a.1) { b } else { a }
    });
    let mut c = circuit_from_foster(Topology::Classical, &f, best.as_slice());
    if best.is_none() {
        log::warn!("no stable Foster term; classical circuit reduces to series R-C");
        c.warnings.push("no stable term available; series R-C only".into());
    }
    Ok(c)
}

fn fmt_value(v: f64) -> String {
    format!("{v:.5e}")
}

/// SPICE-style netlist between port nodes `1` and `0`.
pub fn export_netlist(c: &Circuit, label: &str) -> String {
    let mut out = format!("* circsynth {} {}\n", c.topology.name(), label);
    let mut node = 1usize;
    let mut next_node = 2usize;
    let last = c.elements.len().saturating_sub(1);
    if c.topology.is_ladder() {
        let (mut nr, mut nc) = (0, 0);
        for (idx, e) in c.elements.iter().enumerate() {
            let (kind, v, series) = match *e {
                Element::SeriesR(v) => ('R', v, true),
                Element::SeriesC(v) => ('C', v, true),
                Element::ShuntR(v) => ('R', v, false),
                Element::ShuntC(v) => ('C', v, false),
                Element::ParallelRc { .. } => unreachable!("ladders have no parallel branches"),
            };
            let k = if kind == 'R' { nr += 1; nr } else { nc += 1; nc };
            if series {
                let to = if idx == last { 0 } else { next_node };
                out += &format!("{kind}{k} {node} {to} {}\n", fmt_value(v));
                node = to;
                next_node += 1;
            } else {
                out += &format!("{kind}{k} {node} 0 {}\n", fmt_value(v));
            }
        }
    } else {
        let mut nb = 0;
        for (idx, e) in c.elements.iter().enumerate() {
            let to = if idx == last { 0 } else { next_node };
            match *e {
                Element::SeriesR(v) => out += &format!("R0 {node} {to} {}\n", fmt_value(v)),
                Element::SeriesC(v) => out += &format!("C0 {node} {to} {}\n", fmt_value(v)),
                Element::ParallelRc { r, c } => {
                    nb += 1;
                    out += &format!("R{nb} {node} {to} {}\n", fmt_value(r));
                    out += &format!("C{nb} {node} {to} {}\n", fmt_value(c));
                }
                _ => unreachable!("Foster circuits have no shunt elements"),
            }
            node = to;
            next_node += 1;
        }
    }
    out += ".end\n";
    out
}
