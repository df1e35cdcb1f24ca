//! Continued-fraction (Cauer) ladders for RC impedances.

use crate::error::SynthesisError;
use crate::netsynth::circuit::{Circuit, Element, Topology};
use crate::netsynth::foster::{foster_expand, rc_pole_rates};
use crate::poly;
use crate::rational::RationalFunction;

/// Which end of the continued fraction is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CauerKind {
    /// About `s = infinity`: series R, shunt C.
    First,
    /// About `s = 0`: series C, shunt R.
    Second,
}

fn not_rc(trace: &[f64], what: &str) -> SynthesisError {
    let t: Vec<String> = trace.iter().map(|q| format!("{q:.6e}")).collect();
    SynthesisError::NotRc(format!("{what}; quotients so far [{}]", t.join(", ")))
}

/// Number of ladder elements for an RC impedance with `n` poles.
pub fn cauer_element_count(g: &RationalFunction) -> Result<usize, SynthesisError> {
    let f = foster_expand(g)?;
    let n = g.den_degree();
    Ok(2 * n + usize::from(f.k0 == 0.0) - usize::from(f.k_inf == 0.0))
}

pub fn cauer_expand(g: &RationalFunction, kind: CauerKind) -> Result<Circuit, SynthesisError> {
    rc_pole_rates(g)?;
    let m = cauer_element_count(g)?;
    let mut num = g.num.clone();
    let mut den = g.den.clone();
    let mut trace = Vec::with_capacity(m);
    let mut elements = Vec::with_capacity(m);
    match kind {
        CauerKind::First => {
            // `impedance`: current fraction is Z = num/den, else Y = den/num
            let mut impedance = true;
            if poly::degree(&num) != poly::degree(&den) {
                impedance = false;
            }
            while elements.len() < m {
                let dn = poly::degree(&num).ok_or_else(|| not_rc(&trace, "numerator vanished early"))?;
                let dd = poly::degree(&den).ok_or_else(|| not_rc(&trace, "denominator vanished early"))?;
                if impedance {
                    if dn != dd {
                        return Err(not_rc(&trace, "degree pattern broken"));
                    }
                    let q = num[dn] / den[dd];
                    trace.push(q);
                    if !(q > 0.0) {
                        return Err(not_rc(&trace, "non-positive series resistance"));
                    }
                    elements.push(Element::SeriesR(q));
                    num = poly::add(&num, &poly::scale(&den, -q));
                    num.truncate(dn);
                } else {
                    if dd != dn + 1 {
                        return Err(not_rc(&trace, "degree pattern broken"));
                    }
                    let q = den[dd] / num[dn];
                    trace.push(q);
                    if !(q > 0.0) {
                        return Err(not_rc(&trace, "non-positive shunt capacitance"));
                    }
                    elements.push(Element::ShuntC(q));
                    let mut sn = vec![0.0];
                    sn.extend_from_slice(&num);
                    den = poly::add(&den, &poly::scale(&sn, -q));
                    den.truncate(dd);
                }
                impedance = !impedance;
                if num.is_empty() {
                    num.push(0.0);
                }
                if den.is_empty() {
                    den.push(0.0);
                }
            }
        }
        CauerKind::Second => {
            // series-C step needs a pole at the origin of Z = num/den
            let mut series = den[0] == 0.0;
            while elements.len() < m {
                if series {
                    if den.len() < 2 || den[0] != 0.0 || den[1] == 0.0 || num.is_empty() {
                        return Err(not_rc(&trace, "missing origin pole"));
                    }
                    let q = num[0] / den[1];
                    trace.push(q);
                    if !(q > 0.0) {
                        return Err(not_rc(&trace, "non-positive series elastance"));
                    }
                    elements.push(Element::SeriesC(1.0 / q));
                    let dhat = den[1..].to_vec();
                    let mut n2 = poly::add(&num, &poly::scale(&dhat, -q));
                    n2[0] = 0.0;
                    num = n2[1..].to_vec();
                    den = dhat;
                } else {
                    if num.is_empty() || num[0] == 0.0 {
                        return Err(not_rc(&trace, "impedance vanishes at the origin"));
                    }
                    let q = den[0] / num[0];
                    trace.push(q);
                    if !(q > 0.0) {
                        return Err(not_rc(&trace, "non-positive shunt conductance"));
                    }
                    elements.push(Element::ShuntR(1.0 / q));
                    let mut d2 = poly::add(&den, &poly::scale(&num, -q));
                    d2[0] = 0.0;
                    den = d2;
                }
                series = !series;
                if num.is_empty() {
                    num.push(0.0);
                }
            }
        }
    }
    let topology = match kind {
        CauerKind::First => Topology::LadderCauer1,
        CauerKind::Second => Topology::LadderCauer2,
    };
    let circuit = Circuit::new(topology, elements);
    if !circuit.is_valid() {
        return Err(not_rc(&trace, "invalid element value"));
    }
    Ok(circuit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netsynth::circuit::circuit_impedance;
    use num_complex::Complex64;

    fn close(a: &RationalFunction, b: &RationalFunction) -> bool {
        [0.01, 0.3, 1.0, 7.0, 100.0].iter().all(|w| {
            let s = Complex64::new(0.0, *w);
            ((a.eval(s) - b.eval(s)) / b.eval(s)).norm() < 1e-9
        })
    }

    #[test]
    fn both_forms_round_trip() {
        let cases = [
            RationalFunction::from_real_factors(&[0.5, 3.0], &[0.0, 1.0, 5.0], 2.0).unwrap(),
            RationalFunction::from_real_factors(&[2.0, 7.0], &[1.0, 5.0], 2.0).unwrap(),
            RationalFunction::from_real_factors(&[0.5], &[0.0, 1.0], 0.7).unwrap(),
        ];
        for g in &cases {
            for kind in [CauerKind::First, CauerKind::Second] {
                let c = cauer_expand(g, kind).unwrap();
                assert_eq!(c.elements.len(), cauer_element_count(g).unwrap());
                assert!(close(&circuit_impedance(&c), g), "{kind:?} {:?}", c.elements);
            }
        }
    }

    #[test]
    fn element_order() {
        let g = RationalFunction::from_real_factors(&[0.5], &[0.0, 1.0], 1.0).unwrap();
        let c = cauer_expand(&g, CauerKind::First).unwrap();
        assert!(matches!(c.elements[0], Element::ShuntC(_)));
        let c = cauer_expand(&g, CauerKind::Second).unwrap();
        assert!(matches!(c.elements[0], Element::SeriesC(_)));
    }

    #[test]
    fn rejects_non_rc() {
        // zero below the lowest pole makes the impedance RL-like
        let g = RationalFunction::from_real_factors(&[0.5], &[1.0, 3.0], 1.0).unwrap();
        let err = cauer_expand(&g, CauerKind::First).unwrap_err();
        assert!(matches!(err, SynthesisError::NotRc(_)));
    }
}
