//! Adaptive TR-BDF2 integration of the nonlinear cell model.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::freqsim::fmt_num;
use crate::specmodel::NonlinearOde;

/// Applied current density in A m^-2 as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { current: f64 },
    Sinusoid { offset: f64, amplitude: f64, omega: f64 },
    /// Piecewise-linear samples `(t, i)`, held constant outside their range.
    Samples { points: Vec<(f64, f64)> },
}

impl Profile {
    pub fn constant(current: f64) -> Self {
        Profile::Constant { current }
    }

    pub fn sinusoid(offset: f64, amplitude: f64, omega: f64) -> Self {
        Profile::Sinusoid { offset, amplitude, omega }
    }

    pub fn current(&self, t: f64) -> f64 {
        match self {
            Profile::Constant { current } => *current,
            Profile::Sinusoid { offset, amplitude, omega } => offset + amplitude * (omega * t).sin(),
            Profile::Samples { points } => {
                let k = points.partition_point(|p| p.0 <= t);
                if k == 0 {
                    return points.first().map_or(0.0, |p| p.1);
                }
                if k == points.len() {
                    return points[k - 1].1;
                }
                let (t0, i0) = points[k - 1];
                let (t1, i1) = points[k];
                i0 + (i1 - i0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Two-column text (`t,i` per line); `#` comments and a non-numeric header are skipped.
    pub fn parse_samples(text: &str) -> Result<Self, SimError> {
        let mut points = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
            let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
            match parsed {
                Some(v) if v.len() == 2 && v.iter().all(|x| x.is_finite()) => points.push((v[0], v[1])),
                None if points.is_empty() && n == 0 => continue,
                _ => return Err(SimError::Setup(format!("bad profile sample on line {}", n + 1))),
            }
        }
        if points.is_empty() {
            return Err(SimError::Setup("empty current profile".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(SimError::Setup("profile times must increase".into()));
        }
        Ok(Profile::Samples { points })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    /// Concentration (mol m^-3) below which the run halts.
    pub c_floor: f64,
    pub max_steps: usize,
    /// Record only at multiples of this interval; every accepted step otherwise.
    pub output_interval: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { rtol: 1e-6, atol: 1e-9, h_init: 1e-4, h_max: 1.0, c_floor: 1.0, max_steps: 1_000_000, output_interval: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Concentration and potential-difference states.
    pub states: Vec<DVector<f64>>,
    pub phi2: Vec<DVector<f64>>,
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub c_min: Vec<f64>,
    pub c_max: Vec<f64>,
    /// Integral of eps*c over the cell.
    pub content: Vec<f64>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trajectory {
    fn empty() -> Self {
        Self {
            times: vec![],
            states: vec![],
            phi2: vec![],
            voltage: vec![],
            current: vec![],
            c_min: vec![],
            c_max: vec![],
            content: vec![],
            steps_accepted: 0,
            steps_rejected: 0,
        }
    }

    fn record(&mut self, ode: &NonlinearOde, t: f64, x: &DVector<f64>, i: f64) -> Result<(), SimError> {
        let l = &ode.layout;
        let c = x.rows(l.c.start, l.n_c());
        self.times.push(t);
        self.phi2.push(ode.phi2(x, i)?);
        self.voltage.push(ode.output(x, i)?);
        self.current.push(i);
        self.c_min.push(c.min());
        self.c_max.push(c.max());
        self.content.push(ode.ionic_content(x));
        self.states.push(x.clone());
        Ok(())
    }

    /// Largest relative change of the ionic content from its initial value.
    pub fn content_drift(&self) -> f64 {
        let c0 = self.content[0];
        self.content.iter().map(|c| ((c - c0) / c0).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,V,i_A_m2,c_min,c_max\n");
        for k in 0..self.times.len() {
            out += &format!(
                "{},{},{},{},{}\n",
                fmt_num(self.times[k]),
                fmt_num(self.voltage[k]),
                fmt_num(self.current[k]),
                fmt_num(self.c_min[k]),
                fmt_num(self.c_max[k])
            );
        }
        out
    }
}

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

struct Step {
    x: DVector<f64>,
    f: DVector<f64>,
    err: f64,
}

fn weighted_norm(v: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let n = v.len().max(1) as f64;
    (v.iter().zip(w.iter()).map(|(a, b)| (a / b).powi(2)).sum::<f64>() / n).sqrt()
}

/// Solves `x - a * f(x, t) = rhs` by simplified Newton with a fixed LU.
fn newton(
    ode: &NonlinearOde,
    lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    mut x: DVector<f64>,
    a: f64,
    rhs: &DVector<f64>,
    i: f64,
    w: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let mut prev = f64::INFINITY;
    for _ in 0..10 {
        let f = ode.rhs(&x, i).ok()?;
        let r = &x - &f * a - rhs;
        let dx = lu.solve(&r)?;
        x -= &dx;
        let nrm = weighted_norm(&dx, w);
        if !nrm.is_finite() || nrm > 2.0 * prev {
            return None;
        }
        if nrm < 1e-3 {
            let f = ode.rhs(&x, i).ok()?;
            return Some((x, f));
        }
        prev = nrm;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn try_step(
    ode: &NonlinearOde,
    profile: &Profile,
    opts: &SimOptions,
    t: f64,
    h: f64,
    x: &DVector<f64>,
    f_n: &DVector<f64>,
    jac: &DMatrix<f64>,
) -> Result<Option<Step>, SimError> {
    let n = x.len();
    let w = x.map(|v| opts.atol + opts.rtol * v.abs());
    let eye = DMatrix::<f64>::identity(n, n);

    // trapezoidal stage to t + gamma h
    let a1 = GAMMA * h / 2.0;
    let lu1 = (&eye - jac * a1).lu();
    if !lu1.is_invertible() {
        return Err(SimError::Singular(t));
    }
    let i_g = profile.current(t + GAMMA * h);
    let rhs1 = x + f_n * a1;
    let Some((x_g, f_g)) = newton(ode, &lu1, x + f_n * (GAMMA * h), a1, &rhs1, i_g, &w) else {
        return Ok(None);
    };

    // BDF2 stage to t + h
    let a2 = (1.0 - GAMMA) / (2.0 - GAMMA) * h;
    let lu2 = (&eye - jac * a2).lu();
    if !lu2.is_invertible() {
        return Err(SimError::Singular(t));
    }
    let i_1 = profile.current(t + h);
    let cg = 1.0 / (GAMMA * (2.0 - GAMMA));
    let cn = (1.0 - GAMMA).powi(2) / (GAMMA * (2.0 - GAMMA));
    let rhs2 = &x_g * cg - x * cn;
    let guess = &x_g + &f_g * ((1.0 - GAMMA) * h);
    let Some((x1, f1)) = newton(ode, &lu2, guess, a2, &rhs2, i_1, &w) else {
        return Ok(None);
    };

    // local error ~ C h^3 x''' from the divided difference of the three slopes, then filtered
    let c3 = (-3.0 * GAMMA * GAMMA + 4.0 * GAMMA - 2.0) / (12.0 * (2.0 - GAMMA));
    let est = ((&f1 - &f_g) / (1.0 - GAMMA) - (&f_g - f_n) / GAMMA) * (2.0 * c3 * h);
    let est = lu1.solve(&est).unwrap_or(est);
    let w1 = DVector::from_fn(n, |k, _| opts.atol + opts.rtol * x[k].abs().max(x1[k].abs()));
    let err = weighted_norm(&est, &w1);
    Ok(Some(Step { x: x1, f: f1, err }))
}

/// Integrate from the model's equilibrium over `[0, t_end]`.
pub fn simulate(ode: &NonlinearOde, profile: &Profile, t_end: f64, opts: &SimOptions) -> Result<Trajectory, SimError> {
    simulate_from(ode, &ode.equilibrium(), profile, t_end, opts)
}

pub fn simulate_from(
    ode: &NonlinearOde,
    x0: &DVector<f64>,
    profile: &Profile,
    t_end: f64,
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(SimError::Setup(format!("t_end must be positive, got {t_end}")));
    }
    if x0.len() != ode.dim() {
        return Err(SimError::Setup(format!("initial state has {} entries, model has {}", x0.len(), ode.dim())));
    }
    if let Some(dt) = opts.output_interval {
        if !(dt > 0.0) {
            return Err(SimError::Setup("output interval must be positive".into()));
        }
    }
    let l = &ode.layout;
    let check_floor = |t: f64, x: &DVector<f64>| -> Result<(), SimError> {
        for k in 0..l.n_c() {
            let c = x[l.c.start + k];
            if !(c >= opts.c_floor) {
                return Err(SimError::ConcentrationFloor { t, node: k, c });
            }
        }
        Ok(())
    };
    check_floor(0.0, x0)?;

    let mut traj = Trajectory::empty();
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut i = profile.current(t);
    let mut f = ode.rhs(&x, i)?;
    traj.record(ode, t, &x, i)?;
    let mut next_out = opts.output_interval;
    let mut out_count = 1usize;
    let mut h = opts.h_init.min(t_end);

    while t < t_end {
        if traj.steps_accepted + traj.steps_rejected >= opts.max_steps {
            return Err(SimError::StepUnderflow(t));
        }
        let target = next_out.unwrap_or(t_end).min(t_end);
        let mut h_try = h.min(opts.h_max);
        let landing = t + h_try >= target - 1e-12 * target.abs().max(1.0);
        if landing {
            h_try = target - t;
        }
        if h_try <= 1e-14 * t.abs().max(1.0) {
            return Err(SimError::StepUnderflow(t));
        }
        let jac = ode.jacobian(&x, i)?;
        match try_step(ode, profile, opts, t, h_try, &x, &f, &jac)? {
            Some(step) if step.err <= 1.0 => {
                t = if landing { target } else { t + h_try };
                x = step.x;
                f = step.f;
                i = profile.current(t);
                traj.steps_accepted += 1;
                check_floor(t, &x)?;
                if opts.output_interval.is_none() || landing {
                    traj.record(ode, t, &x, i)?;
                }
                if landing {
                    if let Some(dt) = opts.output_interval {
                        out_count += 1;
                        next_out = Some(dt * out_count as f64);
                    }
                }
                let fac = if step.err > 0.0 { 0.9 * step.err.powf(-1.0 / 3.0) } else { 5.0 };
                let grown = h_try * fac.clamp(0.2, 5.0);
                // a step shortened to hit an output time says little about the next one
                h = if landing { grown.max(h.min(5.0 * h_try)) } else { grown };
            }
            Some(step) => {
                traj.steps_rejected += 1;
                h = h_try * (0.9 * step.err.powf(-1.0 / 3.0)).clamp(0.1, 0.9);
            }
            None => {
                traj.steps_rejected += 1;
                h = h_try * 0.25;
            }
        }
    }
    Ok(traj)
}
