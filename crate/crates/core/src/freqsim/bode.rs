//! Bode data.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::SimError;
use crate::freqsim::fmt_num;
use crate::linearize::LtiSystem;
use crate::mor::log_grid;
use crate::netsynth::Circuit;
use crate::rational::RationalFunction;

pub trait FrequencyResponse {
    fn response(&self, s: Complex64) -> Complex64;
}

impl FrequencyResponse for RationalFunction {
    fn response(&self, s: Complex64) -> Complex64 {
        self.eval(s)
    }
}

impl FrequencyResponse for LtiSystem {
    fn response(&self, s: Complex64) -> Complex64 {
        self.eval(s)
    }
}

impl FrequencyResponse for Circuit {
    fn response(&self, s: Complex64) -> Complex64 {
        self.impedance_at(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BodeData {
    pub omega: Vec<f64>,
    pub magnitude_db: Vec<f64>,
    pub phase_deg: Vec<f64>,
    /// Grid indices that landed on a pole; their entries are infinite/NaN.
    pub flagged: Vec<usize>,
}

/// 200 log-spaced points over `[1e-4, 1e2]` rad/s.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-4, 1e2, 200)
}

pub fn bode<Z: FrequencyResponse + ?Sized>(z: &Z, omega: &[f64]) -> Result<BodeData, SimError> {
    if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(SimError::Setup("frequency grid must be finite and non-negative".into()));
    }
    if omega.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SimError::Setup("frequency grid must be strictly increasing".into()));
    }
    let mut magnitude_db = Vec::with_capacity(omega.len());
    let mut phase_deg = Vec::with_capacity(omega.len());
    let mut flagged = Vec::new();
    let mut prev: Option<f64> = None;
    for (k, &w) in omega.iter().enumerate() {
        let v = z.response(Complex64::new(0.0, w));
        if !v.re.is_finite() || !v.im.is_finite() || v.norm() == 0.0 {
            flagged.push(k);
            magnitude_db.push(if v.norm() == 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
            phase_deg.push(f64::NAN);
            continue;
        }
        magnitude_db.push(20.0 * v.norm().log10());
        let mut ph = v.arg().to_degrees();
        if let Some(p) = prev {
            ph += 360.0 * ((p - ph) / 360.0).round();
        }
        prev = Some(ph);
        phase_deg.push(ph);
    }
    Ok(BodeData { omega: omega.to_vec(), magnitude_db, phase_deg, flagged })
}

impl BodeData {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("omega_rad_s,mag_db,phase_deg\n");
        for k in 0..self.omega.len() {
            out += &format!("{},{},{}\n", fmt_num(self.omega[k]), fmt_num(self.magnitude_db[k]), fmt_num(self.phase_deg[k]));
        }
        out
    }

    /// Largest pointwise magnitude (dB) and phase (deg) differences.
    pub fn max_difference(&self, other: &BodeData) -> (f64, f64) {
        let mut dm: f64 = 0.0;
        let mut dp: f64 = 0.0;
        for k in 0..self.omega.len().min(other.omega.len()) {
            dm = dm.max((self.magnitude_db[k] - other.magnitude_db[k]).abs());
            dp = dp.max((self.phase_deg[k] - other.phase_deg[k]).abs());
        }
        (dm, dp)
    }
}
