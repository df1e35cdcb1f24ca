//! Balanced truncation with integrator separation.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::ReductionError;
use crate::linearize::{LtiSystem, StateLabel};
use crate::lyapunov::{lyapunov_residual, solve_lyapunov, spectral_abscissa};

/// Relative tolerance for classifying integrator eigenvalues.
pub const TOL_INT: f64 = 1e-8;
/// Hankel values below this fraction of the largest one count as zero.
pub const HSV_FLOOR: f64 = 1e-12;
/// Directions of one grammian kept by the degeneracy test (relative eigenvalue).
const DEGEN_KEEP: f64 = 1e-4;
/// Relative induced Hankel value below which a grammian is reported deficient.
const DEGEN_RATIO: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct Grammians {
    pub xc: DMatrix<f64>,
    pub yo: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct BalancedRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    /// Hankel singular values of the minimal part, descending and positive.
    pub hsv: Vec<f64>,
    /// `x = T z` (n x m).
    pub t: DMatrix<f64>,
    /// `z = Tinv x` (m x n).
    pub tinv: DMatrix<f64>,
    /// Order actually kept after tie handling and the minimal-order cap.
    pub r: usize,
    /// Every singular value of the square-root product, including the negligible ones.
    pub hsv_all: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub r: usize,
    /// Requested order before capping or tie extension.
    pub r_requested: usize,
    pub hsv: Vec<f64>,
    pub lower_bound: f64,
    pub measured_error: f64,
    /// Series capacitor equivalent of the integrators (F).
    pub lumped_c: f64,
    pub integrator_count: usize,
    pub minimal_order: usize,
}

/// Integrator/Hurwitz decomposition of a system.
#[derive(Debug, Clone)]
pub struct IntegratorSplit {
    pub a_int: DMatrix<f64>,
    pub b_int: DVector<f64>,
    pub c_int: RowDVector<f64>,
    pub hurwitz: LtiSystem,
}

/// Diagonal state scaling that puts concentration deviations on the scale of `c_e`.
fn conditioning_scale(sys: &LtiSystem) -> Option<DVector<f64>> {
    let ce = sys.c_e?;
    if !sys.labels.contains(&StateLabel::Concentration) {
        return None;
    }
    Some(DVector::from_iterator(
        sys.dim(),
        sys.labels.iter().map(|l| if *l == StateLabel::Concentration { ce } else { 1.0 }),
    ))
}

fn scaled(sys: &LtiSystem) -> LtiSystem {
    match conditioning_scale(sys) {
        None => sys.clone(),
        Some(s) => {
            let n = sys.dim();
            let a = DMatrix::from_fn(n, n, |r, c| sys.a[(r, c)] * s[c] / s[r]);
            let b = DVector::from_fn(n, |r, _| sys.b[r] / s[r]);
            let c = RowDVector::from_fn(n, |_, k| sys.c[k] * s[k]);
            LtiSystem { a, b, c, d: sys.d, labels: sys.labels.clone(), c_e: sys.c_e }
        }
    }
}

fn orth(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Orthonormal basis of the invariant subspace for the `k` eigenvalues nearest zero.
fn near_null_subspace(a: &DMatrix<f64>, k: usize, shift: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    let mut v = DMatrix::from_fn(n, k, |r, c| vt[(idx[c], r)]);
    let lu = (a - DMatrix::identity(n, n) * shift).lu();
    for _ in 0..4 {
        v = orth(&lu.solve(&v)?);
    }
    Some(v)
}

/// Separate integrator modes from the strictly stable part.
///
/// `tol` is relative to the spectral radius. Eigenvalues with modulus below
/// it are integrators; anything else must have real part below `-tol * rho`.
pub fn split_integrators(sys: &LtiSystem, tol: f64) -> Result<IntegratorSplit, ReductionError> {
    let s = scaled(sys);
    let n = s.dim();
    let ev = s.poles();
    let rho = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let thresh = tol * rho;
    let k = ev.iter().filter(|z| z.norm() <= thresh).count();
    if let Some(z) = ev.iter().find(|z| z.norm() > thresh && z.re > -thresh) {
        return Err(ReductionError::AmbiguousSplit { re: z.re, im: z.im });
    }
    if k == 0 {
        return Ok(IntegratorSplit {
            a_int: DMatrix::zeros(0, 0),
            b_int: DVector::zeros(0),
            c_int: RowDVector::zeros(0),
            hurwitz: s,
        });
    }
    if k == n {
        if s.a.amax() > thresh.max(f64::MIN_POSITIVE) {
            let z = ev[0];
            return Err(ReductionError::AmbiguousSplit { re: z.re, im: z.im });
        }
        return Ok(IntegratorSplit {
            a_int: s.a.clone(),
            b_int: s.b.clone(),
            c_int: s.c.clone(),
            hurwitz: LtiSystem::new(DMatrix::zeros(0, 0), DVector::zeros(0), RowDVector::zeros(0), s.d),
        });
    }
    let shift = -1e-3 * thresh.max(f64::MIN_POSITIVE);
    let fail = || ReductionError::Numerical("integrator subspace iteration failed".into());
    let v = near_null_subspace(&s.a, k, shift).ok_or_else(fail)?;
    let w = near_null_subspace(&s.a.transpose(), k, shift).ok_or_else(fail)?;
    // complement: orthonormal basis of the orthogonal complement of the left subspace
    let full = w.clone().qr();
    let q = full.q_columns_full(n);
    let u = q.columns(k, n - k).into_owned();
    let mut t = DMatrix::zeros(n, n);
    t.columns_mut(0, k).copy_from(&v);
    t.columns_mut(k, n - k).copy_from(&u);
    let ti = t.clone().try_inverse().ok_or_else(fail)?;
    let at = &ti * &s.a * &t;
    let bt = &ti * &s.b;
    let ct = &s.c * &t;
    let a_int = at.view((0, 0), (k, k)).into_owned();
    // defective zero eigenvalue shows up as a non-negligible integrator block
    if a_int.amax() > 1e3 * thresh.max(f64::EPSILON * rho) {
        let z = ev.iter().min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap()).copied().unwrap();
        return Err(ReductionError::AmbiguousSplit { re: z.re, im: z.im });
    }
    let a_s = at.view((k, k), (n - k, n - k)).into_owned();
    let mut hurwitz = LtiSystem::new(a_s, bt.rows(k, n - k).into_owned(), ct.columns(k, n - k).into_owned(), s.d);
    hurwitz.c_e = None;
    Ok(IntegratorSplit { a_int, b_int: bt.rows(0, k).into_owned(), c_int: ct.columns(0, k).into_owned(), hurwitz })
}

trait QrFull {
    fn q_columns_full(&self, n: usize) -> DMatrix<f64>;
}

impl QrFull for nalgebra::linalg::QR<f64, nalgebra::Dyn, nalgebra::Dyn> {
    fn q_columns_full(&self, n: usize) -> DMatrix<f64> {
        // apply the Householder reflectors to the identity
        let mut id = DMatrix::<f64>::identity(n, n);
        self.q_tr_mul(&mut id);
        id.transpose()
    }
}

/// Series capacitor (F) equivalent to the integrator modes.
pub fn lumped_capacitance(b_int: &DVector<f64>, c_int: &RowDVector<f64>) -> Result<f64, ReductionError> {
    if b_int.is_empty() {
        return Err(ReductionError::NoIntegrators);
    }
    let g = (c_int * b_int)[0];
    let scale = c_int.norm() * b_int.norm();
    if !(g > 1e-12 * scale) || !(g > 0.0) {
        return Err(ReductionError::Passivity(g));
    }
    Ok(1.0 / g)
}

pub fn grammians(sys: &LtiSystem) -> Result<Grammians, ReductionError> {
    let bb = &sys.b * sys.b.transpose();
    let cc = sys.c.transpose() * &sys.c;
    let xc = solve_lyapunov(&sys.a, &bb)?;
    let yo = solve_lyapunov(&sys.a.transpose(), &cc)?;
    for (name, a, x, q) in [("controllability", &sys.a, &xc, &bb), ("observability", &sys.a.transpose(), &yo, &cc)] {
        let res = lyapunov_residual(a, x, q);
        if !(res < 1e-8) {
            return Err(ReductionError::Numerical(format!("{name} grammian residual {res:e}")));
        }
    }
    Ok(Grammians { xc, yo })
}

/// `L` with `X = L L^T`, from the symmetric eigendecomposition (negative round-off clipped).
fn psd_factor(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let eig = x.clone().symmetric_eigen();
    let w = eig.eigenvalues.map(|v| v.max(0.0));
    let l = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| eig.eigenvectors[(r, c)] * w[c].sqrt());
    (l, w, eig.eigenvectors)
}

/// Ratio test for a grammian that is deficient on the directions the other one excites.
fn degeneracy_ratio(excite: &DMatrix<f64>, other: &DMatrix<f64>, sigma1: f64) -> f64 {
    let (_, w, v) = psd_factor(excite);
    let wmax = w.max();
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > DEGEN_KEEP * wmax).collect();
    let l = DMatrix::from_fn(w.len(), keep.len(), |r, c| v[(r, keep[c])] * w[keep[c]].sqrt());
    let z = l.transpose() * other * &l;
    let zmin = z.symmetric_eigen().eigenvalues.min();
    zmin.max(0.0).sqrt() / sigma1
}

/// Full SVD `(U, sigma, V^T)` with a reconstruction check; the transposed problem is the fallback.
fn checked_svd(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>), ReductionError> {
    let tol = 1e3 * f64::EPSILON * m.nrows() as f64 * m.amax();
    let ok = |u: &DMatrix<f64>, s: &DVector<f64>, vt: &DMatrix<f64>| (u * DMatrix::from_diagonal(s) * vt - m).amax() <= tol;
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    if ok(&u, &svd.singular_values, &vt) {
        return Ok((u, svd.singular_values, vt));
    }
    let svd = m.transpose().svd(true, true);
    let (u, vt) = (svd.v_t.unwrap().transpose(), svd.u.unwrap().transpose());
    if ok(&u, &svd.singular_values, &vt) {
        return Ok((u, svd.singular_values, vt));
    }
    Err(ReductionError::Numerical("inaccurate singular value decomposition".into()))
}

/// Square-root balanced truncation of a Hurwitz system to order `r`.
pub fn balance_and_truncate(sys: &LtiSystem, r: usize) -> Result<(LtiSystem, BalancedRealization), ReductionError> {
    let n = sys.dim();
    if r < 1 || r > n {
        return Err(ReductionError::InvalidOrder { r, n });
    }
    let abscissa = spectral_abscissa(&sys.a);
    if !(abscissa < 0.0) {
        return Err(ReductionError::NotStable(abscissa));
    }
    let s = scaled(sys);
    let g = grammians(&s)?;
    let (lc, _, _) = psd_factor(&g.xc);
    let (lo, _, _) = psd_factor(&g.yo);
    let prod = lo.transpose() * &lc;
    let (u, sv, vt) = checked_svd(&prod)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    let hsv_all: Vec<f64> = order.iter().map(|&i| sv[i]).collect();
    let sigma1 = hsv_all[0];
    if !(sigma1 > 0.0) {
        return Err(ReductionError::Degenerate { grammian: "controllability", ratio: 0.0 });
    }
    for (name, excite, other) in [("observability", &g.xc, &g.yo), ("controllability", &g.yo, &g.xc)] {
        let ratio = degeneracy_ratio(excite, other, sigma1);
        if ratio < DEGEN_RATIO {
            return Err(ReductionError::Degenerate { grammian: name, ratio });
        }
    }
    let m = hsv_all.iter().filter(|&&v| v > HSV_FLOOR * sigma1).count();
    let mut keep = r.min(m);
    if keep < r {
        log::warn!("order {r} exceeds numerical minimal order {m}; keeping {m}");
    }
    while keep < m && (hsv_all[keep - 1] - hsv_all[keep]).abs() <= 1e-9 * hsv_all[keep - 1] {
        log::warn!("tied Hankel values at truncation boundary; keeping the tied group");
        keep += 1;
    }
    let t = DMatrix::from_fn(n, m, |row, c| {
        let i = order[c];
        (0..n).map(|k| lc[(row, k)] * vt[(i, k)]).sum::<f64>() / hsv_all[c].sqrt()
    });
    let tinv = DMatrix::from_fn(m, n, |c, col| {
        let i = order[c];
        (0..n).map(|k| u[(k, i)] * lo[(col, k)]).sum::<f64>() / hsv_all[c].sqrt()
    });
    let ab = &tinv * &s.a * &t;
    let bb = &tinv * &s.b;
    let cb = &s.c * &t;
    let bal = BalancedRealization {
        a: ab.clone(),
        b: bb.clone(),
        c: cb.clone(),
        d: s.d,
        hsv: hsv_all[..m].to_vec(),
        t,
        tinv,
        r: keep,
        hsv_all,
    };
    let reduced = LtiSystem::new(
        ab.view((0, 0), (keep, keep)).into_owned(),
        bb.rows(0, keep).into_owned(),
        cb.columns(0, keep).into_owned(),
        s.d,
    );
    Ok((reduced, bal))
}

/// Log-spaced frequency grid.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1).max(1) as f64)).collect()
}

/// Sampled estimate of `sup_w |G1(jw) - G2(jw)|` with local refinement around the peak.
pub fn hinf_distance(g1: &LtiSystem, g2: &LtiSystem) -> f64 {
    let err = |w: f64| (g1.eval(Complex64::new(0.0, w)) - g2.eval(Complex64::new(0.0, w))).norm();
    let grid = log_grid(1e-6, 1e4, 2000);
    let mut best = err(0.0);
    let mut arg = None;
    for (k, &w) in grid.iter().enumerate() {
        let e = err(w);
        if e > best {
            best = e;
            arg = Some(k);
        }
    }
    if let Some(k) = arg {
        // golden-section search in log frequency around the sampled peak
        let lo = grid[k.saturating_sub(1)].ln();
        let hi = grid[(k + 1).min(grid.len() - 1)].ln();
        let (mut a, mut b) = (lo, hi);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let x1 = b - phi * (b - a);
            let x2 = a + phi * (b - a);
            let (e1, e2) = (err(x1.exp()), err(x2.exp()));
            best = best.max(e1).max(e2);
            if e1 > e2 {
                b = x2;
            } else {
                a = x1;
            }
        }
    }
    best
}

/// Reassemble integrators with a reduced Hurwitz part.
fn combine(split: &IntegratorSplit, stable: &LtiSystem) -> LtiSystem {
    let k = split.b_int.len();
    let r = stable.dim();
    let n = k + r;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (k, k)).copy_from(&split.a_int);
    a.view_mut((k, k), (r, r)).copy_from(&stable.a);
    let mut b = DVector::zeros(n);
    b.rows_mut(0, k).copy_from(&split.b_int);
    b.rows_mut(k, r).copy_from(&stable.b);
    let mut c = RowDVector::zeros(n);
    c.columns_mut(0, k).copy_from(&split.c_int);
    c.columns_mut(k, r).copy_from(&stable.c);
    let mut labels = vec![StateLabel::Integrator; k];
    labels.extend(std::iter::repeat_n(StateLabel::Balanced, r));
    LtiSystem { a, b, c, d: stable.d, labels, c_e: None }
}

/// Split, truncate the Hurwitz part to `r_stable` states and recombine.
pub fn reduce(full: &LtiSystem, r_stable: usize) -> Result<(LtiSystem, ReductionReport), ReductionError> {
    let split = split_integrators(full, TOL_INT)?;
    let lumped_c = lumped_capacitance(&split.b_int, &split.c_int)?;
    let h = &split.hurwitz;
    let (stable, hsv, r, minimal) = if h.dim() == 0 || r_stable == 0 {
        let hsv = if h.dim() > 0 { balance_and_truncate(h, 1)?.1.hsv } else { vec![] };
        let m = hsv.len();
        (LtiSystem::new(DMatrix::zeros(0, 0), DVector::zeros(0), RowDVector::zeros(0), h.d), hsv, 0, m)
    } else {
        let (red, bal) = balance_and_truncate(h, r_stable.min(h.dim()))?;
        (red, bal.hsv.clone(), bal.r, bal.hsv.len())
    };
    let measured_error = hinf_distance(h, &stable);
    let lower_bound = hsv.get(r).copied().unwrap_or(0.0);
    let reduced = combine(&split, &stable);
    let report = ReductionReport {
        r,
        r_requested: r_stable,
        hsv,
        lower_bound,
        measured_error,
        lumped_c,
        integrator_count: split.b_int.len(),
        minimal_order: minimal,
    };
    Ok((reduced, report))
}

/// Merge the integrator states of a reduced model into one state with gain 1/C.
pub fn lump_integrators(sys: &LtiSystem) -> LtiSystem {
    let ints: Vec<usize> = (0..sys.dim()).filter(|&i| sys.labels[i] == StateLabel::Integrator).collect();
    let rest: Vec<usize> = (0..sys.dim()).filter(|&i| sys.labels[i] != StateLabel::Integrator).collect();
    let gain: f64 = ints.iter().map(|&i| sys.c[i] * sys.b[i]).sum();
    let r = rest.len();
    let n = r + 1;
    let mut a = DMatrix::zeros(n, n);
    for (p, &i) in rest.iter().enumerate() {
        for (q, &j) in rest.iter().enumerate() {
            a[(p + 1, q + 1)] = sys.a[(i, j)];
        }
    }
    let mut b = DVector::zeros(n);
    let mut c = RowDVector::zeros(n);
    b[0] = 1.0;
    c[0] = gain;
    for (p, &i) in rest.iter().enumerate() {
        b[p + 1] = sys.b[i];
        c[p + 1] = sys.c[i];
    }
    let mut labels = vec![StateLabel::Integrator];
    labels.extend(rest.iter().map(|&i| sys.labels[i]));
    LtiSystem { a, b, c, d: sys.d, labels, c_e: sys.c_e }
}
