//! Discretised porous-electrode cell: electrode | separator | electrode.
//!
//! States are the interior concentration samples `c` followed by the interior
//! samples of the potential difference `eta = phi1 - phi2` in both electrodes.
//! Boundary samples are eliminated through the boundary rows, so the mass
//! matrix stays square and invertible. The liquid potential `phi2` is an
//! algebraic unknown on every node until [`eliminate_phi2`] removes it.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::ModelError;
use crate::params::ModelParams;
use crate::spectral::{cheb_diff_matrix, clenshaw_curtis_weights, DiffMatrix};

/// Mass-matrix condition number above which [`to_ode`] attaches a warning.
pub const MASS_COND_WARN: f64 = 1e12;

/// Model variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    /// Electrolyte conductivity proportional to concentration.
    KappaOfC,
    /// Double-layer capacitance affine in the potential difference.
    ACOfPhi,
}

impl std::str::FromStr for Variant {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, ModelError> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "kappa_of_c" => Ok(Variant::KappaOfC),
            "aC_of_phi" | "ac_of_phi" => Ok(Variant::ACOfPhi),
            _ => Err(ModelError::InvalidParam { name: "variant".into(), reason: format!("unknown variant `{s}`") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Electrode,
    Separator,
}

/// Node pinned to `phi2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NodeRef {
    /// 0 = left electrode, 1 = separator, 2 = right electrode.
    pub domain: usize,
    pub node: usize,
}

/// Assembly switches beyond the physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyOptions {
    /// `None` leaves the potential undetermined, which makes elimination fail.
    pub reference: Option<NodeRef>,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { reference: Some(NodeRef { domain: 0, node: 0 }) }
    }
}

#[derive(Debug, Clone)]
pub struct Domain {
    pub kind: DomainKind,
    pub x0: f64,
    pub x1: f64,
    pub op: DiffMatrix,
    pub diffusivity: f64,
    pub porosity: f64,
    pub kappa: f64,
    /// Offset of the first node in the full node vector.
    pub offset: usize,
}

impl Domain {
    pub fn nodes(&self) -> usize {
        self.op.len()
    }
}

/// Index ranges and node positions of the state vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateLayout {
    pub c: Range<usize>,
    pub eta: Range<usize>,
    /// Position (m) of each concentration state.
    pub c_positions: Vec<f64>,
    /// Position (m) of each potential-difference state.
    pub eta_positions: Vec<f64>,
}

impl StateLayout {
    pub fn n_c(&self) -> usize {
        self.c.len()
    }
    pub fn n_eta(&self) -> usize {
        self.eta.len()
    }
    pub fn dim(&self) -> usize {
        self.c.len() + self.eta.len()
    }
}

/// Grid, boundary elimination and quadrature shared by every assembly.
#[derive(Debug, Clone)]
pub struct CellGrid {
    pub domains: [Domain; 3],
    /// Number of nodes including boundaries.
    pub n_full: usize,
    /// Full-node index of every concentration state.
    pub c_interior: Vec<usize>,
    /// Maps interior concentrations to all nodes (n_full x n_c).
    pub c_prolong: DMatrix<f64>,
    /// Weights w with w . c_int = integral of eps * c over the cell (per unit area).
    pub content_weights: RowDVector<f64>,
    pub layout: StateLayout,
}

const C_BOUNDARY_ROWS: [&str; 6] = [
    "collector_flux_left",
    "interface_c_left",
    "interface_flux_left",
    "interface_c_right",
    "interface_flux_right",
    "collector_flux_right",
];

fn singular_row(m: &DMatrix<f64>, names: &[&str]) -> Option<String> {
    let svd = m.clone().svd(true, false);
    let smax = svd.singular_values.max();
    let (imin, smin) = svd.singular_values.argmin();
    if smax > 0.0 && smin > 1e-13 * smax {
        return None;
    }
    let u = svd.u.as_ref()?;
    let col = u.column(imin);
    let row = col.iamax();
    Some(names.get(row).map(|s| s.to_string()).unwrap_or_else(|| format!("row {row}")))
}

impl CellGrid {
    pub fn new(p: &ModelParams) -> Result<Self, ModelError> {
        p.validate()?;
        let (le, ls) = (p.l_electrode, p.l_separator);
        let ne = p.n_electrode + 1;
        let ns = p.n_separator + 1;
        let spans = [(0.0, le, ne), (le, le + ls, ns), (le + ls, 2.0 * le + ls, ne)];
        let kinds = [DomainKind::Electrode, DomainKind::Separator, DomainKind::Electrode];
        let mut offset = 0;
        let mut doms = Vec::with_capacity(3);
        for k in 0..3 {
            let (a, b, n) = spans[k];
            let op = cheb_diff_matrix(n, a, b)?;
            let (diffusivity, porosity, kappa) = match kinds[k] {
                DomainKind::Electrode => (p.d_electrode, p.eps_electrode, p.kappa_electrode),
                DomainKind::Separator => (p.d_separator, p.eps_separator, p.kappa_separator),
            };
            let len = op.len();
            doms.push(Domain { kind: kinds[k], x0: a, x1: b, op, diffusivity, porosity, kappa, offset });
            offset += len;
        }
        let domains: [Domain; 3] = doms.try_into().expect("three domains");
        let n_full = offset;

        let mut c_interior = Vec::new();
        for d in &domains {
            c_interior.extend((1..d.nodes() - 1).map(|j| d.offset + j));
        }
        let n_c = c_interior.len();
        let last = |d: &Domain| d.offset + d.nodes() - 1;
        let boundary = [
            domains[0].offset,
            last(&domains[0]),
            domains[1].offset,
            last(&domains[1]),
            domains[2].offset,
            last(&domains[2]),
        ];

        // boundary rows acting on the full concentration vector
        let mut k = DMatrix::<f64>::zeros(6, n_full);
        let d1_row = |d: &Domain, node: usize, scale: f64, k: &mut DMatrix<f64>, r: usize| {
            for j in 0..d.nodes() {
                k[(r, d.offset + j)] += scale * d.op.d1[(node, j)];
            }
        };
        d1_row(&domains[0], 0, 1.0, &mut k, 0);
        k[(1, boundary[1])] = 1.0;
        k[(1, boundary[2])] = -1.0;
        d1_row(&domains[0], domains[0].nodes() - 1, domains[0].diffusivity, &mut k, 2);
        d1_row(&domains[1], 0, -domains[1].diffusivity, &mut k, 2);
        k[(3, boundary[3])] = 1.0;
        k[(3, boundary[4])] = -1.0;
        d1_row(&domains[1], domains[1].nodes() - 1, domains[1].diffusivity, &mut k, 4);
        d1_row(&domains[2], 0, -domains[2].diffusivity, &mut k, 4);
        d1_row(&domains[2], domains[2].nodes() - 1, 1.0, &mut k, 5);

        let kb = DMatrix::from_fn(6, 6, |r, j| k[(r, boundary[j])]);
        let ki = DMatrix::from_fn(6, n_c, |r, j| k[(r, c_interior[j])]);
        if let Some(row) = singular_row(&kb, &C_BOUNDARY_ROWS) {
            return Err(ModelError::Assembly { row });
        }
        let sol = kb.lu().solve(&(-ki)).ok_or_else(|| ModelError::Assembly { row: C_BOUNDARY_ROWS[0].into() })?;
        let mut c_prolong = DMatrix::<f64>::zeros(n_full, n_c);
        for (j, &g) in c_interior.iter().enumerate() {
            c_prolong[(g, j)] = 1.0;
        }
        for (r, &g) in boundary.iter().enumerate() {
            for j in 0..n_c {
                c_prolong[(g, j)] = sol[(r, j)];
            }
        }

        let mut full_w = RowDVector::<f64>::zeros(n_full);
        for d in &domains {
            let w = clenshaw_curtis_weights(d.op.order, d.x0, d.x1);
            for j in 0..d.nodes() {
                full_w[d.offset + j] = d.porosity * w[j];
            }
        }
        let content_weights = &full_w * &c_prolong;

        let node_x = |g: usize| -> f64 {
            for d in &domains {
                if g >= d.offset && g < d.offset + d.nodes() {
                    return d.op.nodes[g - d.offset];
                }
            }
            unreachable!()
        };
        let c_positions: Vec<f64> = c_interior.iter().map(|&g| node_x(g)).collect();
        let mut eta_positions = Vec::new();
        for k in [0, 2] {
            let d = &domains[k];
            eta_positions.extend(d.op.nodes[1..d.nodes() - 1].iter().copied());
        }
        let n_eta = eta_positions.len();
        let layout = StateLayout { c: 0..n_c, eta: n_c..n_c + n_eta, c_positions, eta_positions };
        Ok(Self { domains, n_full, c_interior, c_prolong, content_weights, layout })
    }

    /// Full-node index of a domain node.
    pub fn full_index(&self, r: NodeRef) -> Option<usize> {
        let d = self.domains.get(r.domain)?;
        (r.node < d.nodes()).then_some(d.offset + r.node)
    }
}

/// Affine map `phi2 = Hx x + Hl ln(c) + Hi i` on all nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Phi2Recovery {
    pub hx: DMatrix<f64>,
    pub hl: DMatrix<f64>,
    pub hi: DVector<f64>,
}

impl Phi2Recovery {
    pub fn eval(&self, x: &DVector<f64>, ln_c: &DVector<f64>, i: f64) -> DVector<f64> {
        &self.hx * x + &self.hl * ln_c + &self.hi * i
    }
}

/// The algebraic liquid-potential constraint
/// `0 = Gx x + Gphi phi2 + Gln ln(c) + gi i` and how `phi2` enters the dynamics and output.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicBlock {
    pub a_phi: DMatrix<f64>,
    pub gx: DMatrix<f64>,
    pub gphi: DMatrix<f64>,
    pub gln: DMatrix<f64>,
    pub gi: DVector<f64>,
    pub c_phi: RowDVector<f64>,
    pub row_names: Vec<String>,
}

/// Source of state-dependent coefficients for the model variants.
#[derive(Debug, Clone)]
pub struct CellModel {
    pub params: ModelParams,
    pub variant: Variant,
    pub options: AssemblyOptions,
    pub grid: CellGrid,
}

/// `M x' = A x + Bln ln(c) + Bi i`, `V = C x + Dln ln(c) + Di i`, optionally
/// with the algebraic liquid-potential block still attached.
#[derive(Debug, Clone)]
pub struct DescriptorSystem {
    pub mass: DMatrix<f64>,
    pub dynamics: DMatrix<f64>,
    /// Columns act on ln(c) of the concentration states.
    pub b_ln: DMatrix<f64>,
    pub b_i: DVector<f64>,
    pub c_out: RowDVector<f64>,
    pub d_ln: RowDVector<f64>,
    pub d_i: f64,
    pub layout: StateLayout,
    pub algebraic: Option<AlgebraicBlock>,
    pub phi2_recovery: Option<Phi2Recovery>,
    pub variant: Variant,
    pub model: Arc<CellModel>,
}

/// Coefficients frozen at one state.
struct Coefficients {
    /// Conductivity per full node.
    kappa: Vec<f64>,
    /// `None`: log form `kappa theta d ln c`. `Some(s)`: linear form `s_node theta dc`.
    linear_slope: Option<Vec<f64>>,
    /// Capacitance per eta state.
    a_c: Vec<f64>,
}

impl CellModel {
    pub fn new(params: &ModelParams, variant: Variant, options: AssemblyOptions) -> Result<Self, ModelError> {
        let grid = CellGrid::new(params)?;
        Ok(Self { params: params.clone(), variant, options, grid })
    }

    /// Equilibrium state: uniform `c_init`, zero potential difference.
    pub fn equilibrium(&self) -> DVector<f64> {
        self.uniform_state(self.params.c_init)
    }

    pub fn uniform_state(&self, c: f64) -> DVector<f64> {
        let l = &self.grid.layout;
        let mut x = DVector::zeros(l.dim());
        x.rows_mut(l.c.start, l.n_c()).fill(c);
        x
    }

    fn coefficients(&self, x: &DVector<f64>) -> Coefficients {
        let g = &self.grid;
        let p = &self.params;
        let l = &g.layout;
        let mut kappa = vec![0.0; g.n_full];
        for d in &g.domains {
            for j in 0..d.nodes() {
                kappa[d.offset + j] = d.kappa;
            }
        }
        let mut linear_slope = None;
        if self.variant == Variant::KappaOfC {
            let c_full = &g.c_prolong * x.rows(l.c.start, l.n_c());
            let mut slope = vec![0.0; g.n_full];
            for d in &g.domains {
                let ratio = d.kappa / p.kappa_electrode;
                for j in 0..d.nodes() {
                    let s = p.kappa0 * ratio;
                    slope[d.offset + j] = s;
                    kappa[d.offset + j] = s * c_full[d.offset + j];
                }
            }
            linear_slope = Some(slope);
        }
        let a_c = match self.variant {
            Variant::ACOfPhi => x.rows(l.eta.start, l.n_eta()).iter().map(|eta| p.alpha + p.beta * eta).collect(),
            _ => vec![p.a_c; l.n_eta()],
        };
        Coefficients { kappa, linear_slope, a_c }
    }

    /// Descriptor form with coefficients frozen at state `x` (phi2 not eliminated).
    pub fn descriptor_at(self: &Arc<Self>, x: &DVector<f64>) -> Result<DescriptorSystem, ModelError> {
        let coef = self.coefficients(x);
        build_descriptor(self, &coef)
    }
}

/// Linear forms over z = [x, phi2, i].
struct ZSpace {
    nx: usize,
    nf: usize,
}

impl ZSpace {
    fn len(&self) -> usize {
        self.nx + self.nf + 1
    }
    fn phi(&self, g: usize) -> usize {
        self.nx + g
    }
    fn input(&self) -> usize {
        self.nx + self.nf
    }
}

fn build_descriptor(model: &Arc<CellModel>, coef: &Coefficients) -> Result<DescriptorSystem, ModelError> {
    let g = &model.grid;
    let p = &model.params;
    let l = &g.layout;
    let nc = l.n_c();
    let nx = l.dim();
    let nf = g.n_full;
    let z = ZSpace { nx, nf };
    let nz = z.len();
    let theta = p.theta();
    let gamma = p.gamma();

    // eta on all nodes of each electrode, as forms over z
    let mut eta_full: Vec<DMatrix<f64>> = Vec::with_capacity(2);
    let mut eta_state_offset = l.eta.start;
    for (e, k) in [(0usize, 0usize), (1, 2)] {
        let d = &g.domains[k];
        let n = d.op.order;
        let mut m = DMatrix::<f64>::zeros(n + 1, nz);
        for j in 1..n {
            m[(j, eta_state_offset + j - 1)] = 1.0;
        }
        eta_state_offset += n - 1;
        // rows 0 and n: sigma d(eta + phi2)/dx = i at the collector, 0 at the interface
        let rows = [0, n];
        let a2 = DMatrix::from_fn(2, 2, |r, c| d.op.d1[(rows[r], rows[c])]);
        let mut rhs = DMatrix::<f64>::zeros(2, nz);
        for (r, &row) in rows.iter().enumerate() {
            for j in 1..n {
                let w = d.op.d1[(row, j)];
                for col in 0..nz {
                    rhs[(r, col)] -= w * m[(j, col)];
                }
            }
            for j in 0..=n {
                rhs[(r, z.phi(d.offset + j))] -= d.op.d1[(row, j)];
            }
        }
        let collector = if e == 0 { 0 } else { 1 };
        rhs[(collector, z.input())] += 1.0 / p.sigma;
        let names = if e == 0 {
            ["collector_current_left", "separator_current_left"]
        } else {
            ["separator_current_right", "collector_current_right"]
        };
        if let Some(row) = singular_row(&a2, &names) {
            return Err(ModelError::Assembly { row });
        }
        let sol = a2.lu().solve(&rhs).ok_or_else(|| ModelError::Assembly { row: names[0].into() })?;
        m.set_row(0, &sol.row(0));
        m.set_row(n, &sol.row(1));
        eta_full.push(m);
    }
    let electrode_of = |k: usize| -> Option<usize> {
        match k {
            0 => Some(0),
            2 => Some(1),
            _ => None,
        }
    };

    // algebraic rows: total current balance at every node except node 0 of each domain
    let mut grows: Vec<RowDVector<f64>> = Vec::new();
    let mut glrows: Vec<RowDVector<f64>> = Vec::new();
    let mut names = Vec::new();
    for (k, d) in g.domains.iter().enumerate() {
        let n = d.op.order;
        let block = g.c_prolong.rows(d.offset, n + 1);
        for node in 1..=n {
            let mut r = RowDVector::<f64>::zeros(nz);
            let mut rl = RowDVector::<f64>::zeros(nc);
            let d1 = d.op.d1.row(node);
            if let Some(e) = electrode_of(k) {
                r += (d1 * &eta_full[e]) * p.sigma;
                for j in 0..=n {
                    r[z.phi(d.offset + j)] += p.sigma * d1[j];
                }
            }
            let kap = coef.kappa[d.offset + node];
            for j in 0..=n {
                r[z.phi(d.offset + j)] += kap * d1[j];
            }
            let dc = d1 * block;
            match &coef.linear_slope {
                None => rl -= dc * (kap * theta),
                Some(slope) => {
                    let s = slope[d.offset + node] * theta;
                    for j in 0..nc {
                        r[l.c.start + j] -= s * dc[j];
                    }
                }
            }
            r[z.input()] -= 1.0;
            grows.push(r);
            glrows.push(rl);
            names.push(format!("current_balance[{k}:{node}]"));
        }
    }
    if let Some(rf) = model.options.reference {
        let gidx = g.full_index(rf).ok_or_else(|| ModelError::InvalidParam {
            name: "reference".into(),
            reason: format!("node {:?} outside grid", rf),
        })?;
        let mut r = RowDVector::<f64>::zeros(nz);
        r[z.phi(gidx)] = 1.0;
        grows.push(r);
        glrows.push(RowDVector::zeros(nc));
        names.push("phi2_reference".into());
    }
    for k in 0..2 {
        let a = g.domains[k].offset + g.domains[k].nodes() - 1;
        let b = g.domains[k + 1].offset;
        let mut r = RowDVector::<f64>::zeros(nz);
        r[z.phi(a)] = 1.0;
        r[z.phi(b)] = -1.0;
        grows.push(r);
        glrows.push(RowDVector::zeros(nc));
        names.push(format!("phi2_continuity[{k}]"));
    }
    let ng = grows.len();
    let gz = DMatrix::from_fn(ng, nz, |r, c| grows[r][c]);
    let gln = DMatrix::from_fn(ng, nc, |r, c| glrows[r][c]);

    // dynamics
    let mut mass = DMatrix::<f64>::zeros(nx, nx);
    let mut dynz = DMatrix::<f64>::zeros(nx, nz);
    let d2_full = {
        let mut d2 = DMatrix::<f64>::zeros(nf, nf);
        for d in &g.domains {
            d2.view_mut((d.offset, d.offset), (d.nodes(), d.nodes())).copy_from(&d.op.d2);
        }
        d2 * &g.c_prolong
    };
    let mut eta_row_of_node = std::collections::HashMap::new();
    let mut eta_row = l.eta.start;
    for k in [0usize, 2] {
        let d = &g.domains[k];
        for j in 1..d.op.order {
            eta_row_of_node.insert(d.offset + j, eta_row);
            eta_row += 1;
        }
    }
    for (r, &gidx) in g.c_interior.iter().enumerate() {
        let d = g.domains.iter().find(|d| gidx >= d.offset && gidx < d.offset + d.nodes()).unwrap();
        mass[(r, r)] = d.porosity;
        for j in 0..nc {
            dynz[(r, l.c.start + j)] = d.diffusivity * d2_full[(gidx, j)];
        }
        if let Some(&er) = eta_row_of_node.get(&gidx) {
            mass[(r, er)] = coef.a_c[er - l.eta.start] * gamma / p.faraday;
        }
    }
    for (e, k) in [(0usize, 0usize), (1, 2)] {
        let d = &g.domains[k];
        let n = d.op.order;
        for j in 1..n {
            let row = eta_row_of_node[&(d.offset + j)];
            mass[(row, row)] = coef.a_c[row - l.eta.start];
            let d2 = d.op.d2.row(j);
            let mut rz = (d2 * &eta_full[e]) * p.sigma;
            for q in 0..=n {
                rz[z.phi(d.offset + q)] += p.sigma * d2[q];
            }
            dynz.set_row(row, &rz);
        }
    }

    // output V = phi1(right end) - phi1(left end)
    let mut out = RowDVector::<f64>::zeros(nz);
    let right = &g.domains[2];
    out += eta_full[1].row(right.op.order);
    out[z.phi(right.offset + right.op.order)] += 1.0;
    out -= eta_full[0].row(0);
    out[z.phi(g.domains[0].offset)] -= 1.0;

    let dynamics = dynz.columns(0, nx).into_owned();
    let a_phi = dynz.columns(nx, nf).into_owned();
    let b_i = dynz.column(z.input()).into_owned();
    let algebraic = AlgebraicBlock {
        a_phi,
        gx: gz.columns(0, nx).into_owned(),
        gphi: gz.columns(nx, nf).into_owned(),
        gln,
        gi: gz.column(z.input()).into_owned(),
        c_phi: out.columns(nx, nf).into_owned(),
        row_names: names,
    };
    Ok(DescriptorSystem {
        mass,
        dynamics,
        b_ln: DMatrix::zeros(nx, nc),
        b_i,
        c_out: out.columns(0, nx).into_owned(),
        d_ln: RowDVector::zeros(nc),
        d_i: out[z.input()],
        layout: l.clone(),
        algebraic: Some(algebraic),
        phi2_recovery: None,
        variant: model.variant,
        model: Arc::clone(model),
    })
}

/// Assemble the cell at its equilibrium state with the default phi2 reference.
pub fn assemble_cell(params: &ModelParams, variant: Variant) -> Result<DescriptorSystem, ModelError> {
    assemble_cell_with(params, variant, AssemblyOptions::default())
}

pub fn assemble_cell_with(
    params: &ModelParams,
    variant: Variant,
    options: AssemblyOptions,
) -> Result<DescriptorSystem, ModelError> {
    let model = Arc::new(CellModel::new(params, variant, options)?);
    let x0 = model.equilibrium();
    model.descriptor_at(&x0)
}

/// Solve the algebraic block for phi2 and substitute it everywhere.
pub fn eliminate_phi2(sys: &DescriptorSystem) -> Result<DescriptorSystem, ModelError> {
    let alg = sys
        .algebraic
        .as_ref()
        .ok_or_else(|| ModelError::Elimination("system has no algebraic block".into()))?;
    let (rows, cols) = alg.gphi.shape();
    if rows != cols {
        return Err(ModelError::Elimination(format!(
            "{rows} constraint rows for {cols} potentials: reference node missing or duplicated"
        )));
    }
    let svd = alg.gphi.clone().svd(false, false);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-13 * smax) {
        return Err(ModelError::Elimination("singular potential block: reference node missing or duplicated".into()));
    }
    let lu = alg.gphi.clone().lu();
    let solve = |m: &DMatrix<f64>| -> Result<DMatrix<f64>, ModelError> {
        lu.solve(m).map(|s| -s).ok_or_else(|| ModelError::Elimination("singular potential block".into()))
    };
    let hx = solve(&alg.gx)?;
    let hl = solve(&alg.gln)?;
    let hi = solve(&DMatrix::from_column_slice(rows, 1, alg.gi.as_slice()))?.column(0).into_owned();
    let mut out = sys.clone();
    out.dynamics += &alg.a_phi * &hx;
    out.b_ln += &alg.a_phi * &hl;
    out.b_i += &alg.a_phi * &hi;
    out.c_out += &alg.c_phi * &hx;
    out.d_ln += &alg.c_phi * &hl;
    out.d_i += (&alg.c_phi * &hi)[0];
    out.algebraic = None;
    out.phi2_recovery = Some(Phi2Recovery { hx, hl, hi });
    Ok(out)
}

/// Matrices of `x' = Am x + B1m ln(c) + B2m i`, `V = C x + Dln ln(c) + Di i`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeMatrices {
    pub am: DMatrix<f64>,
    pub b1m: DMatrix<f64>,
    pub b2m: DVector<f64>,
    pub c_out: RowDVector<f64>,
    pub d_ln: RowDVector<f64>,
    pub d_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditioningWarning {
    pub condition: f64,
    pub threshold: f64,
}

/// Explicit ODE form of the cell.
#[derive(Debug, Clone)]
pub struct NonlinearOde {
    pub m: OdeMatrices,
    pub layout: StateLayout,
    pub phi2_recovery: Option<Phi2Recovery>,
    pub warning: Option<ConditioningWarning>,
    pub variant: Variant,
    pub model: Arc<CellModel>,
}

fn ode_matrices(sys: &DescriptorSystem) -> Result<(OdeMatrices, Option<ConditioningWarning>), ModelError> {
    if sys.algebraic.is_some() {
        return Err(ModelError::Elimination("phi2 must be eliminated before conversion".into()));
    }
    let svd = sys.mass.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > f64::EPSILON * smax) {
        return Err(ModelError::SingularMass);
    }
    let cond = smax / smin;
    let warning = (cond > MASS_COND_WARN).then(|| {
        log::warn!("ill-conditioned mass matrix (cond = {cond:e})");
        ConditioningWarning { condition: cond, threshold: MASS_COND_WARN }
    });
    let lu = sys.mass.clone().lu();
    let am = lu.solve(&sys.dynamics).ok_or(ModelError::SingularMass)?;
    let b1m = lu.solve(&sys.b_ln).ok_or(ModelError::SingularMass)?;
    let b2m = lu.solve(&sys.b_i).ok_or(ModelError::SingularMass)?;
    Ok((
        OdeMatrices { am, b1m, b2m, c_out: sys.c_out.clone(), d_ln: sys.d_ln.clone(), d_i: sys.d_i },
        warning,
    ))
}

/// Invert the mass matrix.
pub fn to_ode(sys: &DescriptorSystem) -> Result<NonlinearOde, ModelError> {
    let (m, warning) = ode_matrices(sys)?;
    Ok(NonlinearOde {
        m,
        layout: sys.layout.clone(),
        phi2_recovery: sys.phi2_recovery.clone(),
        warning,
        variant: sys.variant,
        model: Arc::clone(&sys.model),
    })
}

/// Convenience: assemble, eliminate phi2 and convert.
pub fn build_ode(params: &ModelParams, variant: Variant) -> Result<NonlinearOde, ModelError> {
    to_ode(&eliminate_phi2(&assemble_cell(params, variant)?)?)
}

impl NonlinearOde {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn ln_c(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let c = x.rows(self.layout.c.start, self.layout.n_c());
        if let Some(v) = c.iter().find(|v| !(**v > 0.0)) {
            return Err(ModelError::Domain(format!("non-positive concentration {v}")));
        }
        Ok(c.map(f64::ln))
    }

    /// Matrices at state `x`; constant for the baseline.
    pub fn matrices_at(&self, x: &DVector<f64>) -> Result<std::borrow::Cow<'_, OdeMatrices>, ModelError> {
        if self.variant == Variant::Baseline {
            return Ok(std::borrow::Cow::Borrowed(&self.m));
        }
        let sys = eliminate_phi2(&self.model.descriptor_at(x)?)?;
        Ok(std::borrow::Cow::Owned(ode_matrices(&sys)?.0))
    }

    /// Right-hand side with absolute concentrations in `x`.
    pub fn rhs(&self, x: &DVector<f64>, i: f64) -> Result<DVector<f64>, ModelError> {
        let lc = self.ln_c(x)?;
        let m = self.matrices_at(x)?;
        Ok(&m.am * x + &m.b1m * lc + &m.b2m * i)
    }

    pub fn output(&self, x: &DVector<f64>, i: f64) -> Result<f64, ModelError> {
        let lc = self.ln_c(x)?;
        let m = self.matrices_at(x)?;
        Ok((&m.c_out * x)[0] + (&m.d_ln * lc)[0] + m.d_i * i)
    }

    /// State Jacobian of the right-hand side.
    pub fn jacobian(&self, x: &DVector<f64>, i: f64) -> Result<DMatrix<f64>, ModelError> {
        if self.variant == Variant::Baseline {
            let mut j = self.m.am.clone();
            let l = &self.layout;
            for k in 0..l.n_c() {
                let inv = 1.0 / x[l.c.start + k];
                let col = self.m.b1m.column(k) * inv;
                let mut target = j.column_mut(l.c.start + k);
                target += col;
            }
            return Ok(j);
        }
        let n = self.dim();
        let mut j = DMatrix::zeros(n, n);
        for k in 0..n {
            let h = 1e-6 * x[k].abs().max(if self.layout.c.contains(&k) { 1.0 } else { 1e-3 });
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let col = (self.rhs(&xp, i)? - self.rhs(&xm, i)?) / (2.0 * h);
            j.set_column(k, &col);
        }
        Ok(j)
    }

    /// Liquid potential on every node.
    pub fn phi2(&self, x: &DVector<f64>, i: f64) -> Result<DVector<f64>, ModelError> {
        let lc = self.ln_c(x)?;
        if self.variant == Variant::Baseline {
            let rec = self.phi2_recovery.as_ref().ok_or_else(|| ModelError::Elimination("no recovery map".into()))?;
            return Ok(rec.eval(x, &lc, i));
        }
        let sys = eliminate_phi2(&self.model.descriptor_at(x)?)?;
        Ok(sys.phi2_recovery.expect("set by elimination").eval(x, &lc, i))
    }

    /// Integral of eps * c over the cell thickness (mol m^-2).
    pub fn ionic_content(&self, x: &DVector<f64>) -> f64 {
        let c = x.rows(self.layout.c.start, self.layout.n_c());
        (&self.model.grid.content_weights * c)[0]
    }

    pub fn equilibrium(&self) -> DVector<f64> {
        self.model.equilibrium()
    }
}

fn mat_json(m: &DMatrix<f64>) -> Value {
    let data: Vec<f64> = (0..m.nrows()).flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)])).collect();
    json!({ "rows": m.nrows(), "cols": m.ncols(), "data": data })
}

impl DescriptorSystem {
    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Row-major JSON dump of every matrix.
    pub fn to_json(&self) -> Value {
        let col = |v: &DVector<f64>| mat_json(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()));
        let row = |v: &RowDVector<f64>| mat_json(&DMatrix::from_row_slice(1, v.len(), v.as_slice()));
        let mut obj = json!({
            "variant": self.variant,
            "state_layout": self.layout,
            "mass": mat_json(&self.mass),
            "dynamics": mat_json(&self.dynamics),
            "b_ln": mat_json(&self.b_ln),
            "b_i": col(&self.b_i),
            "c_out": row(&self.c_out),
            "d_ln": row(&self.d_ln),
            "d_i": self.d_i,
        });
        if let Some(a) = &self.algebraic {
            obj["algebraic"] = json!({
                "a_phi": mat_json(&a.a_phi),
                "gx": mat_json(&a.gx),
                "gphi": mat_json(&a.gphi),
                "gln": mat_json(&a.gln),
                "gi": col(&a.gi),
                "c_phi": row(&a.c_phi),
                "row_names": a.row_names,
            });
        }
        if let Some(r) = &self.phi2_recovery {
            obj["phi2_recovery"] = json!({ "hx": mat_json(&r.hx), "hl": mat_json(&r.hl), "hi": col(&r.hi) });
        }
        obj
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ModelParams {
        ModelParams { n_electrode: 3, n_separator: 2, ..ModelParams::default() }
    }

    #[test]
    fn minimal_grid_dimensions() {
        let sys = assemble_cell(&minimal(), Variant::Baseline).unwrap();
        assert_eq!(sys.layout.n_c(), 8);
        assert_eq!(sys.layout.n_eta(), 6);
        assert_eq!(sys.mass.shape(), (14, 14));
        assert!(sys.algebraic.is_some());
    }

    #[test]
    fn prolongation_respects_boundary_rows() {
        let g = CellGrid::new(&ModelParams::default()).unwrap();
        // uniform interior values map to uniform full vector
        let ones = DVector::from_element(g.layout.n_c(), 1.0);
        let full = &g.c_prolong * ones;
        assert!((full.add_scalar(-1.0)).amax() < 1e-12);
    }

    #[test]
    fn equilibrium_is_stationary() {
        let p = minimal();
        let ode = build_ode(&p, Variant::Baseline).unwrap();
        let x = ode.equilibrium();
        assert!(ode.rhs(&x, 0.0).unwrap().amax() < 1e-9);
        assert!(ode.output(&x, 0.0).unwrap().abs() < 1e-12);
        assert!(ode.phi2(&x, 0.0).unwrap().amax() < 1e-12);
    }

    #[test]
    fn missing_reference_fails_elimination() {
        let sys = assemble_cell_with(&minimal(), Variant::Baseline, AssemblyOptions { reference: None }).unwrap();
        assert!(matches!(eliminate_phi2(&sys), Err(ModelError::Elimination(_))));
    }

    #[test]
    fn to_ode_requires_elimination() {
        let sys = assemble_cell(&minimal(), Variant::Baseline).unwrap();
        assert!(to_ode(&sys).is_err());
    }

    #[test]
    fn to_ode_identity_and_scaled_mass() {
        let mut sys = eliminate_phi2(&assemble_cell(&minimal(), Variant::Baseline).unwrap()).unwrap();
        let n = sys.dim();
        sys.mass = DMatrix::identity(n, n);
        let a = to_ode(&sys).unwrap();
        assert_eq!(a.m.am, sys.dynamics);
        sys.mass = DMatrix::identity(n, n) * 2.0;
        let b = to_ode(&sys).unwrap();
        assert!((&b.m.am * 2.0 - &sys.dynamics).amax() < 1e-12 * sys.dynamics.amax());
    }

    #[test]
    fn singular_mass_is_error() {
        let mut sys = eliminate_phi2(&assemble_cell(&minimal(), Variant::Baseline).unwrap()).unwrap();
        sys.mass.fill(0.0);
        assert_eq!(to_ode(&sys).unwrap_err(), ModelError::SingularMass);
    }

    #[test]
    fn kappa_variant_matches_baseline_rows_at_equilibrium() {
        let p = ModelParams::default();
        let base = assemble_cell(&p, Variant::Baseline).unwrap();
        let kap = assemble_cell(&p, Variant::KappaOfC).unwrap();
        let (ab, ak) = (base.algebraic.unwrap(), kap.algebraic.unwrap());
        assert!((&ab.gphi - &ak.gphi).amax() < 1e-12 * ab.gphi.amax());
        // log-term coupling divided by c_init equals the linear coupling
        let nc = base.layout.n_c();
        let lin = ak.gx.columns(0, nc);
        let logc = &ab.gln / p.c_init;
        assert!((lin - logc).amax() < 1e-12 * ab.gln.amax() / p.c_init);
    }

    #[test]
    fn json_dump_has_dimensions() {
        let sys = assemble_cell(&minimal(), Variant::Baseline).unwrap();
        let v = sys.to_json();
        assert_eq!(v["mass"]["rows"], 14);
        assert_eq!(v["mass"]["data"].as_array().unwrap().len(), 196);
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("aC_of_phi".parse::<Variant>().unwrap(), Variant::ACOfPhi);
        assert!("foo".parse::<Variant>().is_err());
    }
}
