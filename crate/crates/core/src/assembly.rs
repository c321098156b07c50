//! Global block assembly, boundary conditions and the augmented system.
//!
//! Unknowns are ordered as fluxes `v = (v_1, ..., v_n)`, pressures
//! `p = (p_1, ..., p_n)` and the displacement `u`. Pressure dof `(i, K)` has
//! index `i * #cells + K`. The assembled system is
//!
//! ```text
//! [ A_v   B_v^T  0    ] [v]   [f_v]
//! [ B_v   -C     B_u  ] [p] = [g  ]
//! [ 0     B_u^T  A_u  ] [u]   [f  ]
//! ```
//!
//! with `B_v = -div` (block diagonal) and `B_u = -div` (stacked). Boundary
//! data is applied to the scaled system as given.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::{mtx, CompensatedSum, CsrMatrix};
use crate::mesh::{BoundaryLabels, BoundarySide, Mesh};
use crate::model::{
    build_lambdas, compute_stabilization, rescale, LambdaSet, RawModelParams, ScaledParams, StabilizationConstants,
    StabilizationOptions,
};
use crate::spaces::{rt0_local, BdmBasis, DofMap, EdgeQuadrature, ElementKind, QuadratureRule};

pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Displacement condition on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DisplacementBc {
    /// Prescribed displacement (constant on the side).
    Dirichlet([f64; 2]),
    /// Prescribed total traction `(σ - Σ p_i I) n`.
    Traction([f64; 2]),
}

/// Pressure condition of one network on one side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureBc {
    /// Prescribed pressure, entering the flux equation weakly.
    Dirichlet(f64),
    /// `v · n = 0`, imposed by eliminating the flux dofs.
    ZeroFlux,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideConditions {
    pub displacement: DisplacementBc,
    /// One entry per network.
    pub pressure: Vec<PressureBc>,
}

impl SideConditions {
    pub fn new(displacement: DisplacementBc, pressure: Vec<PressureBc>) -> Self {
        SideConditions { displacement, pressure }
    }
}

/// Model coefficients, either physical or already rescaled.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Raw(RawModelParams),
    Scaled(ScaledParams),
}

impl ModelParams {
    pub fn n(&self) -> usize {
        match self {
            ModelParams::Raw(r) => r.n,
            ModelParams::Scaled(s) => s.n,
        }
    }

    pub fn scaled(&self) -> Result<ScaledParams> {
        match self {
            ModelParams::Raw(r) => rescale(r),
            ModelParams::Scaled(s) => {
                s.validate()?;
                Ok(s.clone())
            }
        }
    }
}

/// Full description of one static problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub params: ModelParams,
    /// Conditions on bottom, right, top, left (`Γ1..Γ4`).
    pub sides: [SideConditions; 4],
    pub f: Option<VectorFn>,
    /// Pressure-equation source per network.
    pub g: Vec<Option<ScalarFn>>,
    /// Extra pressure right-hand side, already integrated over cells
    /// (length `n * #cells`), e.g. from [`backward_euler_pressure_rhs`].
    pub g_extra: Option<Vec<f64>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("sides", &self.sides)
            .field("f", &self.f.as_ref().map(|_| "<fn>"))
            .field("g", &self.g.iter().map(|g| g.is_some()).collect::<Vec<_>>())
            .field("g_extra", &self.g_extra.as_ref().map(|v| v.len()))
            .finish()
    }
}

impl ProblemSpec {
    /// Spec with zero sources and the same conditions on every side.
    pub fn uniform(name: &str, params: ModelParams, side: SideConditions) -> Self {
        let n = params.n();
        ProblemSpec {
            name: name.to_string(),
            params,
            sides: [side.clone(), side.clone(), side.clone(), side],
            f: None,
            g: vec![None; n],
            g_extra: None,
        }
    }

    pub fn side(&self, s: BoundarySide) -> &SideConditions {
        &self.sides[s.index()]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.params.n();
        for s in BoundarySide::ALL {
            let c = self.side(s);
            if c.pressure.len() != n {
                return invalid(format!(
                    "{}: {} pressure conditions given for {n} networks",
                    s.gamma_name(),
                    c.pressure.len()
                ));
            }
        }
        if self.g.len() != n {
            return invalid(format!("g: {} sources given for {n} networks", self.g.len()));
        }
        if !BoundarySide::ALL
            .iter()
            .any(|&s| matches!(self.side(s).displacement, DisplacementBc::Dirichlet(_)))
        {
            return invalid("displacement is not constrained on any side; rigid motions are undetermined");
        }
        Ok(())
    }

    /// Zero-flux pressure conditions everywhere with a fully clamped
    /// displacement.
    pub fn is_closed(&self) -> bool {
        BoundarySide::ALL.iter().all(|&s| {
            let c = self.side(s);
            matches!(c.displacement, DisplacementBc::Dirichlet(_))
                && c.pressure.iter().all(|p| *p == PressureBc::ZeroFlux)
        })
    }

    /// Gauge of closed problems. Summing the mass balance over all cells
    /// leaves `C m = Σ_K g_K` for the vector `m` of network pressure
    /// integrals, so compatible data (zero sums) gives zero means, which are
    /// then imposed explicitly. Sums within `COMPAT_TOL` of zero count as
    /// quadrature error and are removed.
    pub fn closed_gauge(&self, lambdas: &LambdaSet, g: &mut [f64], n_cells: usize) -> Result<bool> {
        if !self.is_closed() {
            return Ok(false);
        }
        let n = lambdas.c.nrows();
        let scale: f64 = g.iter().map(|x| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
        let compatible = (0..n).all(|i| g[i * n_cells..(i + 1) * n_cells].iter().sum::<f64>().abs() <= COMPAT_TOL * scale);
        if compatible {
            // remove the quadrature error so the discrete data is exactly compatible
            for i in 0..n {
                let gi = &mut g[i * n_cells..(i + 1) * n_cells];
                let total: f64 = gi.iter().sum();
                gi.iter_mut().for_each(|x| *x -= total / n_cells as f64);
            }
            return Ok(true);
        }
        if is_singular_network_matrix(&lambdas.c) {
            return invalid("closed problem: pressure data is incompatible with the constant pressure kernel");
        }
        Ok(false)
    }
}

/// True when the symmetric `n×n` matrix has a (numerically) zero eigenvalue.
pub fn is_singular_network_matrix(m: &DMatrix<f64>) -> bool {
    let ev = m.clone().symmetric_eigen().eigenvalues;
    let max = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    ev.iter().any(|&e| e.abs() <= 1e-14 * max.max(f64::MIN_POSITIVE))
}

/// Relative size of `Σ_K g_K` treated as quadrature error on closed problems.
pub const COMPAT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Interior penalty parameter `η`.
    pub eta: f64,
    pub stabilization: StabilizationOptions,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            eta: 10.0,
            stabilization: StabilizationOptions::default(),
        }
    }
}

/// RT0 mass matrix `(φ_e, φ_e')` over all edges.
pub fn rt0_mass(mesh: &Mesh, dofmap: &DofMap) -> CsrMatrix {
    let q = QuadratureRule::triangle_degree4();
    let mut t = Vec::with_capacity(9 * mesh.num_cells());
    for c in 0..mesh.num_cells() {
        let jac = 2.0 * mesh.area(c);
        let mut local = [[0.0; 3]; 3];
        for qp in 0..q.weights.len() {
            let x = crate::spaces::map_to_physical(mesh, c, q.reference_point(qp));
            let (phi, _) = rt0_local(mesh, c, x);
            let w = q.weights[qp] * jac;
            for a in 0..3 {
                for b in 0..3 {
                    local[a][b] += w * (phi[a][0] * phi[b][0] + phi[a][1] * phi[b][1]);
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let s = dofmap.cell_signs[c][a] * dofmap.cell_signs[c][b];
                t.push((dofmap.cell_dofs[c][a], dofmap.cell_dofs[c][b], s * local[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(dofmap.n_dofs, dofmap.n_dofs, &t)
}

/// Block-diagonal flux mass `diag(R_1^{-1} M, ..., R_n^{-1} M)` over all edges.
pub fn assemble_flux_mass(mesh: &Mesh, dofmap: &DofMap, scaled: &ScaledParams) -> CsrMatrix {
    let m = rt0_mass(mesh, dofmap);
    let blocks: Vec<CsrMatrix> = scaled.r_inv.iter().map(|&r| m.scaled(r)).collect();
    block_diagonal(&blocks)
}

pub fn block_diagonal(blocks: &[CsrMatrix]) -> CsrMatrix {
    let rows: Vec<usize> = blocks.iter().map(|b| b.nrows).collect();
    let cols: Vec<usize> = blocks.iter().map(|b| b.ncols).collect();
    let grid: Vec<Vec<Option<&CsrMatrix>>> = (0..blocks.len())
        .map(|r| (0..blocks.len()).map(|c| (r == c).then_some(&blocks[r])).collect())
        .collect();
    CsrMatrix::from_blocks(&grid, &rows, &cols)
}

/// `-(div φ_j, 1_K)` for an H(div) space against P0. Exact: divergences of
/// RT0 and BDM1 shapes are cellwise constant.
pub fn assemble_div(mesh: &Mesh, dofmap: &DofMap) -> Result<CsrMatrix> {
    let mut t = Vec::new();
    match dofmap.kind {
        ElementKind::Rt0 => {
            for c in 0..mesh.num_cells() {
                for k in 0..3 {
                    let len = mesh.edges[mesh.cell_edges[c][k]].length;
                    t.push((c, dofmap.cell_dofs[c][k], -dofmap.cell_signs[c][k] * len));
                }
            }
        }
        ElementKind::Bdm1 => {
            let bdm = BdmBasis::new(mesh)?;
            for c in 0..mesh.num_cells() {
                let div = bdm.cells[c].divergence();
                let area = mesh.area(c);
                for j in 0..6 {
                    let v = -dofmap.cell_signs[c][j] * div[j] * area;
                    if v.abs() > 1e-14 {
                        t.push((c, dofmap.cell_dofs[c][j], v));
                    }
                }
            }
        }
        ElementKind::P0 => return invalid("divergence needs an H(div) space"),
    }
    Ok(CsrMatrix::from_triplets(mesh.num_cells(), dofmap.n_dofs, &t))
}

/// Per-side flags of the edges carrying a displacement Dirichlet condition.
pub fn displacement_dirichlet_edges(mesh: &Mesh, labels: &BoundaryLabels, sides: &[SideConditions; 4]) -> Vec<bool> {
    (0..mesh.num_edges())
        .map(|e| match labels.labels[e] {
            Some(s) => matches!(sides[s.index()].displacement, DisplacementBc::Dirichlet(_)),
            None => false,
        })
        .collect()
}

/// Elasticity blocks: the DG form `a_h + λ (div, div)` and the volume-only
/// energy `(ε, ε) + λ (div, div)` used for error norms.
pub struct ElasticityBlocks {
    pub a_u: CsrMatrix,
    pub energy: CsrMatrix,
}

/// Assembles the symmetric interior penalty form on BDM1. Face terms act on
/// interior edges and on boundary edges flagged in `dirichlet_edges`.
pub fn assemble_elasticity(
    mesh: &Mesh,
    dofmap: &DofMap,
    bdm: &BdmBasis,
    eta: f64,
    lambda: f64,
    dirichlet_edges: &[bool],
) -> Result<ElasticityBlocks> {
    if !(eta > 0.0) {
        return invalid(format!("penalty parameter must be positive, got {eta}"));
    }
    let nd = dofmap.n_dofs;
    let mut vol = Vec::with_capacity(36 * mesh.num_cells());
    let mut face = Vec::new();
    for c in 0..mesh.num_cells() {
        let eps = bdm.cells[c].strains();
        let div = bdm.cells[c].divergence();
        let area = mesh.area(c);
        for a in 0..6 {
            for b in 0..6 {
                let ee = ddot(&eps[a], &eps[b]) + lambda * div[a] * div[b];
                let s = dofmap.cell_signs[c][a] * dofmap.cell_signs[c][b];
                vol.push((dofmap.cell_dofs[c][a], dofmap.cell_dofs[c][b], s * area * ee));
            }
        }
    }
    let eq = EdgeQuadrature::default();
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.is_boundary() && !dirichlet_edges[e] {
            continue;
        }
        let n = edge.normal;
        let t = edge.tangent();
        // (global dof, sign into the jump, cell)
        let mut sides = vec![(edge.cells.0, 1.0)];
        if let Some(t2) = edge.cells.1 {
            sides.push((t2, -1.0));
        }
        let avg_w = if sides.len() == 2 { 0.5 } else { 1.0 };
        let mut dofs = Vec::with_capacity(12);
        // per dof: t·{ε}n contribution (constant), and jump sign
        let mut avg = Vec::with_capacity(12);
        for &(c, js) in &sides {
            let eps = bdm.cells[c].strains();
            for j in 0..6 {
                let s = dofmap.cell_signs[c][j];
                let en = [eps[j][0][0] * n[0] + eps[j][0][1] * n[1], eps[j][1][0] * n[0] + eps[j][1][1] * n[1]];
                dofs.push((dofmap.cell_dofs[c][j], c, j, s, js));
                avg.push(avg_w * s * (en[0] * t[0] + en[1] * t[1]));
            }
        }
        let m = dofs.len();
        let mut local = vec![0.0; m * m];
        for q in 0..3 {
            let x = mesh.edge_point(e, eq.points[q]);
            let w = eq.weights[q] * edge.length;
            let jt: Vec<f64> = dofs
                .iter()
                .map(|&(_, c, j, s, js)| {
                    let v = bdm.cells[c].values(x)[j];
                    js * s * (v[0] * t[0] + v[1] * t[1])
                })
                .collect();
            for a in 0..m {
                for b in 0..m {
                    local[a * m + b] += w * (-avg[b] * jt[a] - avg[a] * jt[b] + eta / edge.length * jt[a] * jt[b]);
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                face.push((dofs[a].0, dofs[b].0, local[a * m + b]));
            }
        }
    }
    let energy = CsrMatrix::from_triplets(nd, nd, &vol);
    vol.extend(face);
    let a_u = CsrMatrix::from_triplets(nd, nd, &vol);
    Ok(ElasticityBlocks { a_u, energy })
}

fn ddot(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// `C ⊗ M_p` and `S ⊗ M_p` with the diagonal P0 mass `M_p`.
pub fn assemble_pressure_blocks(mesh: &Mesh, lambdas: &LambdaSet) -> (CsrMatrix, CsrMatrix) {
    let areas = mesh.cell_areas();
    (kron_with_mass(&lambdas.c, &areas), kron_with_mass(&lambdas.s_coeff, &areas))
}

pub fn kron_with_mass(coeff: &DMatrix<f64>, areas: &[f64]) -> CsrMatrix {
    let n = coeff.nrows();
    let nc = areas.len();
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let c = coeff[(i, j)];
            if c == 0.0 {
                continue;
            }
            for (k, a) in areas.iter().enumerate() {
                t.push((i * nc + k, j * nc + k, c * a));
            }
        }
    }
    CsrMatrix::from_triplets(n * nc, n * nc, &t)
}

/// Cell integrals of the backward Euler history term
/// `g̃ = -τ g - α div u_prev - c_p p_prev` for one network, given cellwise
/// values.
pub fn backward_euler_pressure_rhs(
    mesh: &Mesh,
    tau: f64,
    g: &[f64],
    alpha: f64,
    div_u_prev: &[f64],
    c_p: f64,
    p_prev: &[f64],
) -> Vec<f64> {
    (0..mesh.num_cells())
        .map(|k| mesh.area(k) * (-tau * g[k] - alpha * div_u_prev[k] - c_p * p_prev[k]))
        .collect()
}

/// Assembled and boundary-reduced system.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub n: usize,
    pub n_cells: usize,
    pub a_v: CsrMatrix,
    pub b_v: CsrMatrix,
    /// `B_v^T`, kept for row access.
    pub b_vt: CsrMatrix,
    pub b_u: CsrMatrix,
    pub a_u: CsrMatrix,
    pub c_mat: CsrMatrix,
    pub s_mat: CsrMatrix,
    /// Volume energy `(ε, ε) + λ (div, div)` on free displacement dofs.
    pub u_energy: CsrMatrix,
    pub f_v: Vec<f64>,
    pub g: Vec<f64>,
    pub f: Vec<f64>,
    /// Free RT0 edges of each network.
    pub flux_free: Vec<Vec<usize>>,
    /// Offsets of the network flux blocks inside `v`.
    pub v_offsets: Vec<usize>,
    /// Free BDM1 dofs.
    pub u_free: Vec<usize>,
    /// Full BDM1 coefficient vector with prescribed values on fixed dofs.
    pub u_fixed: Vec<f64>,
    pub n_rt: usize,
    pub cell_areas: Vec<f64>,
    pub scaled: ScaledParams,
    pub stab: StabilizationConstants,
    pub lambdas: LambdaSet,
    pub mean_zero: bool,
    pub eta: f64,
}

/// Sizes of the three fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldSizes {
    pub v: usize,
    pub p: usize,
    pub u: usize,
}

impl FieldSizes {
    pub fn total(&self) -> usize {
        self.v + self.p + self.u
    }
}

/// A full iterate `(v, p, u)` on the reduced dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
}

impl Fields {
    pub fn zeros(s: FieldSizes) -> Self {
        Fields {
            v: vec![0.0; s.v],
            p: vec![0.0; s.p],
            u: vec![0.0; s.u],
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.v.len() + self.p.len() + self.u.len());
        x.extend_from_slice(&self.v);
        x.extend_from_slice(&self.p);
        x.extend_from_slice(&self.u);
        x
    }

    pub fn from_slice(x: &[f64], s: FieldSizes) -> Self {
        Fields {
            v: x[..s.v].to_vec(),
            p: x[s.v..s.v + s.p].to_vec(),
            u: x[s.v + s.p..].to_vec(),
        }
    }

    pub fn sizes(&self) -> FieldSizes {
        FieldSizes {
            v: self.v.len(),
            p: self.p.len(),
            u: self.u.len(),
        }
    }

    pub fn sub(&self, other: &Fields) -> Fields {
        Fields {
            v: crate::linalg::sub(&self.v, &other.v),
            p: crate::linalg::sub(&self.p, &other.p),
            u: crate::linalg::sub(&self.u, &other.u),
        }
    }
}

impl BlockSystem {
    /// Assembles all blocks for `spec` on `mesh` and applies its boundary
    /// conditions.
    pub fn assemble(mesh: &Mesh, spec: &ProblemSpec, opts: &AssemblyOptions) -> Result<BlockSystem> {
        spec.validate()?;
        let scaled = spec.params.scaled()?;
        let stab = compute_stabilization(&scaled, &opts.stabilization);
        let lambdas = build_lambdas(&scaled, stab.l1, stab.l2)?;
        let labels = mesh.classify_boundary();
        let rt = DofMap::build(mesh, ElementKind::Rt0);
        let bdm_map = DofMap::build(mesh, ElementKind::Bdm1);
        let bdm = BdmBasis::new(mesh)?;

        let rt_mass = rt0_mass(mesh, &rt);
        let b_rt = assemble_div(mesh, &rt)?;
        let b_bdm = assemble_div(mesh, &bdm_map)?;
        let dir_edges = displacement_dirichlet_edges(mesh, &labels, &spec.sides);
        let el = assemble_elasticity(mesh, &bdm_map, &bdm, opts.eta, scaled.lambda, &dir_edges)?;
        let (c_mat, s_mat) = assemble_pressure_blocks(mesh, &lambdas);

        let raw = RawBlocks {
            rt_mass,
            b_rt,
            b_bdm,
            a_u: el.a_u,
            energy: el.energy,
            c_mat,
            s_mat,
        };
        apply_boundary_conditions(mesh, &labels, &bdm_map, &bdm, spec, opts.eta, scaled, stab, lambdas, raw)
    }

    pub fn sizes(&self) -> FieldSizes {
        FieldSizes {
            v: self.a_v.nrows,
            p: self.c_mat.nrows,
            u: self.a_u.nrows,
        }
    }

    /// `M r = S⁻¹ r`, one `n x n` solve per cell.
    pub fn apply_m(&self, r: &[f64]) -> Vec<f64> {
        let nc = self.n_cells;
        let n = self.n;
        let mut out = vec![0.0; n * nc];
        for k in 0..nc {
            let inv_area = 1.0 / self.cell_areas[k];
            for i in 0..n {
                let mut s = 0.0;
                for j in 0..n {
                    s += self.lambdas.s_inv[(i, j)] * r[j * nc + k];
                }
                out[i * nc + k] = s * inv_area;
            }
        }
        out
    }

    /// Removes the area-weighted mean of each network pressure.
    pub fn project_mean_zero(&self, p: &mut [f64]) {
        let nc = self.n_cells;
        let total: f64 = self.cell_areas.iter().sum();
        for i in 0..self.n {
            let block = &mut p[i * nc..(i + 1) * nc];
            let mean = block.iter().zip(&self.cell_areas).map(|(x, a)| x * a).sum::<f64>() / total;
            block.iter_mut().for_each(|x| *x -= mean);
        }
    }

    /// Applies the unaugmented operator.
    pub fn apply(&self, x: &Fields) -> Fields {
        let mut v = self.a_v.matvec(&x.v);
        self.b_v.matvec_t_add(1.0, &x.p, &mut v);
        let mut p = self.b_v.matvec(&x.v);
        self.c_mat.matvec_add(-1.0, &x.p, &mut p);
        self.b_u.matvec_add(1.0, &x.u, &mut p);
        let mut u = self.b_u.matvec_t(&x.p);
        self.a_u.matvec_add(1.0, &x.u, &mut u);
        Fields { v, p, u }
    }

    pub fn rhs(&self) -> Fields {
        Fields {
            v: self.f_v.clone(),
            p: self.g.clone(),
            u: self.f.clone(),
        }
    }

    /// `rhs - A x`, with the flux and mass balance rows accumulated in
    /// compensated arithmetic.
    pub fn residual(&self, x: &Fields) -> Fields {
        let mut u = self.f.clone();
        self.b_u.matvec_t_add(-1.0, &x.p, &mut u);
        self.a_u.matvec_add(-1.0, &x.u, &mut u);
        Fields {
            v: self.flux_residual(&x.v, &x.p),
            p: self.mass_balance_residual(&x.v, &x.p, &x.u),
            u,
        }
    }

    /// `g - B_v v + C p - B_u u`, row by row in compensated arithmetic.
    /// `B_v v` and `g` can be orders of magnitude larger than the result.
    pub fn mass_balance_residual(&self, v: &[f64], p: &[f64], u: &[f64]) -> Vec<f64> {
        (0..self.g.len())
            .map(|row| {
                let mut acc = CompensatedSum::new(self.g[row]);
                self.b_v.accumulate_row(row, -1.0, v, &mut acc);
                self.c_mat.accumulate_row(row, 1.0, p, &mut acc);
                self.b_u.accumulate_row(row, -1.0, u, &mut acc);
                acc.value()
            })
            .collect()
    }

    /// `f_v - A_v v - B_v^T p` in compensated arithmetic. Boundary pressure
    /// loads cancel against `B_v^T p` when `R⁻¹` is small.
    pub fn flux_residual(&self, v: &[f64], p: &[f64]) -> Vec<f64> {
        (0..self.f_v.len())
            .map(|row| {
                let mut acc = CompensatedSum::new(self.f_v[row]);
                self.a_v.accumulate_row(row, -1.0, v, &mut acc);
                self.b_vt.accumulate_row(row, -1.0, p, &mut acc);
                acc.value()
            })
            .collect()
    }

    /// Mean-value multipliers are needed in direct solves only when `C`
    /// is singular; otherwise zero means follow from compatible data.
    pub fn needs_multipliers(&self, pressure_block: &DMatrix<f64>) -> bool {
        self.mean_zero && is_singular_network_matrix(pressure_block)
    }

    /// The whole saddle point matrix, with mean-value multipliers appended
    /// when pressures are only determined up to constants.
    pub fn monolithic_matrix(&self) -> CsrMatrix {
        let s = self.sizes();
        let b_vt = self.b_v.transpose();
        let b_ut = self.b_u.transpose();
        let neg_c = self.c_mat.scaled(-1.0);
        let a = CsrMatrix::from_blocks(
            &[
                vec![Some(&self.a_v), Some(&b_vt), None],
                vec![Some(&self.b_v), Some(&neg_c), Some(&self.b_u)],
                vec![None, Some(&b_ut), Some(&self.a_u)],
            ],
            &[s.v, s.p, s.u],
            &[s.v, s.p, s.u],
        );
        if !self.needs_multipliers(&self.lambdas.c) {
            return a;
        }
        let nc = self.n_cells;
        let tot = s.total();
        let mut t = a.triplets();
        for i in 0..self.n {
            for k in 0..nc {
                let row = s.v + i * nc + k;
                t.push((row, tot + i, self.cell_areas[k]));
                t.push((tot + i, row, self.cell_areas[k]));
            }
        }
        CsrMatrix::from_triplets(tot + self.n, tot + self.n, &t)
    }

    /// Full BDM1 coefficient vector from free values.
    pub fn expand_u(&self, u: &[f64]) -> Vec<f64> {
        let mut full = self.u_fixed.clone();
        for (k, &d) in self.u_free.iter().enumerate() {
            full[d] = u[k];
        }
        full
    }

    /// Full RT0 coefficient vector of network `i` (eliminated dofs are zero).
    pub fn expand_v(&self, v: &[f64], i: usize) -> Vec<f64> {
        let mut full = vec![0.0; self.n_rt];
        let off = self.v_offsets[i];
        for (k, &e) in self.flux_free[i].iter().enumerate() {
            full[e] = v[off + k];
        }
        full
    }

    /// Writes every block and right-hand side as Matrix Market files.
    pub fn export_matrix_market(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for (name, m) in [
            ("A_v", &self.a_v),
            ("B_v", &self.b_v),
            ("B_u", &self.b_u),
            ("A_u", &self.a_u),
            ("C", &self.c_mat),
            ("S", &self.s_mat),
        ] {
            mtx::write_matrix_file(m, dir.join(format!("{name}.mtx")))?;
        }
        for (name, v) in [("f_v", &self.f_v), ("g", &self.g), ("f", &self.f)] {
            mtx::write_vector_file(v, dir.join(format!("{name}.mtx")))?;
        }
        let mut info = std::fs::File::create(dir.join("README.txt"))?;
        writeln!(
            info,
            "n = {}\ncells = {}\nflux dofs = {}\npressure dofs = {}\ndisplacement dofs = {}\nL1 = {:e}\nL2 = {:e}\nlambda = {:e}",
            self.n,
            self.n_cells,
            self.a_v.nrows,
            self.c_mat.nrows,
            self.a_u.nrows,
            self.stab.l1,
            self.stab.l2,
            self.scaled.lambda
        )?;
        Ok(())
    }
}

/// Blocks over all dofs, before boundary conditions.
pub struct RawBlocks {
    /// RT0 mass over all edges (one network, without `R^{-1}`).
    pub rt_mass: CsrMatrix,
    /// `-div` from all RT0 dofs to one network's P0.
    pub b_rt: CsrMatrix,
    /// `-div` from all BDM1 dofs to one network's P0.
    pub b_bdm: CsrMatrix,
    pub a_u: CsrMatrix,
    pub energy: CsrMatrix,
    pub c_mat: CsrMatrix,
    pub s_mat: CsrMatrix,
}

/// Applies boundary data and eliminates constrained dofs.
///
/// Pressure Dirichlet values give `-∫ p̄ z·n` in the flux equation; zero-flux
/// sides remove their RT0 dofs. Displacement Dirichlet sides fix both BDM1
/// normal moments and add the weak tangential data terms; tractions enter
/// the displacement right-hand side.
#[allow(clippy::too_many_arguments)]
pub fn apply_boundary_conditions(
    mesh: &Mesh,
    labels: &BoundaryLabels,
    bdm_map: &DofMap,
    bdm: &BdmBasis,
    spec: &ProblemSpec,
    eta: f64,
    scaled: ScaledParams,
    stab: StabilizationConstants,
    lambdas: LambdaSet,
    raw: RawBlocks,
) -> Result<BlockSystem> {
    let n = scaled.n;
    let nc = mesh.num_cells();
    let ne = mesh.num_edges();
    let eq = EdgeQuadrature::default();

    // fluxes
    let mut flux_free = Vec::with_capacity(n);
    let mut f_v = Vec::new();
    let mut v_offsets = vec![0];
    let mut av_blocks = Vec::with_capacity(n);
    let mut bv_blocks = Vec::with_capacity(n);
    let all_cells: Vec<usize> = (0..nc).collect();
    for i in 0..n {
        let mut free = Vec::with_capacity(ne);
        let mut rhs = Vec::with_capacity(ne);
        for (e, edge) in mesh.edges.iter().enumerate() {
            match labels.labels[e] {
                None => {
                    free.push(e);
                    rhs.push(0.0);
                }
                Some(side) => match spec.side(side).pressure[i] {
                    PressureBc::ZeroFlux => {}
                    PressureBc::Dirichlet(p) => {
                        free.push(e);
                        rhs.push(-p * edge.length);
                    }
                },
            }
        }
        av_blocks.push(raw.rt_mass.submatrix(&free, &free).scaled(scaled.r_inv[i]));
        bv_blocks.push(raw.b_rt.submatrix(&all_cells, &free));
        v_offsets.push(v_offsets[i] + free.len());
        f_v.extend(rhs);
        flux_free.push(free);
    }
    let a_v = block_diagonal(&av_blocks);
    let b_v = block_diagonal(&bv_blocks);

    // displacement
    let n_bdm = bdm_map.n_dofs;
    let mut fixed = vec![false; n_bdm];
    let mut u_fixed = vec![0.0; n_bdm];
    let mut f_full = vec![0.0; n_bdm];
    for (e, edge) in mesh.edges.iter().enumerate() {
        let Some(side) = labels.labels[e] else { continue };
        let cell = edge.cells.0;
        let k = mesh.local_edge(cell, e).ok_or_else(|| Error::Internal(format!("edge {e} lost its cell")))?;
        let _ = k;
        match spec.side(side).displacement {
            DisplacementBc::Dirichlet(ub) => {
                let n_e = edge.normal;
                let t_e = edge.tangent();
                let ubn = ub[0] * n_e[0] + ub[1] * n_e[1];
                let ubt = ub[0] * t_e[0] + ub[1] * t_e[1];
                let (mut l0, mut l1) = (0.0, 0.0);
                for q in 0..3 {
                    let s = eq.points[q];
                    let w = eq.weights[q] * edge.length;
                    l0 += w * ubn;
                    l1 += 3.0 * w * ubn * (2.0 * s - 1.0);
                }
                fixed[2 * e] = true;
                fixed[2 * e + 1] = true;
                u_fixed[2 * e] = l0;
                u_fixed[2 * e + 1] = l1;
                if ubt != 0.0 {
                    let eps = bdm.cells[cell].strains();
                    for j in 0..6 {
                        let sgn = bdm_map.cell_signs[cell][j];
                        let en = [
                            eps[j][0][0] * n_e[0] + eps[j][0][1] * n_e[1],
                            eps[j][1][0] * n_e[0] + eps[j][1][1] * n_e[1],
                        ];
                        let ent = en[0] * t_e[0] + en[1] * t_e[1];
                        let mut acc = 0.0;
                        for q in 0..3 {
                            let x = mesh.edge_point(e, eq.points[q]);
                            let w = eq.weights[q] * edge.length;
                            let v = bdm.cells[cell].values(x)[j];
                            let vt = v[0] * t_e[0] + v[1] * t_e[1];
                            acc += w * (-ent * ubt + eta / edge.length * ubt * vt);
                        }
                        f_full[bdm_map.cell_dofs[cell][j]] += sgn * acc;
                    }
                }
            }
            DisplacementBc::Traction(tr) => {
                if tr == [0.0, 0.0] {
                    continue;
                }
                for j in 0..6 {
                    let sgn = bdm_map.cell_signs[cell][j];
                    let mut acc = 0.0;
                    for q in 0..3 {
                        let x = mesh.edge_point(e, eq.points[q]);
                        let w = eq.weights[q] * edge.length;
                        let v = bdm.cells[cell].values(x)[j];
                        acc += w * (tr[0] * v[0] + tr[1] * v[1]);
                    }
                    f_full[bdm_map.cell_dofs[cell][j]] += sgn * acc;
                }
            }
        }
    }
    if let Some(fsrc) = &spec.f {
        let q = QuadratureRule::triangle_degree4();
        for c in 0..nc {
            let jac = 2.0 * mesh.area(c);
            for qp in 0..q.weights.len() {
                let x = crate::spaces::map_to_physical(mesh, c, q.reference_point(qp));
                let fx = fsrc(x);
                let vals = bdm.cells[c].values(x);
                let w = q.weights[qp] * jac;
                for j in 0..6 {
                    f_full[bdm_map.cell_dofs[c][j]] +=
                        w * bdm_map.cell_signs[c][j] * (fx[0] * vals[j][0] + fx[1] * vals[j][1]);
                }
            }
        }
    }
    let u_free: Vec<usize> = (0..n_bdm).filter(|&d| !fixed[d]).collect();
    let u_fixed_idx: Vec<usize> = (0..n_bdm).filter(|&d| fixed[d]).collect();
    let a_u = raw.a_u.submatrix(&u_free, &u_free);
    let u_energy = raw.energy.submatrix(&u_free, &u_free);
    let mut f: Vec<f64> = u_free.iter().map(|&d| f_full[d]).collect();
    let ud: Vec<f64> = u_fixed_idx.iter().map(|&d| u_fixed[d]).collect();
    let has_lift = ud.iter().any(|&x| x != 0.0);
    if has_lift {
        raw.a_u.submatrix(&u_free, &u_fixed_idx).matvec_add(-1.0, &ud, &mut f);
    }
    let b_u_single = raw.b_bdm.submatrix(&all_cells, &u_free);
    let b_u = {
        let t: Vec<_> = (0..n)
            .flat_map(|i| b_u_single.triplets().into_iter().map(move |(r, c, v)| (r + i * nc, c, v)))
            .collect();
        CsrMatrix::from_triplets(n * nc, u_free.len(), &t)
    };

    // pressure right-hand side
    let mut g = vec![0.0; n * nc];
    let q = QuadratureRule::triangle_degree4();
    for (i, gi) in spec.g.iter().enumerate() {
        let Some(gf) = gi else { continue };
        for c in 0..nc {
            let jac = 2.0 * mesh.area(c);
            g[i * nc + c] = (0..q.weights.len())
                .map(|qp| q.weights[qp] * jac * gf(crate::spaces::map_to_physical(mesh, c, q.reference_point(qp))))
                .sum();
        }
    }
    if let Some(extra) = &spec.g_extra {
        if extra.len() != n * nc {
            return invalid(format!("g_extra: expected {} values, found {}", n * nc, extra.len()));
        }
        for (gk, ek) in g.iter_mut().zip(extra) {
            *gk += ek;
        }
    }
    if has_lift {
        let lift = raw.b_bdm.submatrix(&all_cells, &u_fixed_idx).matvec(&ud);
        for i in 0..n {
            for c in 0..nc {
                g[i * nc + c] -= lift[c];
            }
        }
    }

    let mean_zero = spec.closed_gauge(&lambdas, &mut g, nc)?;
    Ok(BlockSystem {
        n,
        n_cells: nc,
        a_v,
        b_vt: b_v.transpose(),
        b_v,
        b_u,
        a_u,
        c_mat: raw.c_mat,
        s_mat: raw.s_mat,
        u_energy,
        f_v,
        g,
        f,
        flux_free,
        v_offsets,
        u_free,
        u_fixed,
        n_rt: ne,
        cell_areas: mesh.cell_areas(),
        scaled,
        stab,
        lambdas,
        mean_zero,
        eta,
    })
}

/// Weight `M` in the augmented flux equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Augmentation {
    /// `M = S⁻¹`.
    InverseS,
    /// `M = 0`; the first row reduces to the unaugmented one.
    Zero,
}

/// The augmented system
///
/// ```text
/// [ A_v + B_v^T M B_v   B_v^T - B_v^T M C   B_v^T M B_u ] [v]   [f_v + B_v^T M g]
/// [ -B_v                C                   -B_u        ] [p] = [-g             ]
/// [ 0                   B_u^T               A_u         ] [u]   [f              ]
/// ```
///
/// with `M` applied cellwise; only `A_v + B_v^T M B_v` is stored.
#[derive(Debug, Clone)]
pub struct AugmentedSystem<'a> {
    pub system: &'a BlockSystem,
    pub augmentation: Augmentation,
    pub a_aug: CsrMatrix,
}

impl<'a> AugmentedSystem<'a> {
    pub fn new(system: &'a BlockSystem, augmentation: Augmentation) -> Self {
        let a_aug = match augmentation {
            Augmentation::Zero => system.a_v.clone(),
            Augmentation::InverseS => system.a_v.add(1.0, &flux_augmentation(system)),
        };
        AugmentedSystem {
            system,
            augmentation,
            a_aug,
        }
    }

    fn m(&self, r: &[f64]) -> Vec<f64> {
        match self.augmentation {
            Augmentation::InverseS => self.system.apply_m(r),
            Augmentation::Zero => vec![0.0; r.len()],
        }
    }

    /// Row two of the block system is folded into row one after it is
    /// formed, so `M` never multiplies uncancelled terms.
    pub fn apply(&self, x: &Fields) -> Fields {
        self.fold(self.system.apply(x))
    }

    pub fn rhs(&self) -> Fields {
        self.fold(self.system.rhs())
    }

    pub fn residual(&self, x: &Fields) -> Fields {
        self.fold(self.system.residual(x))
    }

    fn fold(&self, mut y: Fields) -> Fields {
        self.system.b_v.matvec_t_add(1.0, &self.m(&y.p), &mut y.v);
        y.p.iter_mut().for_each(|z| *z = -*z);
        y
    }

    /// The augmented operator as one sparse matrix.
    pub fn matrix(&self) -> CsrMatrix {
        let s = self.system;
        let sz = s.sizes();
        let m = match self.augmentation {
            Augmentation::InverseS => {
                let inv_areas: Vec<f64> = s.cell_areas.iter().map(|a| 1.0 / a).collect();
                kron_with_mass(&s.lambdas.s_inv, &inv_areas)
            }
            Augmentation::Zero => CsrMatrix::zeros(sz.p, sz.p),
        };
        let b_vt = s.b_v.transpose();
        let b_vt_m = b_vt.mul(&m);
        let vp = b_vt.add(-1.0, &b_vt_m.mul(&s.c_mat));
        let vu = b_vt_m.mul(&s.b_u);
        let neg_bv = s.b_v.scaled(-1.0);
        let neg_bu = s.b_u.scaled(-1.0);
        let b_ut = s.b_u.transpose();
        CsrMatrix::from_blocks(
            &[
                vec![Some(&self.a_aug), Some(&vp), Some(&vu)],
                vec![Some(&neg_bv), Some(&s.c_mat), Some(&neg_bu)],
                vec![None, Some(&b_ut), Some(&s.a_u)],
            ],
            &[sz.v, sz.p, sz.u],
            &[sz.v, sz.p, sz.u],
        )
    }
}

/// `B_v^T S⁻¹ B_v`, built cell by cell.
pub fn flux_augmentation(system: &BlockSystem) -> CsrMatrix {
    let nc = system.n_cells;
    let n = system.n;
    // per pressure row: (flux column, value)
    let bv = &system.b_v;
    let mut t = Vec::new();
    for k in 0..nc {
        let inv_area = 1.0 / system.cell_areas[k];
        for i in 0..n {
            let ri = i * nc + k;
            for j in 0..n {
                let sij = system.lambdas.s_inv[(i, j)] * inv_area;
                if sij == 0.0 {
                    continue;
                }
                let rj = j * nc + k;
                for a in bv.row_ptr[ri]..bv.row_ptr[ri + 1] {
                    for b in bv.row_ptr[rj]..bv.row_ptr[rj + 1] {
                        t.push((bv.col_idx[a], bv.col_idx[b], bv.values[a] * sij * bv.values[b]));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(bv.ncols, bv.ncols, &t)
}

/// Smallest eigenvalue of the constrained elasticity matrix on a small mesh.
pub fn elasticity_min_eigenvalue(n: usize, eta: f64, lambda: f64) -> Result<f64> {
    let mesh = Mesh::structured(n)?;
    let spec = ProblemSpec::uniform(
        "self-check",
        ModelParams::Scaled(ScaledParams::uniform(1, lambda, 1.0, 0.0)?),
        SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::Dirichlet(0.0)]),
    );
    let sys = BlockSystem::assemble(&mesh, &spec, &AssemblyOptions { eta, ..Default::default() })?;
    Ok(sys.a_u.to_dense().symmetric_eigen().eigenvalues.min())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dot, norm2, Factorization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn biot_spec(lambda: f64, r_inv: f64, alpha_p: f64) -> ProblemSpec {
        ProblemSpec::uniform(
            "biot",
            ModelParams::Scaled(ScaledParams::uniform(1, lambda, r_inv, alpha_p).unwrap()),
            SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::Dirichlet(0.0)]),
        )
    }

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
    }

    #[test]
    fn rt0_mass_reference_cell() {
        let m = Mesh::structured(1).unwrap();
        let dm = DofMap::build(&m, ElementKind::Rt0);
        let mass = rt0_mass(&m, &dm);
        let q = QuadratureRule::triangle_degree4();
        let mut local = [[0.0; 3]; 3];
        for qp in 0..6 {
            let x = crate::spaces::map_to_physical(&m, 0, q.reference_point(qp));
            let (phi, _) = rt0_local(&m, 0, x);
            for a in 0..3 {
                for b in 0..3 {
                    local[a][b] += q.weights[qp] * 2.0 * m.area(0) * (phi[a][0] * phi[b][0] + phi[a][1] * phi[b][1]);
                }
            }
        }
        let exact = [[1.0 / 3.0, 0.0, -1.0 / 6.0], [0.0, 1.0 / 3.0, 0.0], [-1.0 / 6.0, 0.0, 1.0 / 3.0]];
        for a in 0..3 {
            for b in 0..3 {
                assert!((local[a][b] - exact[a][b]).abs() < 1e-14, "({a},{b}) {}", local[a][b]);
            }
        }
        assert!(mass.is_symmetric(1e-15));
    }

    #[test]
    fn flux_mass_linear_in_r_inv() {
        let m = Mesh::structured(3).unwrap();
        let dm = DofMap::build(&m, ElementKind::Rt0);
        let s1 = ScaledParams::uniform(2, 1.0, 1.5, 0.0).unwrap();
        let mut s2 = s1.clone();
        s2.r_inv[1] *= 2.0;
        let a1 = assemble_flux_mass(&m, &dm, &s1);
        let a2 = assemble_flux_mass(&m, &dm, &s2);
        let ne = m.num_edges();
        for e in 0..ne {
            assert_eq!(a2.get(e, e), a1.get(e, e));
            assert!((a2.get(ne + e, ne + e) - 2.0 * a1.get(ne + e, ne + e)).abs() < 1e-14);
        }
        assert!(Factorization::new(&a1, true, "A_v").unwrap().is_cholesky());
    }

    #[test]
    fn div_matrix_properties() {
        let m = Mesh::structured(3).unwrap();
        let rt = DofMap::build(&m, ElementKind::Rt0);
        let b = assemble_div(&m, &rt).unwrap();
        assert!(b.matvec(&vec![0.0; rt.n_dofs]).iter().all(|&x| x == 0.0));
        // divergence theorem: B[T, e] = -s |e|
        for c in 0..m.num_cells() {
            for k in 0..3 {
                let e = m.cell_edges[c][k];
                assert!((b.get(c, e) + m.cell_edge_signs[c][k] * m.edges[e].length).abs() < 1e-15);
            }
        }
        // v = (x, 0)/... : interpolate the field x e_x with div 1 (RT0 exact)
        let coeffs: Vec<f64> = (0..m.num_edges())
            .map(|e| {
                let mid = m.edge_midpoint(e);
                mid[0] * m.edges[e].normal[0]
            })
            .collect();
        let bv = b.matvec(&coeffs);
        for c in 0..m.num_cells() {
            assert!((bv[c] + m.area(c)).abs() < 1e-14);
        }
    }

    #[test]
    fn bdm_div_exact_for_linear_field() {
        let m = Mesh::structured(2).unwrap();
        let dm = DofMap::build(&m, ElementKind::Bdm1);
        let b = assemble_div(&m, &dm).unwrap();
        // interpolate u = (x + 2y, 3x - y): div = 0; and u = (x, y): div = 2
        let eq = EdgeQuadrature::default();
        for (field, div) in [
            (Box::new(|x: [f64; 2]| [x[0] + 2.0 * x[1], 3.0 * x[0] - x[1]]) as Box<dyn Fn([f64; 2]) -> [f64; 2]>, 0.0),
            (Box::new(|x: [f64; 2]| [x[0], x[1]]), 2.0),
        ] {
            let mut coeffs = vec![0.0; dm.n_dofs];
            for (e, edge) in m.edges.iter().enumerate() {
                for q in 0..3 {
                    let s = eq.points[q];
                    let v = field(m.edge_point(e, s));
                    let vn = v[0] * edge.normal[0] + v[1] * edge.normal[1];
                    let w = eq.weights[q] * edge.length;
                    coeffs[2 * e] += w * vn;
                    coeffs[2 * e + 1] += 3.0 * w * vn * (2.0 * s - 1.0);
                }
            }
            let bu = b.matvec(&coeffs);
            for c in 0..m.num_cells() {
                assert!((bu[c] + div * m.area(c)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn elasticity_symmetric_and_rigid_kernel() {
        let m = Mesh::structured(2).unwrap();
        let dm = DofMap::build(&m, ElementKind::Bdm1);
        let bdm = BdmBasis::new(&m).unwrap();
        let el = assemble_elasticity(&m, &dm, &bdm, 10.0, 1.0, &vec![false; m.num_edges()]).unwrap();
        assert!(el.a_u.is_symmetric(1e-13));
        assert!(el.a_u.has_symmetric_pattern());
        // translation (1, 0) interpolated by normal moments
        let coeffs: Vec<f64> = (0..dm.n_dofs)
            .map(|d| if d % 2 == 0 { m.edges[d / 2].normal[0] * m.edges[d / 2].length } else { 0.0 })
            .collect();
        let au = el.a_u.matvec(&coeffs);
        assert!(dot(&coeffs, &au).abs() < 1e-12);
        // kernel dimension = 3 (rigid motions)
        let ev = el.a_u.to_dense().symmetric_eigen().eigenvalues;
        let mut ev: Vec<f64> = ev.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = ev.last().unwrap().abs();
        assert!(ev[2].abs() < 1e-10 * scale, "{:?}", &ev[..4]);
        assert!(ev[3] > 1e-6 * scale, "{:?}", &ev[..4]);
    }

    #[test]
    fn nonpositive_eta_rejected() {
        let m = Mesh::structured(1).unwrap();
        let dm = DofMap::build(&m, ElementKind::Bdm1);
        let bdm = BdmBasis::new(&m).unwrap();
        assert!(matches!(
            assemble_elasticity(&m, &dm, &bdm, 0.0, 1.0, &vec![false; 5]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn constrained_elasticity_positive_definite() {
        let ev = elasticity_min_eigenvalue(2, 10.0, 1.0).unwrap();
        assert!(ev > 0.0);
    }

    #[test]
    fn pressure_blocks_kronecker() {
        let m = Mesh::structured(2).unwrap();
        let s = ScaledParams::direct(2.0, vec![1.0, 4.0], vec![0.1, 0.2], vec![vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let l = build_lambdas(&s, 0.3, 0.7).unwrap();
        let (c, smat) = assemble_pressure_blocks(&m, &l);
        let nc = m.num_cells();
        for k in 0..nc {
            assert!((smat.get(k, k) - l.s_coeff[(0, 0)] * m.area(k)).abs() < 1e-16);
            assert!((smat.get(nc + k, k) - l.s_coeff[(1, 0)] * m.area(k)).abs() < 1e-16);
            assert!((c.get(nc + k, nc + k) - l.c[(1, 1)] * m.area(k)).abs() < 1e-16);
            assert!((m.area(k) - 0.125).abs() < 1e-16);
        }
    }

    #[test]
    fn scalar_collapse_and_sherman_morrison() {
        let m = Mesh::structured(2).unwrap();
        let s = ScaledParams::uniform(1, 3.0, 2.0, 0.25).unwrap();
        let l = build_lambdas(&s, 0.4, 0.9).unwrap();
        let (_, smat) = assemble_pressure_blocks(&m, &l);
        let expected = 0.25 + 0.4 * s.r + 0.9 / s.lambda0;
        assert!((smat.get(0, 0) - expected * m.area(0)).abs() < 1e-16);

        let s = ScaledParams::uniform(4, 3.0, 2.0, 0.0).unwrap();
        let (l1, l2) = (0.4, 0.9);
        let l = build_lambdas(&s, l1, l2).unwrap();
        let sum: f64 = l.s_inv.iter().sum();
        let oracle = crate::model::sherman_morrison_sum(l1 * s.r, l2 / s.lambda0, 4).unwrap();
        assert!((sum - oracle).abs() < 1e-12 * oracle);
    }

    #[test]
    fn boundary_elimination_counts() {
        let m = Mesh::structured(4).unwrap();
        let spec = ProblemSpec {
            sides: [
                SideConditions::new(DisplacementBc::Traction([0.0, 0.0]), vec![PressureBc::ZeroFlux]),
                SideConditions::new(DisplacementBc::Traction([0.0, 0.0]), vec![PressureBc::Dirichlet(1.0)]),
                SideConditions::new(DisplacementBc::Traction([0.0, -1.0]), vec![PressureBc::ZeroFlux]),
                SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::Dirichlet(2.0)]),
            ],
            ..biot_spec(1.0, 1.0, 0.0)
        };
        let sys = BlockSystem::assemble(&m, &spec, &AssemblyOptions::default()).unwrap();
        assert_eq!(sys.a_v.nrows, m.num_edges() - 8);
        assert_eq!(sys.a_u.nrows, 2 * m.num_edges() - 8);
        assert!(!sys.mean_zero);
        // f_v = -p̄ |e| on Dirichlet edges
        let total: f64 = sys.f_v.iter().sum();
        assert!((total + 4.0 * 0.25 * 1.0 + 4.0 * 0.25 * 2.0).abs() < 1e-14);
        // traction (0, -1) on the top against the translation w = (0, 1):
        // the load is -|Γ3| = -1
        let f_full = sys.expand_u(&sys.f);
        let w: Vec<f64> = (0..2 * m.num_edges())
            .map(|d| if d % 2 == 0 { m.edges[d / 2].normal[1] * m.edges[d / 2].length } else { 0.0 })
            .collect();
        assert!((dot(&f_full, &w) + 1.0).abs() < 1e-13, "{}", dot(&f_full, &w));
    }

    #[test]
    fn unconstrained_displacement_rejected() {
        let spec = ProblemSpec::uniform(
            "free",
            ModelParams::Scaled(ScaledParams::uniform(1, 1.0, 1.0, 0.0).unwrap()),
            SideConditions::new(DisplacementBc::Traction([0.0, 0.0]), vec![PressureBc::Dirichlet(0.0)]),
        );
        let m = Mesh::structured(2).unwrap();
        assert!(matches!(
            BlockSystem::assemble(&m, &spec, &AssemblyOptions::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn blocks_spd_and_symmetric() {
        let m = Mesh::structured(4).unwrap();
        let sys = BlockSystem::assemble(&m, &biot_spec(10.0, 3.0, 0.1), &AssemblyOptions::default()).unwrap();
        assert!(sys.a_u.is_symmetric(1e-13));
        assert!(sys.a_v.is_symmetric(1e-14));
        for (name, a) in [("A_v", &sys.a_v), ("A_u", &sys.a_u), ("S", &sys.s_mat)] {
            let ev = a.to_dense().symmetric_eigen().eigenvalues.min();
            assert!(ev > 0.0, "{name}: {ev}");
        }
    }

    #[test]
    fn augmentation_consistency() {
        let m = Mesh::structured(3).unwrap();
        let mut spec = biot_spec(5.0, 2.0, 0.3);
        spec.g = vec![Some(Arc::new(|x: [f64; 2]| x[0] * x[1] + 1.0))];
        spec.f = Some(Arc::new(|x: [f64; 2]| [x[1], -x[0]]));
        let sys = BlockSystem::assemble(&m, &spec, &AssemblyOptions::default()).unwrap();
        let a = sys.monolithic_matrix();
        let f = Factorization::new(&a, false, "monolithic").unwrap();
        let rhs = sys.rhs().to_vec();
        let x = Fields::from_slice(&f.solve_refined(&a, &rhs, 2).unwrap(), sys.sizes());
        let aug = AugmentedSystem::new(&sys, Augmentation::InverseS);
        let r = aug.residual(&x).to_vec();
        assert!(norm2(&r) <= 1e-12 * norm2(&aug.rhs().to_vec()), "{}", norm2(&r));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = Fields::from_slice(&random_vec(sys.sizes().total(), &mut rng), sys.sizes());
        let d = crate::linalg::sub(&aug.matrix().matvec(&y.to_vec()), &aug.apply(&y).to_vec());
        assert!(norm2(&d) <= 1e-12 * norm2(&aug.apply(&y).to_vec()));
    }

    #[test]
    fn zero_augmentation_reduces_first_row() {
        let m = Mesh::structured(2).unwrap();
        let sys = BlockSystem::assemble(&m, &biot_spec(1.0, 1.0, 0.5), &AssemblyOptions::default()).unwrap();
        let aug = AugmentedSystem::new(&sys, Augmentation::Zero);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sys.sizes();
        let x = Fields {
            v: random_vec(s.v, &mut rng),
            p: random_vec(s.p, &mut rng),
            u: random_vec(s.u, &mut rng),
        };
        let ya = aug.apply(&x);
        let y = sys.apply(&x);
        for (a, b) in ya.v.iter().zip(&y.v) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(aug.rhs().v, sys.f_v);
    }

    #[test]
    fn flux_augmentation_semidefinite() {
        let m = Mesh::structured(3).unwrap();
        let spec = ProblemSpec::uniform(
            "two",
            ModelParams::Scaled(
                ScaledParams::direct(2.0, vec![1.0, 10.0], vec![0.1, 0.0], vec![vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap(),
            ),
            SideConditions::new(
                DisplacementBc::Dirichlet([0.0, 0.0]),
                vec![PressureBc::Dirichlet(0.0), PressureBc::Dirichlet(1.0)],
            ),
        );
        let sys = BlockSystem::assemble(&m, &spec, &AssemblyOptions::default()).unwrap();
        let aug = flux_augmentation(&sys);
        assert!(aug.is_symmetric(1e-13));
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let x = random_vec(aug.nrows, &mut rng);
            let q = dot(&x, &aug.matvec(&x));
            assert!(q >= -1e-12 * dot(&x, &x));
        }
        // apply_m agrees with a dense S⁻¹ solve
        let r = random_vec(sys.s_mat.nrows, &mut rng);
        let mr = sys.apply_m(&r);
        let back = sys.s_mat.matvec(&mr);
        for (a, b) in back.iter().zip(&r) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_zero_detection_and_projection() {
        let spec = ProblemSpec::uniform(
            "closed",
            ModelParams::Scaled(ScaledParams::uniform(2, 1.0, 1.0, 0.0).unwrap()),
            SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::ZeroFlux; 2]),
        );
        assert!(spec.is_closed());
        let m = Mesh::structured(2).unwrap();
        let sys = BlockSystem::assemble(&m, &spec, &AssemblyOptions::default()).unwrap();
        assert!(sys.mean_zero);
        let mut p: Vec<f64> = (0..sys.c_mat.nrows).map(|i| i as f64).collect();
        sys.project_mean_zero(&mut p);
        let nc = sys.n_cells;
        for i in 0..2 {
            let mean: f64 = p[i * nc..(i + 1) * nc].iter().zip(&sys.cell_areas).map(|(a, b)| a * b).sum();
            assert!(mean.abs() < 1e-14);
        }
        let a = sys.monolithic_matrix();
        assert_eq!(a.nrows, sys.sizes().total() + 2);
        assert!(Factorization::new(&a, false, "monolithic").is_ok());
    }

    #[test]
    fn dirichlet_lifting_reproduces_translation() {
        // u = (1, 0) everywhere is an exact discrete solution with zero load when p is constant
        let m = Mesh::structured(3).unwrap();
        let spec = ProblemSpec::uniform(
            "shift",
            ModelParams::Scaled(ScaledParams::uniform(1, 2.0, 1.0, 0.0).unwrap()),
            SideConditions::new(DisplacementBc::Dirichlet([1.0, 0.0]), vec![PressureBc::Dirichlet(0.0)]),
        );
        let sys = BlockSystem::assemble(&m, &spec, &AssemblyOptions::default()).unwrap();
        let a = sys.monolithic_matrix();
        let f = Factorization::new(&a, false, "monolithic").unwrap();
        let x = Fields::from_slice(&f.solve_refined(&a, &sys.rhs().to_vec(), 2).unwrap(), sys.sizes());
        assert!(norm2(&x.p) < 1e-10);
        assert!(norm2(&x.v) < 1e-10);
        let full = sys.expand_u(&x.u);
        let bdm = BdmBasis::new(&m).unwrap();
        let dm = DofMap::build(&m, ElementKind::Bdm1);
        for c in 0..m.num_cells() {
            let v = crate::spaces::eval_vector_field(&m, &dm, Some(&bdm), &full, c, m.centroid(c));
            assert!((v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9, "{v:?}");
        }
    }

    #[test]
    fn matrix_market_export() {
        let m = Mesh::structured(2).unwrap();
        let sys = BlockSystem::assemble(&m, &biot_spec(1.0, 1.0, 0.0), &AssemblyOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        sys.export_matrix_market(dir.path()).unwrap();
        let a_u = mtx::read_matrix_file(dir.path().join("A_u.mtx")).unwrap();
        assert_eq!(a_u.nrows, sys.a_u.nrows);
        let d = a_u.add(-1.0, &sys.a_u);
        assert!(d.max_abs() <= 1e-15 * sys.a_u.max_abs());
    }
}
