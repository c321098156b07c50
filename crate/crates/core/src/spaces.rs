//! Lowest-order discrete spaces: RT0 fluxes, BDM1 displacements, P0 pressures.
//!
//! Local shape functions are defined with respect to the outward normal of
//! the cell. The global function attached to a dof is the local shape times
//! the orientation sign stored in the [`DofMap`], so normal traces match
//! across interior edges.
//!
//! BDM1 dofs on an edge are the normal-flux moments
//!
//! ```text
//! l0(v) = ∫_e v·n ds,      l1(v) = 3 ∫_e (v·n)(2s - 1) ds,
//! ```
//!
//! where `s ∈ [0, 1]` runs from the lower to the higher global vertex index.
//! With this choice `v·n = (l0 + l1 (2s - 1)) / |e|` on the edge. RT0 has
//! only `l0`.

use std::str::FromStr;

use nalgebra::SMatrix;

use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;

/// Finite element family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Rt0,
    Bdm1,
    P0,
}

impl ElementKind {
    pub fn local_dofs(self) -> usize {
        match self {
            ElementKind::Rt0 => 3,
            ElementKind::Bdm1 => 6,
            ElementKind::P0 => 1,
        }
    }
}

impl FromStr for ElementKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rt0" | "rt" => Ok(ElementKind::Rt0),
            "bdm1" | "bdm" => Ok(ElementKind::Bdm1),
            "p0" => Ok(ElementKind::P0),
            other => invalid(format!("unknown element kind `{other}`")),
        }
    }
}

/// Quadrature on the reference triangle `{(ξ, η): ξ, η ≥ 0, ξ + η ≤ 1}`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(λ0, λ1, λ2)`; the reference point is `(λ1, λ2)`.
    pub points: Vec<[f64; 3]>,
    /// Weights summing to the reference area 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Symmetric six-point rule, exact for polynomials of degree 4.
    pub fn triangle_degree4() -> Self {
        const A: (f64, f64, f64) = (0.223_381_589_678_011, 0.108_103_018_168_070, 0.445_948_490_915_965);
        const B: (f64, f64, f64) = (0.109_951_743_655_322, 0.816_847_572_980_459, 0.091_576_213_509_771);
        let mut points = Vec::with_capacity(6);
        let mut weights = Vec::with_capacity(6);
        for (w, a, b) in [A, B] {
            for p in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push(p);
                weights.push(0.5 * w);
            }
        }
        QuadratureRule { points, weights, degree: 4 }
    }

    pub fn reference_point(&self, q: usize) -> [f64; 2] {
        [self.points[q][1], self.points[q][2]]
    }

    /// Integrates `f` over the reference triangle.
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        (0..self.weights.len())
            .map(|q| self.weights[q] * f(self.reference_point(q)))
            .sum()
    }
}

/// Three-point Gauss-Legendre rule on `[0, 1]` (exact to degree 5).
#[derive(Debug, Clone)]
pub struct EdgeQuadrature {
    pub points: [f64; 3],
    pub weights: [f64; 3],
}

impl Default for EdgeQuadrature {
    fn default() -> Self {
        let r = (0.6f64).sqrt() / 2.0;
        EdgeQuadrature {
            points: [0.5 - r, 0.5, 0.5 + r],
            weights: [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0],
        }
    }
}

/// What a global dof is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofAssociation {
    /// Edge index and moment number (0 for RT0, 0 or 1 for BDM1).
    Edge { edge: usize, moment: usize },
    Cell(usize),
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: ElementKind,
    pub n_dofs: usize,
    /// Global dof of each local shape function, per cell.
    pub cell_dofs: Vec<Vec<usize>>,
    /// Orientation sign of each local shape function, per cell.
    pub cell_signs: Vec<Vec<f64>>,
    pub association: Vec<DofAssociation>,
}

impl DofMap {
    pub fn build(mesh: &Mesh, kind: ElementKind) -> DofMap {
        let nc = mesh.num_cells();
        let ne = mesh.num_edges();
        let mut cell_dofs = Vec::with_capacity(nc);
        let mut cell_signs = Vec::with_capacity(nc);
        match kind {
            ElementKind::P0 => {
                for c in 0..nc {
                    cell_dofs.push(vec![c]);
                    cell_signs.push(vec![1.0]);
                }
                DofMap {
                    kind,
                    n_dofs: nc,
                    cell_dofs,
                    cell_signs,
                    association: (0..nc).map(DofAssociation::Cell).collect(),
                }
            }
            ElementKind::Rt0 => {
                for c in 0..nc {
                    cell_dofs.push(mesh.cell_edges[c].to_vec());
                    cell_signs.push(mesh.cell_edge_signs[c].to_vec());
                }
                DofMap {
                    kind,
                    n_dofs: ne,
                    cell_dofs,
                    cell_signs,
                    association: (0..ne).map(|edge| DofAssociation::Edge { edge, moment: 0 }).collect(),
                }
            }
            ElementKind::Bdm1 => {
                for c in 0..nc {
                    let mut d = Vec::with_capacity(6);
                    let mut s = Vec::with_capacity(6);
                    for k in 0..3 {
                        let e = mesh.cell_edges[c][k];
                        let sg = mesh.cell_edge_signs[c][k];
                        d.extend([2 * e, 2 * e + 1]);
                        s.extend([sg, sg]);
                    }
                    cell_dofs.push(d);
                    cell_signs.push(s);
                }
                let association = (0..2 * ne)
                    .map(|i| DofAssociation::Edge { edge: i / 2, moment: i % 2 })
                    .collect();
                DofMap {
                    kind,
                    n_dofs: 2 * ne,
                    cell_dofs,
                    cell_signs,
                    association,
                }
            }
        }
    }
}

/// Values of all local shape functions of one cell at one point.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisEval {
    Vector {
        values: Vec<[f64; 2]>,
        /// Cellwise constant divergence of each shape.
        divergence: Vec<f64>,
        /// `gradient[j][a][b] = ∂φ_j,a / ∂x_b`.
        gradient: Vec<[[f64; 2]; 2]>,
    },
    Scalar {
        values: Vec<f64>,
    },
}

/// Physical point of reference coordinates `xi` in `cell`.
pub fn map_to_physical(mesh: &Mesh, cell: usize, xi: [f64; 2]) -> [f64; 2] {
    let [a, b, c] = mesh.cell_points(cell);
    [
        a[0] + xi[0] * (b[0] - a[0]) + xi[1] * (c[0] - a[0]),
        a[1] + xi[0] * (b[1] - a[1]) + xi[1] * (c[1] - a[1]),
    ]
}

/// Reference coordinates of physical point `x` in `cell`.
pub fn map_to_reference(mesh: &Mesh, cell: usize, x: [f64; 2]) -> [f64; 2] {
    let [a, b, c] = mesh.cell_points(cell);
    let (j00, j01, j10, j11) = (b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
    let det = j00 * j11 - j01 * j10;
    let (dx, dy) = (x[0] - a[0], x[1] - a[1]);
    [(j11 * dx - j01 * dy) / det, (-j10 * dx + j00 * dy) / det]
}

fn check_reference_point(xi: [f64; 2]) -> Result<()> {
    const TOL: f64 = 1e-12;
    if !(xi[0] >= -TOL && xi[1] >= -TOL && xi[0] + xi[1] <= 1.0 + TOL) {
        return invalid(format!("point ({}, {}) is outside the reference cell", xi[0], xi[1]));
    }
    Ok(())
}

/// Local RT0 shapes: `φ_k = |e_k| / (2|T|) (x - x_k)`, unit outward flux on
/// edge `k`, zero flux on the other two edges.
pub fn rt0_local(mesh: &Mesh, cell: usize, x: [f64; 2]) -> ([[f64; 2]; 3], [f64; 3]) {
    let pts = mesh.cell_points(cell);
    let area = mesh.area(cell);
    let mut vals = [[0.0; 2]; 3];
    let mut divs = [0.0; 3];
    for k in 0..3 {
        let len = mesh.edges[mesh.cell_edges[cell][k]].length;
        let s = len / (2.0 * area);
        vals[k] = [s * (x[0] - pts[k][0]), s * (x[1] - pts[k][1])];
        divs[k] = 2.0 * s;
    }
    (vals, divs)
}

/// Coefficients of the local BDM1 shapes of one cell in the scaled monomial
/// basis `(1,0), (ξ,0), (η,0), (0,1), (0,ξ), (0,η)` with
/// `ξ = (x - x_c)/h`, `η = (y - y_c)/h`.
#[derive(Debug, Clone)]
pub struct BdmCellBasis {
    pub center: [f64; 2],
    pub scale: f64,
    /// `coeffs[j][m]`: coefficient of monomial `m` in local shape `j`.
    pub coeffs: [[f64; 6]; 6],
}

impl BdmCellBasis {
    pub fn new(mesh: &Mesh, cell: usize) -> Result<Self> {
        let center = mesh.centroid(cell);
        let scale = mesh.h;
        let eq = EdgeQuadrature::default();
        // g[(i, m)] = l_i(monomial m)
        let mut g = SMatrix::<f64, 6, 6>::zeros();
        for k in 0..3 {
            let e = mesh.cell_edges[cell][k];
            let edge = &mesh.edges[e];
            let n = mesh.outward_normal(cell, k);
            for q in 0..3 {
                let s = eq.points[q];
                let w = eq.weights[q] * edge.length;
                let x = mesh.edge_point(e, s);
                let mono = monomials(center, scale, x);
                for (m, v) in mono.iter().enumerate() {
                    let vn = v[0] * n[0] + v[1] * n[1];
                    g[(2 * k, m)] += w * vn;
                    g[(2 * k + 1, m)] += 3.0 * w * vn * (2.0 * s - 1.0);
                }
            }
        }
        let inv = g.try_inverse().ok_or_else(|| Error::SingularMatrix {
            block: format!("BDM1 dual basis on cell {cell}"),
        })?;
        let mut coeffs = [[0.0; 6]; 6];
        for (j, row) in coeffs.iter_mut().enumerate() {
            for (m, c) in row.iter_mut().enumerate() {
                *c = inv[(m, j)];
            }
        }
        Ok(BdmCellBasis { center, scale, coeffs })
    }

    pub fn values(&self, x: [f64; 2]) -> [[f64; 2]; 6] {
        let mono = monomials(self.center, self.scale, x);
        let mut out = [[0.0; 2]; 6];
        for (j, o) in out.iter_mut().enumerate() {
            for m in 0..6 {
                o[0] += self.coeffs[j][m] * mono[m][0];
                o[1] += self.coeffs[j][m] * mono[m][1];
            }
        }
        out
    }

    pub fn divergence(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (self.coeffs[j][1] + self.coeffs[j][5]) / self.scale;
        }
        out
    }

    pub fn gradients(&self) -> [[[f64; 2]; 2]; 6] {
        let mut out = [[[0.0; 2]; 2]; 6];
        let h = self.scale;
        for (j, o) in out.iter_mut().enumerate() {
            let c = &self.coeffs[j];
            *o = [[c[1] / h, c[2] / h], [c[4] / h, c[5] / h]];
        }
        out
    }

    /// Symmetric gradient of each shape.
    pub fn strains(&self) -> [[[f64; 2]; 2]; 6] {
        let g = self.gradients();
        let mut out = [[[0.0; 2]; 2]; 6];
        for j in 0..6 {
            let off = 0.5 * (g[j][0][1] + g[j][1][0]);
            out[j] = [[g[j][0][0], off], [off, g[j][1][1]]];
        }
        out
    }
}

fn monomials(center: [f64; 2], h: f64, x: [f64; 2]) -> [[f64; 2]; 6] {
    let xi = (x[0] - center[0]) / h;
    let eta = (x[1] - center[1]) / h;
    [[1.0, 0.0], [xi, 0.0], [eta, 0.0], [0.0, 1.0], [0.0, xi], [0.0, eta]]
}

/// BDM1 local bases of every cell.
#[derive(Debug, Clone)]
pub struct BdmBasis {
    pub cells: Vec<BdmCellBasis>,
}

impl BdmBasis {
    pub fn new(mesh: &Mesh) -> Result<Self> {
        let cells = (0..mesh.num_cells())
            .map(|c| BdmCellBasis::new(mesh, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(BdmBasis { cells })
    }
}

/// Evaluates the local shape functions of `cell` at reference point `xi`.
pub fn eval_basis(mesh: &Mesh, kind: ElementKind, cell: usize, xi: [f64; 2]) -> Result<BasisEval> {
    check_reference_point(xi)?;
    if cell >= mesh.num_cells() {
        return invalid(format!("cell {cell} out of range"));
    }
    let x = map_to_physical(mesh, cell, xi);
    match kind {
        ElementKind::P0 => Ok(BasisEval::Scalar { values: vec![1.0] }),
        ElementKind::Rt0 => {
            let (vals, divs) = rt0_local(mesh, cell, x);
            let gradient = divs.iter().map(|d| [[0.5 * d, 0.0], [0.0, 0.5 * d]]).collect();
            Ok(BasisEval::Vector {
                values: vals.to_vec(),
                divergence: divs.to_vec(),
                gradient,
            })
        }
        ElementKind::Bdm1 => {
            let b = BdmCellBasis::new(mesh, cell)?;
            Ok(BasisEval::Vector {
                values: b.values(x).to_vec(),
                divergence: b.divergence().to_vec(),
                gradient: b.gradients().to_vec(),
            })
        }
    }
}

/// Evaluates a global discrete field at physical point `x` of `cell`.
pub fn eval_vector_field(
    mesh: &Mesh,
    dofmap: &DofMap,
    bdm: Option<&BdmBasis>,
    coeffs: &[f64],
    cell: usize,
    x: [f64; 2],
) -> [f64; 2] {
    let local: Vec<[f64; 2]> = match dofmap.kind {
        ElementKind::Rt0 => rt0_local(mesh, cell, x).0.to_vec(),
        ElementKind::Bdm1 => match bdm {
            Some(b) => b.cells[cell].values(x).to_vec(),
            None => BdmCellBasis::new(mesh, cell)
                .map(|b| b.values(x).to_vec())
                .unwrap_or_else(|_| vec![[0.0; 2]; 6]),
        },
        ElementKind::P0 => return [0.0, 0.0],
    };
    let mut v = [0.0; 2];
    for (j, phi) in local.iter().enumerate() {
        let c = dofmap.cell_signs[cell][j] * coeffs[dofmap.cell_dofs[cell][j]];
        v[0] += c * phi[0];
        v[1] += c * phi[1];
    }
    v
}
