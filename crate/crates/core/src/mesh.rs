//! Structured triangulations of the unit square.
//!
//! The square is cut into `N x N` cells of size `h = 1/N`, and every cell is
//! split along its bottom-left to top-right diagonal, giving `2N^2` congruent
//! right-angled triangles. Triangles are stored counterclockwise; local edge
//! `k` of a triangle is the edge opposite local vertex `k`.
//!
//! Every edge carries a fixed unit normal `n_e`. For an edge shared by two
//! triangles, `T1` is the triangle with the smaller index and `n_e` points out
//! of `T1`. On the boundary `n_e` is the outward normal.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{invalid, Error, Result};

/// Sides of the unit square, named after the boundary parts `Γ1..Γ4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundarySide {
    /// `Γ1`, `y = 0`.
    Bottom,
    /// `Γ2`, `x = 1`.
    Right,
    /// `Γ3`, `y = 1`.
    Top,
    /// `Γ4`, `x = 0`.
    Left,
}

impl BoundarySide {
    pub const ALL: [BoundarySide; 4] = [
        BoundarySide::Bottom,
        BoundarySide::Right,
        BoundarySide::Top,
        BoundarySide::Left,
    ];

    pub fn index(self) -> usize {
        match self {
            BoundarySide::Bottom => 0,
            BoundarySide::Right => 1,
            BoundarySide::Top => 2,
            BoundarySide::Left => 3,
        }
    }

    pub fn gamma_name(self) -> &'static str {
        match self {
            BoundarySide::Bottom => "Γ1",
            BoundarySide::Right => "Γ2",
            BoundarySide::Top => "Γ3",
            BoundarySide::Left => "Γ4",
        }
    }

    /// Side containing a point on the boundary, if any.
    fn of_point(p: [f64; 2]) -> Option<BoundarySide> {
        const TOL: f64 = 1e-12;
        if p[1].abs() < TOL {
            Some(BoundarySide::Bottom)
        } else if (p[0] - 1.0).abs() < TOL {
            Some(BoundarySide::Right)
        } else if (p[1] - 1.0).abs() < TOL {
            Some(BoundarySide::Top)
        } else if p[0].abs() < TOL {
            Some(BoundarySide::Left)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoint vertex indices, sorted ascending.
    pub vertices: [usize; 2],
    /// Unit normal, outward from `cells.0`.
    pub normal: [f64; 2],
    pub length: f64,
    /// `(T1, T2)`; `T2` is `None` on the boundary.
    pub cells: (usize, Option<usize>),
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }

    /// Unit tangent obtained by rotating the normal counterclockwise.
    pub fn tangent(&self) -> [f64; 2] {
        [-self.normal[1], self.normal[0]]
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    /// Number of subdivisions per side.
    pub n: usize,
    pub h: f64,
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub edges: Vec<Edge>,
    /// Global edge index of local edge `k` (opposite local vertex `k`).
    pub cell_edges: Vec<[usize; 3]>,
    /// `+1` when `n_e` is the outward normal of the cell, `-1` otherwise.
    pub cell_edge_signs: Vec<[f64; 3]>,
}

/// Boundary classification of every edge.
#[derive(Debug, Clone)]
pub struct BoundaryLabels {
    pub labels: Vec<Option<BoundarySide>>,
}

impl BoundaryLabels {
    pub fn edges_on(&self, side: BoundarySide) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(move |(e, l)| (*l == Some(side)).then_some(e))
    }

    pub fn count(&self, side: BoundarySide) -> usize {
        self.edges_on(side).count()
    }
}

impl Mesh {
    /// Builds the structured mesh with `n` subdivisions per side.
    pub fn structured(n: usize) -> Result<Mesh> {
        if n == 0 {
            return invalid("mesh needs at least one subdivision (N >= 1)");
        }
        let h = 1.0 / n as f64;
        let np = n + 1;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let vid = |i: usize, j: usize| j * np + i;

        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::with_capacity(3 * n * n + 2 * n);
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());

        for (c, tri) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            let mut cs = [0.0f64; 3];
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let pa = vertices[a];
                let pb = vertices[b];
                let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                let len = (dx * dx + dy * dy).sqrt();
                // outward normal of a counterclockwise edge a->b
                let outward = [dy / len, -dx / len];
                match edge_index.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.cells.1.is_some() {
                            return Err(Error::Internal(format!("edge {e} has more than two cells")));
                        }
                        edge.cells.1 = Some(c);
                        ce[k] = e;
                        cs[k] = -1.0;
                    }
                    None => {
                        let e = edges.len();
                        edge_index.insert(key, e);
                        edges.push(Edge {
                            vertices: [key.0, key.1],
                            normal: outward,
                            length: len,
                            cells: (c, None),
                        });
                        ce[k] = e;
                        cs[k] = 1.0;
                    }
                }
            }
            cell_edges.push(ce);
            cell_edge_signs.push(cs);
        }

        Ok(Mesh {
            n,
            h,
            vertices,
            cells,
            edges,
            cell_edges,
            cell_edge_signs,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_points(&self, c: usize) -> [[f64; 2]; 3] {
        let t = self.cells[c];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Signed area, positive for counterclockwise cells.
    pub fn signed_area(&self, c: usize) -> f64 {
        let [a, b, p] = self.cell_points(c);
        0.5 * ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self, c: usize) -> f64 {
        self.signed_area(c).abs()
    }

    pub fn cell_areas(&self) -> Vec<f64> {
        (0..self.num_cells()).map(|c| self.area(c)).collect()
    }

    pub fn centroid(&self, c: usize) -> [f64; 2] {
        let [a, b, p] = self.cell_points(c);
        [(a[0] + b[0] + p[0]) / 3.0, (a[1] + b[1] + p[1]) / 3.0]
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Point on edge `e` at parameter `s`, running from the lower to the higher
    /// vertex index.
    pub fn edge_point(&self, e: usize, s: f64) -> [f64; 2] {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    /// Local position of `edge` in `cell`, if incident.
    pub fn local_edge(&self, cell: usize, edge: usize) -> Option<usize> {
        self.cell_edges[cell].iter().position(|&e| e == edge)
    }

    /// Outward unit normal of `cell` on its local edge `k`.
    pub fn outward_normal(&self, cell: usize, k: usize) -> [f64; 2] {
        let e = &self.edges[self.cell_edges[cell][k]];
        let s = self.cell_edge_signs[cell][k];
        [s * e.normal[0], s * e.normal[1]]
    }

    /// Labels each boundary edge with the side containing its midpoint.
    pub fn classify_boundary(&self) -> BoundaryLabels {
        let labels = self
            .edges
            .iter()
            .enumerate()
            .map(|(e, edge)| {
                if edge.is_boundary() {
                    BoundarySide::of_point(self.edge_midpoint(e))
                } else {
                    None
                }
            })
            .collect();
        BoundaryLabels { labels }
    }

    /// Jump and average of a trace across `edge`.
    ///
    /// `first` and `second` pair an incident cell with the trace of the
    /// quantity from that cell; they may be given in either order. On boundary
    /// edges `second` must be `None`.
    pub fn interface_trace<V: TraceValue>(
        &self,
        edge: usize,
        first: (usize, V),
        second: Option<(usize, V)>,
    ) -> Result<Trace<V>> {
        let ed = self
            .edges
            .get(edge)
            .ok_or_else(|| Error::Internal(format!("edge {edge} out of range")))?;
        match (ed.cells.1, second) {
            (None, None) => {
                if first.0 != ed.cells.0 {
                    return Err(Error::Internal(format!(
                        "cell {} is not incident to boundary edge {edge}",
                        first.0
                    )));
                }
                Ok(Trace {
                    jump: first.1,
                    average: V::boundary_average(first.1, ed.normal),
                })
            }
            (Some(t2), Some(second)) => {
                let (v1, v2) = if first.0 == ed.cells.0 && second.0 == t2 {
                    (first.1, second.1)
                } else if second.0 == ed.cells.0 && first.0 == t2 {
                    (second.1, first.1)
                } else {
                    return Err(Error::Internal(format!(
                        "cells ({}, {}) do not match incidence of edge {edge}",
                        first.0, second.0
                    )));
                };
                Ok(Trace {
                    jump: v1.minus(v2),
                    average: V::interior_average(v1, v2, ed.normal),
                })
            }
            _ => Err(Error::Internal(format!(
                "edge {edge}: trace count does not match incident cells"
            ))),
        }
    }

    /// Line-oriented text dump: vertices, cells, then edges.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# mesh N={} h={}", self.n, self.h)?;
        writeln!(w, "vertices {}", self.num_vertices())?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "{i} {:.17e} {:.17e}", v[0], v[1])?;
        }
        writeln!(w, "cells {}", self.num_cells())?;
        for (i, c) in self.cells.iter().enumerate() {
            let e = self.cell_edges[i];
            writeln!(w, "{i} {} {} {} {} {} {}", c[0], c[1], c[2], e[0], e[1], e[2])?;
        }
        writeln!(w, "edges {}", self.num_edges())?;
        let labels = self.classify_boundary();
        for (i, e) in self.edges.iter().enumerate() {
            let t2 = e.cells.1.map(|c| c as i64).unwrap_or(-1);
            let label = labels.labels[i].map(|s| s.gamma_name()).unwrap_or("-");
            writeln!(
                w,
                "{i} {} {} {} {t2} {:.17e} {:.17e} {label}",
                e.vertices[0], e.vertices[1], e.cells.0, e.normal[0], e.normal[1]
            )?;
        }
        Ok(())
    }
}

/// Jump and average of a trace on one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trace<V: TraceValue> {
    pub jump: V,
    pub average: V::Average,
}

/// Quantities with jumps and averages across edges.
///
/// Scalars average as `(q1 + q2) / 2`; vectors as `(v1·n1 - v2·n2) / 2`;
/// tensors as `(τ1 n1 - τ2 n2) / 2`. On boundary edges the average is the
/// one-sided trace (`v·n`, `τ n`).
pub trait TraceValue: Copy {
    type Average: Copy + std::fmt::Debug + PartialEq;
    fn minus(self, other: Self) -> Self;
    fn interior_average(first: Self, second: Self, n1: [f64; 2]) -> Self::Average;
    fn boundary_average(value: Self, n: [f64; 2]) -> Self::Average;
}

impl TraceValue for f64 {
    type Average = f64;
    fn minus(self, other: Self) -> Self {
        self - other
    }
    fn interior_average(first: Self, second: Self, _n1: [f64; 2]) -> f64 {
        0.5 * (first + second)
    }
    fn boundary_average(value: Self, _n: [f64; 2]) -> f64 {
        value
    }
}

impl TraceValue for [f64; 2] {
    type Average = f64;
    fn minus(self, other: Self) -> Self {
        [self[0] - other[0], self[1] - other[1]]
    }
    fn interior_average(first: Self, second: Self, n1: [f64; 2]) -> f64 {
        // n2 = -n1
        0.5 * ((first[0] + second[0]) * n1[0] + (first[1] + second[1]) * n1[1])
    }
    fn boundary_average(value: Self, n: [f64; 2]) -> f64 {
        value[0] * n[0] + value[1] * n[1]
    }
}

impl TraceValue for [[f64; 2]; 2] {
    type Average = [f64; 2];
    fn minus(self, other: Self) -> Self {
        [
            [self[0][0] - other[0][0], self[0][1] - other[0][1]],
            [self[1][0] - other[1][0], self[1][1] - other[1][1]],
        ]
    }
    fn interior_average(first: Self, second: Self, n1: [f64; 2]) -> [f64; 2] {
        let s = [
            [first[0][0] + second[0][0], first[0][1] + second[0][1]],
            [first[1][0] + second[1][0], first[1][1] + second[1][1]],
        ];
        [
            0.5 * (s[0][0] * n1[0] + s[0][1] * n1[1]),
            0.5 * (s[1][0] * n1[0] + s[1][1] * n1[1]),
        ]
    }
    fn boundary_average(value: Self, n: [f64; 2]) -> [f64; 2] {
        [
            value[0][0] * n[0] + value[0][1] * n[1],
            value[1][0] * n[0] + value[1][1] * n[1],
        ]
    }
}
