//! Error norms of iterates against a reference solution.
//!
//! * `‖e_p‖²_P = Σ_K |K| e_K^T (Λ4 + θβ_d² Λ3 + Λ1 + Λ2) e_K`
//! * `‖e_u‖²_U = ‖ε(e_u)‖² + λ‖div e_u‖²`
//! * `‖e_v‖²_V = (A_v e_v, e_v) + (S⁻¹ Div e_v, Div e_v)`

use serde::Serialize;

use crate::assembly::{BlockSystem, Fields};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub p: f64,
    pub u: f64,
    pub v: f64,
}

/// `(e_p, Div e_v)` against `(A_v e_v, e_v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub pressure_div: f64,
    pub flux_energy: f64,
}

impl IdentityCheck {
    /// `|lhs - rhs| / (A_v e_v, e_v)`.
    pub fn relative_residual(&self) -> f64 {
        let d = (self.pressure_div - self.flux_energy).abs();
        if self.flux_energy > 0.0 {
            d / self.flux_energy
        } else {
            d
        }
    }
}

pub fn pressure_norm(system: &BlockSystem, e_p: &[f64]) -> f64 {
    let l = &system.lambdas;
    let w3 = system.stab.lambda3_weight();
    let n = system.n;
    let nc = system.n_cells;
    let mut total = 0.0;
    for k in 0..nc {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                let m = l.lambda4[(i, j)] + w3 * l.lambda3[(i, j)] + l.lambda1[(i, j)] + l.lambda2[(i, j)];
                q += e_p[i * nc + k] * m * e_p[j * nc + k];
            }
        }
        total += system.cell_areas[k] * q;
    }
    total.max(0.0).sqrt()
}

/// Size in `‖·‖_P` of the pressure change caused by rounding the mass
/// balance once at `x`: `ε ‖M (|B_v||v| + |C||p| + |B_u||u| + |g|)‖_P`.
/// Pressure errors near this level do not contract further.
pub fn pressure_rounding_level(system: &BlockSystem, x: &Fields) -> f64 {
    let abs_mv = |a: &crate::linalg::CsrMatrix, y: &[f64], out: &mut [f64]| {
        for (r, o) in out.iter_mut().enumerate() {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                *o += (a.values[k] * y[a.col_idx[k]]).abs();
            }
        }
    };
    let mut w: Vec<f64> = system.g.iter().map(|g| g.abs()).collect();
    abs_mv(&system.b_v, &x.v, &mut w);
    abs_mv(&system.c_mat, &x.p, &mut w);
    abs_mv(&system.b_u, &x.u, &mut w);
    let mw: Vec<f64> = system.apply_m(&w).iter().map(|z| z.abs()).collect();
    f64::EPSILON * pressure_norm(system, &mw)
}

pub fn displacement_norm(system: &BlockSystem, e_u: &[f64]) -> f64 {
    dot(e_u, &system.u_energy.matvec(e_u)).max(0.0).sqrt()
}

pub fn flux_norm(system: &BlockSystem, e_v: &[f64]) -> f64 {
    let bv = system.b_v.matvec(e_v);
    (dot(e_v, &system.a_v.matvec(e_v)) + dot(&bv, &system.apply_m(&bv))).max(0.0).sqrt()
}

pub fn error_norms(system: &BlockSystem, e: &Fields) -> ErrorNorms {
    ErrorNorms {
        p: pressure_norm(system, &e.p),
        u: displacement_norm(system, &e.u),
        v: flux_norm(system, &e.v),
    }
}

/// Evaluates both sides of `(e_p, Div e_v) = (A_v e_v, e_v)`. With
/// `B_v = -Div`, the left side is `-e_p^T B_v e_v`.
pub fn identity_check(system: &BlockSystem, e: &Fields) -> IdentityCheck {
    IdentityCheck {
        pressure_div: -dot(&e.p, &system.b_v.matvec(&e.v)),
        flux_energy: dot(&e.v, &system.a_v.matvec(&e.v)),
    }
}

/// Combined relative distance `(‖a-b‖_P + ‖a-b‖_U) / (‖b‖_P + ‖b‖_U)`.
pub fn relative_distance(system: &BlockSystem, a: &Fields, b: &Fields) -> f64 {
    let d = a.sub(b);
    let num = pressure_norm(system, &d.p) + displacement_norm(system, &d.u);
    let den = pressure_norm(system, &b.p) + displacement_norm(system, &b.u);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}
