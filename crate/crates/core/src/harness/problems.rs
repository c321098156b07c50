//! Problem definitions for the experiment suites.

use std::sync::Arc;

use crate::assembly::{DisplacementBc, ModelParams, PressureBc, ProblemSpec, SideConditions};
use crate::error::{invalid, Result};
use crate::mesh::Mesh;
use crate::model::{RawModelParams, ScaledParams};
use crate::spaces::{eval_vector_field, map_to_physical, DofMap, ElementKind, QuadratureRule};

/// `φ2 = 900 (x-1)² (y-1)² x² y²`
pub fn phi2(x: [f64; 2]) -> f64 {
    let (a, b) = (x[0], x[1]);
    900.0 * (a - 1.0).powi(2) * (b - 1.0).powi(2) * a * a * b * b
}

fn phi2_gradient(x: [f64; 2]) -> [f64; 2] {
    let (a, b) = (x[0], x[1]);
    let qx = (a - 1.0).powi(2) * a * a;
    let qy = (b - 1.0).powi(2) * b * b;
    let dqx = 4.0 * a.powi(3) - 6.0 * a * a + 2.0 * a;
    let dqy = 4.0 * b.powi(3) - 6.0 * b * b + 2.0 * b;
    [900.0 * dqx * qy, 900.0 * qx * dqy]
}

/// Pressure source of the Biot test, `R (∂_x φ2 + ∂_y φ2) - α_p (φ2 - 1)`
/// with `R = 1/R^{-1}`.
pub fn biot_g(x: [f64; 2], r_inv: f64, alpha_p: f64) -> f64 {
    let g = phi2_gradient(x);
    (g[0] + g[1]) / r_inv - alpha_p * (phi2(x) - 1.0)
}

/// Body force of the Biot test.
pub fn biot_f(x: [f64; 2]) -> [f64; 2] {
    let (a, b) = (x[0], x[1]);
    let f1 = -(2.0 * b.powi(3) - 3.0 * b * b + b) * (12.0 * a * a - 12.0 * a + 2.0)
        - (a - 1.0).powi(2) * a * a * (12.0 * b - 6.0)
        + 900.0 * (b - 1.0).powi(2) * b * b * (4.0 * a.powi(3) - 6.0 * a * a + 2.0 * a);
    let f2 = (2.0 * a.powi(3) - 3.0 * a * a + a) * (12.0 * b * b - 12.0 * b + 2.0)
        + (b - 1.0).powi(2) * b * b * (12.0 * a - 6.0)
        + 900.0 * (a - 1.0).powi(2) * a * a * (4.0 * b.powi(3) - 6.0 * b * b + 2.0 * b);
    [f1, f2]
}

/// Single-network test with the sources above on a closed domain: clamped
/// displacement and zero normal flux. `∫ φ2 = 1`, so the pressure source has
/// zero mean and the pressure is fixed by a zero mean.
pub fn biot_manufactured(params: ScaledParams) -> Result<ProblemSpec> {
    if params.n != 1 {
        return invalid(format!("the Biot test has one network, got n = {}", params.n));
    }
    let (r_inv, alpha_p) = (params.r_inv[0], params.alpha_p[0]);
    let mut spec = ProblemSpec::uniform(
        "biot",
        ModelParams::Scaled(params),
        SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::ZeroFlux]),
    );
    spec.g = vec![Some(Arc::new(move |x| biot_g(x, r_inv, alpha_p)))];
    spec.f = Some(Arc::new(biot_f));
    Ok(spec)
}

/// Cantilever-type conditions: clamped left side, free bottom and right,
/// unit downward traction on top, constant pressures on the whole boundary.
pub fn cantilever_sides(pressures: &[f64]) -> [SideConditions; 4] {
    let p: Vec<PressureBc> = pressures.iter().map(|&v| PressureBc::Dirichlet(v)).collect();
    [
        SideConditions::new(DisplacementBc::Traction([0.0, 0.0]), p.clone()),
        SideConditions::new(DisplacementBc::Traction([0.0, 0.0]), p.clone()),
        SideConditions::new(DisplacementBc::Traction([0.0, -1.0]), p.clone()),
        SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), p),
    ]
}

fn cantilever(name: &str, params: ModelParams, pressures: &[f64]) -> ProblemSpec {
    let n = params.n();
    ProblemSpec {
        name: name.to_string(),
        params,
        sides: cantilever_sides(pressures),
        f: None,
        g: vec![None; n],
        g_extra: None,
    }
}

/// Two-network model with the reference coefficients.
pub fn barenblatt() -> ProblemSpec {
    barenblatt_with(RawModelParams::barenblatt(false))
}

pub fn barenblatt_with(params: RawModelParams) -> ProblemSpec {
    cantilever("barenblatt", ModelParams::Raw(params), &[2.0, 20.0])
}

/// Barenblatt coefficients with `K1, K2` and `λ̂` multiplied by the given
/// factors.
pub fn barenblatt_scaled(k_scale: f64, lambda_scale: f64) -> RawModelParams {
    let mut p = RawModelParams::barenblatt(false);
    p.k.iter_mut().for_each(|k| *k *= k_scale);
    p.lambda_raw *= lambda_scale;
    p
}

/// Four-network model with the reference coefficients.
pub fn four_network() -> ProblemSpec {
    four_network_with(RawModelParams::four_network())
}

pub fn four_network_with(params: RawModelParams) -> ProblemSpec {
    cantilever("four_network", ModelParams::Raw(params), &[2.0, 20.0, 30.0, 40.0])
}

/// Four-network coefficients with `K3`, `K = K1 = K2 = K4` and `λ` scaled.
pub fn four_network_scaled(k3_scale: f64, k_scale: f64, lambda_scale: f64) -> RawModelParams {
    let mut p = RawModelParams::four_network();
    for (i, k) in p.k.iter_mut().enumerate() {
        *k *= if i == 2 { k3_scale } else { k_scale };
    }
    p.lambda_raw *= lambda_scale;
    p
}

/// `n` uncoupled networks with `λ = 1e3`, `R^{-1} = 1e4`, `α_p = 1e-4`
/// and boundary pressure 10.
pub fn scaling(n: usize) -> Result<ProblemSpec> {
    let params = ScaledParams::uniform(n, 1e3, 1e4, 1e-4)?;
    Ok(cantilever("scaling", ModelParams::Scaled(params), &vec![10.0; n]))
}

/// Smooth single-network solution with zero boundary values:
///
/// * `p = x(1-x) y(1-y)`, `v = -R ∇p`
/// * `u = (x²(1-x) y(1-y), x(1-x) y²(1-y))`
#[derive(Debug, Clone, Copy)]
pub struct PolynomialSolution {
    pub lambda: f64,
    pub r_inv: f64,
    pub alpha_p: f64,
}

impl PolynomialSolution {
    pub fn pressure(&self, x: [f64; 2]) -> f64 {
        x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1])
    }

    pub fn flux(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = (x[0], x[1]);
        let r = 1.0 / self.r_inv;
        [-r * (1.0 - 2.0 * a) * b * (1.0 - b), -r * a * (1.0 - a) * (1.0 - 2.0 * b)]
    }

    pub fn displacement(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = (x[0], x[1]);
        [a * a * (1.0 - a) * b * (1.0 - b), a * (1.0 - a) * b * b * (1.0 - b)]
    }

    /// `-div v - α_p p - div u`
    pub fn g(&self, x: [f64; 2]) -> f64 {
        let (a, b) = (x[0], x[1]);
        let r = 1.0 / self.r_inv;
        let div_u = a * b * (6.0 * a * b - 5.0 * a - 5.0 * b + 4.0);
        -2.0 * r * (a * (1.0 - a) + b * (1.0 - b)) - self.alpha_p * self.pressure(x) - div_u
    }

    /// `-div ε(u) - λ ∇div u + ∇p`
    pub fn f(&self, x: [f64; 2]) -> [f64; 2] {
        let (a, b) = (x[0], x[1]);
        let l = self.lambda;
        let f1 = l * (-12.0 * a * b * b + 10.0 * a * b + 5.0 * b * b - 4.0 * b) - a.powi(3) + a * a - 7.0 * a * b * b
            + 6.0 * a * b
            + 2.5 * b * b
            - 2.0 * b;
        let f2 = l * (-12.0 * a * a * b + 5.0 * a * a + 10.0 * a * b - 4.0 * a) - 7.0 * a * a * b + 2.5 * a * a
            + 6.0 * a * b
            - 2.0 * a
            - b.powi(3)
            + b * b;
        [f1, f2]
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        let params = ScaledParams::uniform(1, self.lambda, self.r_inv, self.alpha_p)?;
        let mut spec = ProblemSpec::uniform(
            "polynomial",
            ModelParams::Scaled(params),
            SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::Dirichlet(0.0)]),
        );
        let me = *self;
        spec.g = vec![Some(Arc::new(move |x| me.g(x)))];
        spec.f = Some(Arc::new(move |x| me.f(x)));
        Ok(spec)
    }
}

/// `‖v - v_h‖_{L²}` for an RT0 field given by its full coefficient vector.
pub fn flux_l2_error(mesh: &Mesh, coeffs: &[f64], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let dm = DofMap::build(mesh, ElementKind::Rt0);
    let q = QuadratureRule::triangle_degree4();
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let jac = 2.0 * mesh.area(c);
        for qp in 0..q.weights.len() {
            let x = map_to_physical(mesh, c, q.reference_point(qp));
            let vh = eval_vector_field(mesh, &dm, None, coeffs, c, x);
            let v = exact(x);
            total += q.weights[qp] * jac * ((vh[0] - v[0]).powi(2) + (vh[1] - v[1]).powi(2));
        }
    }
    total.sqrt()
}

/// `‖p - p_h‖_{L²}` for a P0 field.
pub fn pressure_l2_error(mesh: &Mesh, values: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let q = QuadratureRule::triangle_degree4();
    let mut total = 0.0;
    for c in 0..mesh.num_cells() {
        let jac = 2.0 * mesh.area(c);
        for qp in 0..q.weights.len() {
            let x = map_to_physical(mesh, c, q.reference_point(qp));
            total += q.weights[qp] * jac * (values[c] - exact(x)).powi(2);
        }
    }
    total.sqrt()
}
