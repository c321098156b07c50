//! Model coefficients, rescaling and the network coupling matrices.
//!
//! The static problem solved in every time step is divided by `2μ` with
//! `λ/2μ → λ`, `α_i/2μ → α_i`, `τ/2μ → τ`, `c_{p_i}/2μ → c_{p_i}`, and then
//! rewritten with
//!
//! ```text
//! R_i^{-1} = τ^{-1} K_i^{-1} α_i^2,   α_{p_i} = c_{p_i} / α_i^2,
//! α_ij = τ β_ij / (α_i α_j),          α_ii = τ β_ii / α_i^2,  β_ii = Σ_{j≠i} β_ij,
//! ```
//!
//! all evaluated with the `2μ`-scaled `τ`, `α_i` and `c_{p_i}`.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Physical coefficients of the MPET model.
#[derive(Debug, Clone, PartialEq)]
pub struct RawModelParams {
    pub n: usize,
    pub lambda_raw: f64,
    pub mu: f64,
    pub c_p: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Symmetric transfer coefficients with zero diagonal, `n x n`.
    pub beta: Vec<Vec<f64>>,
    pub k: Vec<f64>,
    pub tau: f64,
}

impl RawModelParams {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return invalid("n: at least one network is required");
        }
        for (name, len) in [
            ("c_p", self.c_p.len()),
            ("alpha", self.alpha.len()),
            ("K", self.k.len()),
            ("beta", self.beta.len()),
        ] {
            if len != n {
                return invalid(format!("{name}: expected {n} entries, found {len}"));
            }
        }
        if !(self.mu > 0.0) {
            return invalid(format!("mu: must be positive, got {}", self.mu));
        }
        if !(self.lambda_raw >= 0.0) {
            return invalid(format!("lambda: must be nonnegative, got {}", self.lambda_raw));
        }
        if !(self.tau > 0.0) {
            return invalid(format!("tau: must be positive, got {}", self.tau));
        }
        for i in 0..n {
            if !(self.k[i] > 0.0) {
                return invalid(format!("K[{i}]: must be positive, got {}", self.k[i]));
            }
            if !(self.alpha[i] > 0.0) {
                return invalid(format!("alpha[{i}]: must be positive, got {}", self.alpha[i]));
            }
            if !(self.c_p[i] >= 0.0) {
                return invalid(format!("c_p[{i}]: must be nonnegative, got {}", self.c_p[i]));
            }
            if self.beta[i].len() != n {
                return invalid(format!("beta[{i}]: expected {n} entries"));
            }
            if self.beta[i][i] != 0.0 {
                return invalid(format!("beta[{i}][{i}]: diagonal must be zero"));
            }
            for j in 0..n {
                let b = self.beta[i][j];
                if !(b >= 0.0) {
                    return invalid(format!("beta[{i}][{j}]: must be nonnegative, got {b}"));
                }
                if b != self.beta[j][i] {
                    return invalid(format!("beta[{i}][{j}]: matrix must be symmetric"));
                }
            }
        }
        Ok(())
    }

    /// Builds a symmetric transfer matrix from its strict upper triangle in
    /// row order (`β12, β13, ..., β1n, β23, ...`).
    pub fn beta_from_upper(n: usize, upper: &[f64]) -> Result<Vec<Vec<f64>>> {
        let expected = n * (n - 1) / 2;
        if upper.len() != expected {
            return invalid(format!(
                "beta: expected {expected} upper-triangle entries for n = {n}, found {}",
                upper.len()
            ));
        }
        let mut beta = vec![vec![0.0; n]; n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in (i + 1)..n {
                let b = *it.next().unwrap_or(&0.0);
                beta[i][j] = b;
                beta[j][i] = b;
            }
        }
        Ok(beta)
    }

    /// Parses the flat `key = value` parameter format.
    ///
    /// Keys: `n`, `lambda`, `mu`, `c_p`, `alpha`, `beta`, `K`, `tau`. Arrays
    /// are comma-separated; `beta` lists the strict upper triangle in row
    /// order. A single value for an array key is broadcast to all networks.
    /// Lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map: HashMap<String, (usize, String)> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected `key = value`, found `{line}`"),
                });
            };
            let key = key.trim().to_string();
            if map.insert(key.clone(), (lineno + 1, value.trim().to_string())).is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        let get = |key: &str| -> Result<&(usize, String)> {
            map.get(key).ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing key `{key}`"),
            })
        };
        let scalar = |key: &str| -> Result<f64> {
            let (line, v) = get(key)?;
            v.parse::<f64>().map_err(|e| Error::Parse {
                line: *line,
                msg: format!("{key}: {e}"),
            })
        };
        let array = |key: &str| -> Result<Vec<f64>> {
            let (line, v) = get(key)?;
            v.split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: *line,
                        msg: format!("{key}: {e}"),
                    })
                })
                .collect()
        };
        let n = {
            let (line, v) = get("n")?;
            v.parse::<usize>().map_err(|e| Error::Parse {
                line: *line,
                msg: format!("n: {e}"),
            })?
        };
        let broadcast = |key: &str| -> Result<Vec<f64>> {
            let a = array(key)?;
            Ok(if a.len() == 1 { vec![a[0]; n] } else { a })
        };
        let beta = if n > 1 {
            let upper = array("beta")?;
            let upper = if upper.len() == 1 { vec![upper[0]; n * (n - 1) / 2] } else { upper };
            Self::beta_from_upper(n, &upper)?
        } else {
            vec![vec![0.0]]
        };
        let tau = if map.contains_key("tau") { scalar("tau")? } else { 1.0 };
        let p = RawModelParams {
            n,
            lambda_raw: scalar("lambda")?,
            mu: scalar("mu")?,
            c_p: broadcast("c_p")?,
            alpha: broadcast("alpha")?,
            beta,
            k: broadcast("K")?,
            tau,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Writes the parameters in the format read by [`RawModelParams::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(",");
        let mut upper = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                upper.push(self.beta[i][j]);
            }
        }
        let mut s = format!(
            "n = {}\nlambda = {:e}\nmu = {:e}\nc_p = {}\nalpha = {}\nK = {}\ntau = {:e}\n",
            self.n,
            self.lambda_raw,
            self.mu,
            join(&self.c_p),
            join(&self.alpha),
            join(&self.k),
            self.tau
        );
        if self.n > 1 {
            s.push_str(&format!("beta = {}\n", join(&upper)));
        }
        s
    }

    /// Two-network Barenblatt reference parameters. `beta_alt` selects the
    /// larger of the two tabulated transfer coefficients.
    pub fn barenblatt(beta_alt: bool) -> Self {
        let mut p = Self::parse(BARENBLATT_PRESET).expect("bundled preset parses");
        if beta_alt {
            p.beta = Self::beta_from_upper(2, &[1.0e-8]).expect("n = 2");
        }
        p
    }

    /// Four-network reference parameters.
    pub fn four_network() -> Self {
        Self::parse(FOUR_NETWORK_PRESET).expect("bundled preset parses")
    }
}

pub const BARENBLATT_PRESET: &str = include_str!("../presets/barenblatt.params");
pub const FOUR_NETWORK_PRESET: &str = include_str!("../presets/four_network.params");

/// Dimensionless coefficients of the rescaled system.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledParams {
    pub n: usize,
    pub lambda: f64,
    pub r_inv: Vec<f64>,
    pub alpha_p: Vec<f64>,
    /// `alpha_cross[i][j] = α_ij` for `i ≠ j`; the diagonal holds `α_ii`.
    pub alpha_cross: Vec<Vec<f64>>,
    /// Raw `β_ii = Σ_{j≠i} β_ij`; zero when built directly.
    pub beta_diag: Vec<f64>,
    pub lambda0: f64,
    /// `R = (max_i R_i^{-1})^{-1}`.
    pub r: f64,
}

impl ScaledParams {
    /// Scaled parameters given directly. The diagonal of `alpha_cross` is
    /// replaced by the off-diagonal row sums.
    pub fn direct(lambda: f64, r_inv: Vec<f64>, alpha_p: Vec<f64>, alpha_cross: Vec<Vec<f64>>) -> Result<Self> {
        let n = r_inv.len();
        if n == 0 {
            return invalid("n: at least one network is required");
        }
        if alpha_p.len() != n || alpha_cross.len() != n || alpha_cross.iter().any(|r| r.len() != n) {
            return invalid("scaled parameter arrays have inconsistent lengths");
        }
        let mut alpha_cross = alpha_cross;
        for i in 0..n {
            alpha_cross[i][i] = (0..n).filter(|&j| j != i).map(|j| alpha_cross[i][j]).sum();
        }
        let max_r_inv = r_inv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s = ScaledParams {
            n,
            lambda,
            lambda0: lambda.max(1.0),
            r: 1.0 / max_r_inv,
            r_inv,
            alpha_p,
            alpha_cross,
            beta_diag: vec![0.0; n],
        };
        s.validate()?;
        Ok(s)
    }

    /// Uniform parameters for `n` uncoupled networks.
    pub fn uniform(n: usize, lambda: f64, r_inv: f64, alpha_p: f64) -> Result<Self> {
        Self::direct(lambda, vec![r_inv; n], vec![alpha_p; n], vec![vec![0.0; n]; n])
    }

    /// Checks `λ ≥ 0, R_i^{-1} > 0, α_{p_i} ≥ 0, α_ij ≥ 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return invalid(format!("lambda: must be nonnegative and finite, got {}", self.lambda));
        }
        for i in 0..self.n {
            if !(self.r_inv[i] > 0.0) || !self.r_inv[i].is_finite() {
                return invalid(format!("R_inv[{i}]: must be positive and finite, got {}", self.r_inv[i]));
            }
            if !(self.alpha_p[i] >= 0.0) {
                return invalid(format!("alpha_p[{i}]: must be nonnegative, got {}", self.alpha_p[i]));
            }
            for j in 0..self.n {
                if !(self.alpha_cross[i][j] >= 0.0) {
                    return invalid(format!("alpha_cross[{i}][{j}]: must be nonnegative"));
                }
                if i != j && (self.alpha_cross[i][j] - self.alpha_cross[j][i]).abs()
                    > 1e-14 * self.alpha_cross[i][j].abs().max(1e-300)
                {
                    return invalid(format!("alpha_cross[{i}][{j}]: must be symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Applies the `2μ` scaling and the parameter substitutions.
pub fn rescale(raw: &RawModelParams) -> Result<ScaledParams> {
    raw.validate()?;
    let n = raw.n;
    let two_mu = 2.0 * raw.mu;
    let tau = raw.tau / two_mu;
    let alpha: Vec<f64> = raw.alpha.iter().map(|a| a / two_mu).collect();
    let c_p: Vec<f64> = raw.c_p.iter().map(|c| c / two_mu).collect();
    let lambda = raw.lambda_raw / two_mu;

    let r_inv: Vec<f64> = (0..n).map(|i| alpha[i] * alpha[i] / (tau * raw.k[i])).collect();
    let alpha_p: Vec<f64> = (0..n).map(|i| c_p[i] / (alpha[i] * alpha[i])).collect();
    let beta_diag: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| raw.beta[i][j]).sum())
        .collect();
    let mut alpha_cross = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            alpha_cross[i][j] = if i == j {
                tau * beta_diag[i] / (alpha[i] * alpha[i])
            } else {
                tau * raw.beta[i][j] / (alpha[i] * alpha[j])
            };
        }
    }
    let max_r_inv = r_inv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s = ScaledParams {
        n,
        lambda,
        lambda0: lambda.max(1.0),
        r: 1.0 / max_r_inv,
        r_inv,
        alpha_p,
        alpha_cross,
        beta_diag,
    };
    s.validate()?;
    Ok(s)
}

/// The `n x n` coupling matrices.
#[derive(Debug, Clone)]
pub struct LambdaSet {
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
    pub lambda3: DMatrix<f64>,
    pub lambda4: DMatrix<f64>,
    /// `C = Λ1 + Λ2`.
    pub c: DMatrix<f64>,
    /// `Λ1 + Λ2 + L1 Λ3 + L2 Λ4`.
    pub s_coeff: DMatrix<f64>,
    /// Inverse of `s_coeff`.
    pub s_inv: DMatrix<f64>,
}

/// Builds `Λ1..Λ4`, `C` and the pressure stabilization `S` for given `L1, L2`.
pub fn build_lambdas(scaled: &ScaledParams, l1: f64, l2: f64) -> Result<LambdaSet> {
    let n = scaled.n;
    let lambda1 = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            scaled.alpha_cross[i][i]
        } else {
            -scaled.alpha_cross[i][j]
        }
    });
    let lambda2 = DMatrix::from_diagonal(&DVector::from_vec(scaled.alpha_p.clone()));
    let lambda3 = DMatrix::identity(n, n) * scaled.r;
    let lambda4 = DMatrix::from_element(n, n, 1.0 / scaled.lambda0);
    let c = &lambda1 + &lambda2;
    let s_coeff = &c + &lambda3 * l1 + &lambda4 * l2;
    let s_inv = s_coeff
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix {
            block: "S coefficient matrix".into(),
        })?
        .inverse();
    Ok(LambdaSet {
        lambda1,
        lambda2,
        lambda3,
        lambda4,
        c,
        s_coeff,
        s_inv,
    })
}

/// How the augmentation weight `θ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaMode {
    /// `θ* = 2(β_s^{-2} + λ)/λ0`.
    Optimal,
    /// `θ0 = β_d^{-2}`.
    Theta0,
}

impl FromStr for ThetaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" | "theta*" | "theta_star" => Ok(ThetaMode::Optimal),
            "theta0" | "theta_0" => Ok(ThetaMode::Theta0),
            _ => invalid(format!("unknown theta mode `{s}`")),
        }
    }
}

/// Inputs to [`compute_stabilization`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationOptions {
    pub c_k2: f64,
    pub beta_s2: f64,
    pub beta_d2: f64,
    pub theta_mode: ThetaMode,
    /// Fixed-stress `L`; defaults to `1/(1+λ)`.
    pub fixed_stress_l: Option<f64>,
}

impl Default for StabilizationOptions {
    fn default() -> Self {
        StabilizationOptions {
            c_k2: 0.5,
            beta_s2: 0.18,
            beta_d2: 0.18,
            theta_mode: ThetaMode::Optimal,
            fixed_stress_l: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationConstants {
    pub c_k2: f64,
    pub beta_s2: f64,
    pub beta_d2: f64,
    pub theta: f64,
    pub theta_mode: ThetaMode,
    pub l1: f64,
    pub l2: f64,
    /// Fixed-stress stabilization.
    pub l: f64,
}

impl StabilizationConstants {
    /// Weight of `‖Λ3^{1/2} e‖²` in the pressure error norm, `θ β_d²`.
    pub fn lambda3_weight(&self) -> f64 {
        self.theta * self.beta_d2
    }
}

/// Stabilization constants for the augmented Uzawa and fixed-stress schemes.
pub fn compute_stabilization(scaled: &ScaledParams, opts: &StabilizationOptions) -> StabilizationConstants {
    let n = scaled.n as f64;
    let lambda = scaled.lambda;
    let lambda0 = scaled.lambda0;
    let r = scaled.r;
    let bs_inv = 1.0 / opts.beta_s2;
    let (theta, l2) = match opts.theta_mode {
        ThetaMode::Optimal => {
            let theta = 2.0 * (bs_inv + lambda) / lambda0;
            let l2 = lambda0 / ((opts.c_k2 + lambda) * (1.0 + 2.0 * opts.beta_d2 * (bs_inv + lambda) * r / n));
            (theta, l2)
        }
        ThetaMode::Theta0 => {
            let theta = 1.0 / opts.beta_d2;
            let l2 = lambda0 / ((opts.c_k2 + lambda) * (1.0 + r * lambda0 / n));
            (theta, l2)
        }
    };
    StabilizationConstants {
        c_k2: opts.c_k2,
        beta_s2: opts.beta_s2,
        beta_d2: opts.beta_d2,
        theta,
        theta_mode: opts.theta_mode,
        l1: theta * opts.beta_d2 * l2,
        l2,
        l: opts.fixed_stress_l.unwrap_or(1.0 / (1.0 + lambda)),
    }
}

/// Default Korn constant `c_K² = 1/d`.
pub fn default_c_k2(d: usize) -> f64 {
    1.0 / d as f64
}

/// Left-hand side of the stabilization condition
/// `λ0/(2(c_K²+λ)) - L2/2 - L1 R λ0/(2n) ≤ 0`.
pub fn stabilization_condition(scaled: &ScaledParams, stab: &StabilizationConstants) -> f64 {
    let n = scaled.n as f64;
    scaled.lambda0 / (2.0 * (stab.c_k2 + scaled.lambda)) - stab.l2 / 2.0 - stab.l1 * scaled.r * scaled.lambda0 / (2.0 * n)
}

/// Parameter-independent bound `sqrt(max{β_s^{-2}/(c_K² + β_s^{-2}), 1/2})`.
pub fn uniform_rate_bound(beta_s2: f64, c_k2: f64) -> f64 {
    let bs_inv = 1.0 / beta_s2;
    (bs_inv / (c_k2 + bs_inv)).max(0.5).sqrt()
}

/// Parameter-dependent bound `sqrt(1/(C+1))` with
/// `C = min{λ0/(β_s^{-2}+λ), 2/θ} / L2`.
pub fn parameter_rate_bound(scaled: &ScaledParams, stab: &StabilizationConstants) -> f64 {
    let bs_inv = 1.0 / stab.beta_s2;
    let c = (scaled.lambda0 / (bs_inv + scaled.lambda)).min(2.0 / stab.theta) / stab.l2;
    (1.0 / (c + 1.0)).sqrt()
}

/// Sum of all entries of `(a I + b e e^T)^{-1}`, `n / (a + n b)`.
pub fn sherman_morrison_sum(a: f64, b: f64, n: usize) -> Result<f64> {
    if !(a > 0.0) {
        return invalid(format!("a must be positive, got {a}"));
    }
    if !(b > 0.0) {
        return invalid(format!("b must be positive, got {b}"));
    }
    if n == 0 {
        return invalid("n must be positive");
    }
    let n = n as f64;
    Ok(n / (a + n * b))
}
