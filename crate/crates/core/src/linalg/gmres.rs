//! Left-preconditioned GMRES. Restarts only when the true residual
//! disagrees with the least-squares estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{axpy, dot, norm2};
use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    /// Stop once `‖P⁻¹r_k‖ ≤ rtol · ‖P⁻¹r_0‖`.
    pub rtol: f64,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions { rtol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖P⁻¹r_k‖` for `k = 0..=iterations`, as minimized by GMRES; the
    /// entry closing a cycle is the recomputed true value.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// True when the Krylov space became invariant before the tolerance test.
    pub breakdown: bool,
}

/// Solves `A x = b` with left preconditioning, starting from `x0`.
///
/// Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass and
/// the least-squares problem is updated with Givens rotations.
pub fn gmres<A, P>(op: A, prec: P, b: &[f64], x0: Vec<f64>, opts: &GmresOptions) -> Result<GmresResult>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let residual = |x: &[f64]| {
        let mut r = b.to_vec();
        axpy(-1.0, &op(x), &mut r);
        r
    };
    gmres_checked(&op, residual, prec, x0, opts)
}

/// [`gmres`] with a caller supplied residual `x ↦ b - A x`.
///
/// When the rotated least-squares residual meets the tolerance, the true
/// preconditioned residual is recomputed. If it misses, GMRES restarts from
/// the current iterate. The history then holds the true value at the
/// restart. Iterations count across restarts.
pub fn gmres_checked<A, R, P>(op: A, residual: R, prec: P, x0: Vec<f64>, opts: &GmresOptions) -> Result<GmresResult>
where
    A: Fn(&[f64]) -> Vec<f64>,
    R: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut x = x0;
    let mut z = prec(&residual(&x))?;
    let beta0 = norm2(&z);
    let target = opts.rtol * beta0;
    let mut history = vec![beta0];
    let mut iterations = 0;
    let mut breakdown = false;
    let mut converged = beta0 == 0.0;
    while !converged && iterations < opts.max_iter {
        let cycle = arnoldi_cycle(&op, &prec, &mut x, z, target, opts.max_iter - iterations)?;
        iterations += cycle.iterations;
        history.extend(cycle.history);
        breakdown = cycle.breakdown;
        if cycle.iterations == 0 {
            break;
        }
        z = prec(&residual(&x))?;
        let true_norm = norm2(&z);
        *history.last_mut().unwrap() = true_norm;
        converged = true_norm <= target;
        if !cycle.reached_target && !breakdown {
            break;
        }
        if !converged && breakdown && cycle.iterations == 1 {
            break;
        }
    }
    Ok(GmresResult {
        x,
        iterations,
        residual_history: history,
        converged,
        breakdown,
    })
}

struct Cycle {
    iterations: usize,
    history: Vec<f64>,
    reached_target: bool,
    breakdown: bool,
}

/// One Arnoldi cycle from the preconditioned residual `z0`, updating `x`.
fn arnoldi_cycle<A, P>(op: &A, prec: &P, x: &mut [f64], z0: Vec<f64>, target: f64, m: usize) -> Result<Cycle>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let beta = norm2(&z0);
    let m = m.min(x.len().max(1));
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    v.push(z0.iter().map(|z| z / beta).collect());
    // h stored column-wise, column k has k + 2 entries
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut cs: Vec<f64> = Vec::with_capacity(m);
    let mut sn: Vec<f64> = Vec::with_capacity(m);
    let mut g = vec![beta];
    let mut history = Vec::new();
    let mut reached_target = false;
    let mut breakdown = false;
    let mut k = 0;
    while k < m {
        let mut w = prec(&op(&v[k]))?;
        let mut col = vec![0.0; k + 2];
        for _pass in 0..2 {
            for (j, vj) in v.iter().enumerate().take(k + 1) {
                let hij = dot(&w, vj);
                col[j] += hij;
                axpy(-hij, vj, &mut w);
            }
        }
        let hnext = norm2(&w);
        col[k + 1] = hnext;
        let tiny = hnext <= 1e-13 * norm2(&col);
        for j in 0..k {
            let t = cs[j] * col[j] + sn[j] * col[j + 1];
            col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
            col[j] = t;
        }
        let denom = col[k].hypot(col[k + 1]);
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (col[k] / denom, col[k + 1] / denom) };
        col[k] = denom;
        col[k + 1] = 0.0;
        cs.push(c);
        sn.push(s);
        g.push(-s * g[k]);
        g[k] *= c;
        h.push(col);
        k += 1;
        let res = g[k].abs();
        history.push(res);
        if res <= target {
            reached_target = true;
            break;
        }
        if tiny {
            breakdown = true;
            break;
        }
        v.push(w.iter().map(|wi| wi / hnext).collect());
    }
    // back substitution
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in (i + 1)..k {
            s -= h[j][i] * y[j];
        }
        y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
    }
    for (j, yj) in y.iter().enumerate() {
        axpy(*yj, &v[j], x);
    }
    Ok(Cycle {
        iterations: k,
        history,
        reached_target,
        breakdown,
    })
}

/// Uniform random vector in `[0, 1)` from a seeded stream.
pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// [`gmres`] started from a seeded uniform random vector.
pub fn gmres_seeded<A, P>(op: A, prec: P, b: &[f64], seed: u64, opts: &GmresOptions) -> Result<GmresResult>
where
    A: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    gmres(op, prec, b, random_vector(b.len(), seed), opts)
}
