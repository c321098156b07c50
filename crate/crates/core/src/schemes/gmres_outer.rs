//! GMRES on the augmented system, left-preconditioned by the block
//! Gauss-Seidel operator.

use std::time::Instant;

use crate::assembly::{AugmentedSystem, Fields};
use crate::error::Result;
use crate::linalg::{gmres_checked, Factorization, GmresOptions};

use super::{build_gs_preconditioner, diagnostics, IterationReport, Scheme, SolverConfig};

/// Preconditioned GMRES from the configured initial guess, restarted only
/// when the true residual misses the tolerance.
/// Only the final iterate is compared with `reference`.
pub fn solve(aug: &AugmentedSystem<'_>, config: &SolverConfig, reference: Option<&Fields>) -> Result<(Fields, IterationReport)> {
    config.validate()?;
    let pc = build_gs_preconditioner(aug)?;
    run(aug, config, reference, pc.setup_s, |r| pc.apply_flat(r))
}

/// GMRES preconditioned by a direct factorization of the augmented matrix;
/// converges in one iteration up to round-off.
pub fn solve_exact_preconditioner(
    aug: &AugmentedSystem<'_>,
    config: &SolverConfig,
) -> Result<(Fields, IterationReport)> {
    config.validate()?;
    let t = Instant::now();
    let fact = Factorization::new(&aug.matrix(), false, "augmented")?;
    let setup_s = t.elapsed().as_secs_f64();
    run(aug, config, None, setup_s, |r| fact.solve(r))
}

fn run<P>(
    aug: &AugmentedSystem<'_>,
    config: &SolverConfig,
    reference: Option<&Fields>,
    setup_s: f64,
    prec: P,
) -> Result<(Fields, IterationReport)>
where
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let sys = aug.system;
    let sizes = sys.sizes();
    let x0 = config.initial_fields(sizes)?.to_vec();
    let opts = GmresOptions {
        rtol: 1.0 / config.tolerance_factor,
        max_iter: config.max_iter,
    };
    let t = Instant::now();
    let res = gmres_checked(
        |x| aug.apply(&Fields::from_slice(x, sizes)).to_vec(),
        |x| aug.residual(&Fields::from_slice(x, sizes)).to_vec(),
        prec,
        x0,
        &opts,
    )?;
    let solve_s = t.elapsed().as_secs_f64();
    let mut x = Fields::from_slice(&res.x, sizes);
    if sys.mean_zero {
        sys.project_mean_zero(&mut x.p);
    }
    let mut report = IterationReport::new(Scheme::Gmres);
    report.iterations = res.iterations;
    report.residual_history = res.residual_history;
    report.converged = res.converged;
    report.timings.setup_s = setup_s;
    report.timings.solve_s = solve_s;
    if let Some(r) = reference {
        report.error_history.push(diagnostics::error_norms(sys, &x.sub(r)));
    }
    if config.verbosity >= 1 {
        eprintln!(
            "gmres: {} iterations, converged = {}, ratio {:.2e}",
            report.iterations,
            report.converged,
            report.residual_ratio()
        );
    }
    Ok((x, report))
}
