//! Augmented Uzawa iteration: decoupled flux, pressure and displacement
//! solves per outer step.

use std::time::Instant;

use crate::assembly::{Augmentation, AugmentedSystem, BlockSystem, Fields};
use crate::error::Result;
use crate::linalg::axpy;

use super::{build_gs_preconditioner, GsPreconditioner, IterationReport, Monitor, Scheme, SolverConfig};

/// One outer step from `x`.
///
/// a. `(A_v + B_v^T M B_v) v = f_v + B_v^T [M (g + C p - B_u u) - p]`
/// b. `p ← p + S⁻¹ (B_v v - g - C p + B_u u)`
/// c. `A_u u = f - B_u^T p`
///
/// Step a is solved for the update of `v`, with the right-hand side formed
/// as a residual, since `M g` can be many orders larger than the result.
/// Flux and mass balance residuals are accumulated in compensated
/// arithmetic.
pub fn step(pc: &GsPreconditioner<'_>, x: &Fields) -> Result<Fields> {
    let sys = pc.augmented.system;
    let mut rv = sys.flux_residual(&x.v, &x.p);
    if pc.augmented.augmentation == Augmentation::InverseS {
        let r2 = sys.mass_balance_residual(&x.v, &x.p, &x.u);
        sys.b_v.matvec_t_add(1.0, &sys.apply_m(&r2), &mut rv);
    }
    let mut v = pc.a_aug.solve(&rv)?;
    axpy(1.0, &x.v, &mut v);

    // B_v v - g - C p + B_u u
    let r = sys.mass_balance_residual(&v, &x.p, &x.u);
    let mut p = x.p.clone();
    axpy(-1.0, &sys.apply_m(&r), &mut p);
    if sys.mean_zero {
        sys.project_mean_zero(&mut p);
    }

    let mut ru = sys.f.clone();
    sys.b_u.matvec_t_add(-1.0, &p, &mut ru);
    let u = pc.a_u.solve(&ru)?;
    Ok(Fields { v, p, u })
}

/// Iterates [`step`] until the preconditioned residual of the augmented
/// system drops by the tolerance factor. With `reference`, error norms and
/// contraction ratios are recorded for every iterate.
pub fn solve(system: &BlockSystem, config: &SolverConfig, reference: Option<&Fields>) -> Result<(Fields, IterationReport)> {
    config.validate()?;
    let aug = AugmentedSystem::new(system, config.augmentation);
    let pc = build_gs_preconditioner(&aug)?;
    let mut x = config.initial_fields(system.sizes())?;
    let mut mon = Monitor::new(&pc, reference, Scheme::Uzawa, config.verbosity);
    mon.report.timings.setup_s = pc.setup_s;
    let mut converged = mon.observe(&x, config.tolerance_factor)?;
    let mut k = 0;
    let mut solve_s = 0.0;
    while !converged && k < config.max_iter {
        let t = Instant::now();
        x = step(&pc, &x)?;
        solve_s += t.elapsed().as_secs_f64();
        k += 1;
        converged = mon.observe(&x, config.tolerance_factor)?;
    }
    mon.report.timings.solve_s = solve_s;
    Ok((x, mon.finish(k, converged)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::Augmentation;
    use crate::linalg::norm2;
    use crate::schemes::tests::small_biot;
    use crate::schemes::{monolithic, InitialGuess};

    #[test]
    fn zero_data_zero_guess_converges_at_once() {
        let mut sys = small_biot(2, 1.0, 1.0, 0.1);
        sys.f_v.iter_mut().for_each(|x| *x = 0.0);
        sys.g.iter_mut().for_each(|x| *x = 0.0);
        sys.f.iter_mut().for_each(|x| *x = 0.0);
        let cfg = SolverConfig {
            initial_guess: InitialGuess::Zero,
            ..Default::default()
        };
        let (x, rep) = solve(&sys, &cfg, None).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        assert!(x.to_vec().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exact_solution_is_fixed_point() {
        let sys = small_biot(3, 50.0, 10.0, 1e-3);
        let xs = monolithic::solve(&sys).unwrap();
        for aug in [Augmentation::InverseS, Augmentation::Zero] {
            let a = AugmentedSystem::new(&sys, aug);
            let pc = build_gs_preconditioner(&a).unwrap();
            let x1 = step(&pc, &xs).unwrap();
            let d = norm2(&x1.sub(&xs).to_vec());
            assert!(d <= 1e-11 * norm2(&xs.to_vec()), "{d}");
        }
    }

    #[test]
    fn matches_richardson() {
        let sys = small_biot(2, 5.0, 2.0, 0.1);
        let a = AugmentedSystem::new(&sys, Augmentation::InverseS);
        let pc = build_gs_preconditioner(&a).unwrap();
        let mut x = SolverConfig::default().initial_fields(sys.sizes()).unwrap();
        let mut y = x.clone();
        for _ in 0..5 {
            x = step(&pc, &x).unwrap();
            y = pc.richardson_step(&y).unwrap();
            let d = norm2(&x.sub(&y).to_vec());
            assert!(d <= 1e-12 * norm2(&x.to_vec()), "{d}");
        }
    }

    #[test]
    fn deterministic_reports() {
        let sys = small_biot(3, 10.0, 1.0, 1e-2);
        let cfg = SolverConfig::default();
        let (_, r1) = solve(&sys, &cfg, None).unwrap();
        let (_, r2) = solve(&sys, &cfg, None).unwrap();
        assert_eq!(r1.residual_history, r2.residual_history);
        assert_eq!(r1.iterations, r2.iterations);
        assert!(r1.converged);
        assert!(r1.residual_ratio() <= 1e-8);
    }
}
