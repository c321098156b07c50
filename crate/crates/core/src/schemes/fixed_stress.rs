//! Fixed-stress split: coupled flux-pressure solve with the stabilization
//! `Λ_L = L e e^T ⊗ M_p`, then an elasticity solve.

use std::time::Instant;

use nalgebra::DMatrix;

use crate::assembly::{kron_with_mass, AugmentedSystem, BlockSystem, Fields};
use crate::error::Result;
use crate::linalg::{CsrMatrix, Factorization};

use super::{build_gs_preconditioner, IterationReport, Monitor, Scheme, SolverConfig};

/// Factorized blocks of the fixed-stress iteration.
pub struct FixedStress<'a> {
    pub system: &'a BlockSystem,
    pub l: f64,
    pub lambda_l: CsrMatrix,
    pub flow: Factorization,
    pub a_u: Factorization,
}

impl<'a> FixedStress<'a> {
    pub fn new(system: &'a BlockSystem, l: f64) -> Result<Self> {
        let n = system.n;
        let ll = DMatrix::from_element(n, n, l);
        let lambda_l = kron_with_mass(&ll, &system.cell_areas);
        let multipliers = system.needs_multipliers(&(&system.lambdas.c + &ll));
        let flow = Factorization::new(&flow_matrix(system, &lambda_l, multipliers), false, "fixed-stress flow block")?;
        let a_u = Factorization::new(&system.a_u, true, "A_u")?;
        Ok(FixedStress {
            system,
            l,
            lambda_l,
            flow,
            a_u,
        })
    }

    /// Coupled solve with middle right-hand side `g - Λ_L p - B_u u`, then
    /// `A_u u = f - B_u^T p`. The coupled solve is done for the update of
    /// `(v, p)`, whose right-hand side is the current flux and mass
    /// balance residual.
    pub fn step(&self, x: &Fields) -> Result<Fields> {
        let sys = self.system;
        let s = sys.sizes();
        let mut rhs = sys.flux_residual(&x.v, &x.p);
        rhs.extend(sys.mass_balance_residual(&x.v, &x.p, &x.u));
        rhs.resize(self.flow.dim(), 0.0);
        self.flow.solve_in_place(&mut rhs)?;
        let v = crate::linalg::add(&x.v, &rhs[..s.v]);
        let mut p = crate::linalg::add(&x.p, &rhs[s.v..s.v + s.p]);
        if sys.mean_zero {
            sys.project_mean_zero(&mut p);
        }
        let mut ru = sys.f.clone();
        sys.b_u.matvec_t_add(-1.0, &p, &mut ru);
        let u = self.a_u.solve(&ru)?;
        Ok(Fields { v, p, u })
    }
}

/// `[[A_v, B_v^T], [B_v, -C - Λ_L]]`, optionally bordered by mean-value
/// multipliers.
fn flow_matrix(sys: &BlockSystem, lambda_l: &CsrMatrix, multipliers: bool) -> CsrMatrix {
    let s = sys.sizes();
    let b_vt = sys.b_v.transpose();
    let pp = sys.c_mat.add(1.0, lambda_l).scaled(-1.0);
    let k = CsrMatrix::from_blocks(
        &[vec![Some(&sys.a_v), Some(&b_vt)], vec![Some(&sys.b_v), Some(&pp)]],
        &[s.v, s.p],
        &[s.v, s.p],
    );
    if !multipliers {
        return k;
    }
    let nc = sys.n_cells;
    let dim = s.v + s.p;
    let mut t = k.triplets();
    for i in 0..sys.n {
        for c in 0..nc {
            t.push((s.v + i * nc + c, dim + i, sys.cell_areas[c]));
            t.push((dim + i, s.v + i * nc + c, sys.cell_areas[c]));
        }
    }
    CsrMatrix::from_triplets(dim + sys.n, dim + sys.n, &t)
}

/// Runs the fixed-stress iteration. `L` comes from the configuration or,
/// failing that, from the assembled stabilization constants.
pub fn solve(system: &BlockSystem, config: &SolverConfig, reference: Option<&Fields>) -> Result<(Fields, IterationReport)> {
    config.validate()?;
    let l = config.fixed_stress_l.unwrap_or(system.stab.l);
    let t = Instant::now();
    let fs = FixedStress::new(system, l)?;
    let setup_s = t.elapsed().as_secs_f64();

    let aug = AugmentedSystem::new(system, config.augmentation);
    let pc = build_gs_preconditioner(&aug)?;
    let mut x = config.initial_fields(system.sizes())?;
    let mut mon = Monitor::new(&pc, reference, Scheme::FixedStress, config.verbosity);
    mon.report.timings.setup_s = setup_s;
    let mut converged = mon.observe(&x, config.tolerance_factor)?;
    let mut k = 0;
    let mut solve_s = 0.0;
    while !converged && k < config.max_iter {
        let t = Instant::now();
        x = fs.step(&x)?;
        solve_s += t.elapsed().as_secs_f64();
        k += 1;
        converged = mon.observe(&x, config.tolerance_factor)?;
    }
    mon.report.timings.solve_s = solve_s;
    Ok((x, mon.finish(k, converged)))
}
