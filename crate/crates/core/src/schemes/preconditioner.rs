//! Block Gauss-Seidel preconditioner of the augmented system,
//!
//! ```text
//! P = [ A_v + B_v^T M B_v   0       0   ]
//!     [ -B_v                S       0   ]
//!     [ 0                   B_u^T   A_u ]
//! ```

use std::time::Instant;

use crate::assembly::{Augmentation, AugmentedSystem, Fields};
use crate::error::Result;
use crate::linalg::{CsrMatrix, Factorization};

/// Solves with `A_v + B_v^T S⁻¹ B_v` through the equivalent saddle point
/// system
///
/// ```text
/// [ A_v  B_v^T ] [ x ]   [ r ]
/// [ B_v  -S    ] [ y ] = [ 0 ]
/// ```
///
/// Forming the sum directly loses all digits on divergence free fields
/// once `R⁻¹` is small against `S⁻¹`.
pub struct FluxSolver {
    factor: Factorization,
    nv: usize,
}

impl FluxSolver {
    pub fn new(augmented: &AugmentedSystem) -> Result<Self> {
        let sys = augmented.system;
        let nv = sys.a_v.nrows;
        let factor = match augmented.augmentation {
            Augmentation::Zero => Factorization::new(&sys.a_v, true, "A_v")?,
            Augmentation::InverseS => {
                let bt = sys.b_v.transpose();
                let ms = sys.s_mat.scaled(-1.0);
                let np = sys.b_v.nrows;
                let k = CsrMatrix::from_blocks(
                    &[vec![Some(&sys.a_v), Some(&bt)], vec![Some(&sys.b_v), Some(&ms)]],
                    &[nv, np],
                    &[nv, np],
                );
                Factorization::new(&k, false, "A_v + B_v^T M B_v")?
            }
        };
        Ok(FluxSolver { factor, nv })
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut b = r.to_vec();
        b.resize(self.factor.dim(), 0.0);
        self.factor.solve_in_place(&mut b)?;
        b.truncate(self.nv);
        Ok(b)
    }
}

pub struct GsPreconditioner<'a> {
    pub augmented: &'a AugmentedSystem<'a>,
    pub a_aug: FluxSolver,
    pub a_u: Factorization,
    /// Seconds spent factorizing.
    pub setup_s: f64,
}

/// Factorizes the diagonal blocks. `S` is block diagonal per cell and is
/// inverted on the fly.
pub fn build_gs_preconditioner<'a>(augmented: &'a AugmentedSystem<'a>) -> Result<GsPreconditioner<'a>> {
    let t = Instant::now();
    let a_aug = FluxSolver::new(augmented)?;
    let a_u = Factorization::new(&augmented.system.a_u, true, "A_u")?;
    Ok(GsPreconditioner {
        augmented,
        a_aug,
        a_u,
        setup_s: t.elapsed().as_secs_f64(),
    })
}

impl<'a> GsPreconditioner<'a> {
    /// `P⁻¹ r` by forward substitution.
    pub fn apply(&self, r: &Fields) -> Result<Fields> {
        let sys = self.augmented.system;
        let v = self.a_aug.solve(&r.v)?;
        let mut rp = r.p.clone();
        sys.b_v.matvec_add(1.0, &v, &mut rp);
        let mut p = sys.apply_m(&rp);
        if sys.mean_zero {
            sys.project_mean_zero(&mut p);
        }
        let mut ru = r.u.clone();
        sys.b_u.matvec_t_add(-1.0, &p, &mut ru);
        let u = self.a_u.solve(&ru)?;
        Ok(Fields { v, p, u })
    }

    /// `P⁻¹` on a flat vector.
    pub fn apply_flat(&self, r: &[f64]) -> Result<Vec<f64>> {
        let sizes = self.augmented.system.sizes();
        Ok(self.apply(&Fields::from_slice(r, sizes))?.to_vec())
    }

    /// One preconditioned Richardson step `x + P⁻¹(b - A x)`. On gauged
    /// systems the new pressure is projected to zero mean, as in the
    /// schemes.
    pub fn richardson_step(&self, x: &Fields) -> Result<Fields> {
        let sys = self.augmented.system;
        let d = self.apply(&self.augmented.residual(x))?;
        let mut p = crate::linalg::add(&x.p, &d.p);
        if sys.mean_zero {
            sys.project_mean_zero(&mut p);
        }
        Ok(Fields {
            v: crate::linalg::add(&x.v, &d.v),
            p,
            u: crate::linalg::add(&x.u, &d.u),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{Augmentation, BlockSystem};
    use crate::linalg::norm2;
    use crate::schemes::monolithic;
    use crate::schemes::tests::small_biot;

    #[test]
    fn exact_solution_gives_zero_correction() {
        let sys = small_biot(3, 10.0, 1.0, 1e-2);
        let x = monolithic::solve(&sys).unwrap();
        let aug = AugmentedSystem::new(&sys, Augmentation::InverseS);
        let pc = build_gs_preconditioner(&aug).unwrap();
        let z = pc.apply(&aug.residual(&x)).unwrap();
        let scale = norm2(&x.to_vec());
        assert!(norm2(&z.to_vec()) <= 1e-11 * scale, "{}", norm2(&z.to_vec()));
    }

    #[test]
    fn inverts_lower_triangular_operator() {
        let sys: BlockSystem = small_biot(2, 1.0, 3.0, 0.2);
        let aug = AugmentedSystem::new(&sys, Augmentation::InverseS);
        let pc = build_gs_preconditioner(&aug).unwrap();
        let s = sys.sizes();
        let r = Fields::from_slice(&crate::linalg::gmres::random_vector(s.total(), 5), s);
        let z = pc.apply(&r).unwrap();
        // P z = r
        let pv = aug.a_aug.matvec(&z.v);
        let mut pp = sys.s_mat.matvec(&z.p);
        sys.b_v.matvec_add(-1.0, &z.v, &mut pp);
        let mut pu = sys.a_u.matvec(&z.u);
        sys.b_u.matvec_t_add(1.0, &z.p, &mut pu);
        for (a, b) in [(&pv, &r.v), (&pp, &r.p), (&pu, &r.u)] {
            let d = crate::linalg::sub(a, b);
            assert!(norm2(&d) <= 1e-11 * norm2(b), "{}", norm2(&d));
        }
    }
}
