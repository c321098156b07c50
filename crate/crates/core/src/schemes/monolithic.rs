//! Direct solve of the whole saddle point system, used as reference.

use crate::assembly::{BlockSystem, Fields};
use crate::error::Result;
use crate::linalg::Factorization;

/// Sparse LU of the full system with two refinement steps, residuals in
/// compensated arithmetic. Closed
/// problems get their pressure means removed after every solve.
pub fn solve(system: &BlockSystem) -> Result<Fields> {
    let a = system.monolithic_matrix();
    let fact = Factorization::new(&a, false, "monolithic")?;
    let sizes = system.sizes();
    let mut rhs = system.rhs().to_vec();
    rhs.resize(a.nrows, 0.0);
    let gauge = |x: &mut Vec<f64>| {
        if system.mean_zero {
            system.project_mean_zero(&mut x[sizes.v..sizes.v + sizes.p]);
        }
    };
    let mut x = fact.solve(&rhs)?;
    gauge(&mut x);
    for _ in 0..2 {
        let d = fact.solve(&a.residual_compensated(&rhs, &x))?;
        crate::linalg::axpy(1.0, &d, &mut x);
        gauge(&mut x);
    }
    Ok(Fields::from_slice(&x[..sizes.total()], sizes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use crate::schemes::tests::small_biot;

    #[test]
    fn residual_small() {
        let sys = small_biot(4, 100.0, 1e-2, 1e-4);
        let x = solve(&sys).unwrap();
        let r = sys.residual(&x).to_vec();
        assert!(norm2(&r) <= 1e-12 * norm2(&sys.rhs().to_vec()));
    }
}
