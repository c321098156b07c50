//! Fixed-stress iterations on the two-network Barenblatt problem as the
//! conductivities are scaled.

use mpet::prelude::*;

fn main() -> Result<()> {
    let mesh = Mesh::structured(16)?;
    for k_scale in [1e-2, 1.0, 1e2, 1e4] {
        let spec = harness::problems::barenblatt_with(harness::problems::barenblatt_scaled(k_scale, 1.0));
        let system = BlockSystem::assemble(&mesh, &spec, &AssemblyOptions::default())?;
        let (_, report) = schemes::fixed_stress::solve(&system, &SolverConfig::with_scheme(Scheme::FixedStress), None)?;
        println!(
            "K x {k_scale:<6e}  L = {:.3e}  {} iterations, residual ratio {:.1e}",
            system.stab.l,
            report.iterations,
            report.residual_ratio()
        );
    }
    Ok(())
}
