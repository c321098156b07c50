//! All three solvers on the four-network model: iterations, wall time and
//! distance to a direct solve.

use mpet::prelude::*;
use mpet::schemes::diagnostics::relative_distance;

fn main() -> Result<()> {
    let mesh = Mesh::structured(32)?;
    let system = BlockSystem::assemble(&mesh, &harness::problems::four_network(), &AssemblyOptions::default())?;
    let direct = schemes::monolithic::solve(&system)?;
    for scheme in Scheme::ALL {
        let (x, report) = schemes::solve(&system, &SolverConfig::with_scheme(scheme), None)?;
        println!(
            "{:<13} {:>3} its  setup {:.2}s  solve {:.2}s  distance {:.1e}",
            scheme.name(),
            report.iterations,
            report.timings.setup_s,
            report.timings.solve_s,
            relative_distance(&system, &x, &direct)
        );
    }
    Ok(())
}
