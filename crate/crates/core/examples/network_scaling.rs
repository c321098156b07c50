//! Iteration counts of the augmented Uzawa scheme and preconditioned GMRES
//! for 1, 2, 4 and 8 uncoupled networks on a 32 x 32 mesh.

use mpet::prelude::*;

fn main() -> Result<()> {
    let mesh = Mesh::structured(32)?;
    println!("{:>3} {:>8} {:>6}  residual history", "n", "scheme", "its");
    for n in [1, 2, 4, 8] {
        let spec = harness::problems::scaling(n)?;
        let system = BlockSystem::assemble(&mesh, &spec, &AssemblyOptions::default())?;
        for scheme in [Scheme::Uzawa, Scheme::Gmres] {
            let (_, report) = schemes::solve(&system, &SolverConfig::with_scheme(scheme), None)?;
            let hist: Vec<String> = report
                .residual_history
                .iter()
                .map(|r| format!("{:.2e}", r / report.residual_history[0]))
                .collect();
            println!("{n:>3} {:>8} {:>6}  {}", scheme.name(), report.iterations, hist.join(" "));
        }
    }
    Ok(())
}
