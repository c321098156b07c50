//! Measured pressure-error contraction of the Uzawa scheme against the
//! parameter-dependent and uniform rate bounds.

use mpet::model::{parameter_rate_bound, uniform_rate_bound};
use mpet::prelude::*;

fn main() -> Result<()> {
    let mesh = Mesh::structured(16)?;
    println!("uniform bound {:.4}", uniform_rate_bound(0.18, 0.5));
    for lambda in [1.0, 1e2, 1e4] {
        let spec = harness::problems::biot_manufactured(ScaledParams::uniform(1, lambda, 1.0, 1e-2)?)?;
        let system = BlockSystem::assemble(&mesh, &spec, &AssemblyOptions::default())?;
        let direct = schemes::monolithic::solve(&system)?;
        let (_, report) = schemes::uzawa::solve(&system, &SolverConfig::default(), Some(&direct))?;
        let ratios: Vec<String> = report.contraction_history.iter().map(|r| format!("{r:.3}")).collect();
        println!(
            "λ = {lambda:<6e} bound {:.4}  ratios {}",
            parameter_rate_bound(&system.scaled, &system.stab),
            ratios.join(" ")
        );
    }
    Ok(())
}
