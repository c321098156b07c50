//! The Uzawa sweep and one Richardson step with the block Gauss-Seidel
//! preconditioner of the augmented system produce the same iterates.

use mpet::assembly::Augmentation;
use mpet::linalg::norm2;
use mpet::prelude::*;
use mpet::schemes::{build_gs_preconditioner, uzawa};

fn main() -> Result<()> {
    let spec = harness::problems::biot_manufactured(ScaledParams::uniform(1, 10.0, 1.0, 0.1)?)?;
    let system = BlockSystem::assemble(&Mesh::structured(4)?, &spec, &AssemblyOptions::default())?;
    let aug = AugmentedSystem::new(&system, Augmentation::InverseS);
    let pc = build_gs_preconditioner(&aug)?;
    let mut a = SolverConfig::default().initial_fields(system.sizes())?;
    let mut b = a.clone();
    for k in 1..=6 {
        a = uzawa::step(&pc, &a)?;
        b = pc.richardson_step(&b)?;
        let d = norm2(&a.sub(&b).to_vec()) / norm2(&b.to_vec());
        println!("iterate {k}: relative difference {d:.1e}");
    }
    Ok(())
}
