//! A three-network model from physical coefficients, with pressure held on
//! the left side and no-flow elsewhere.

use mpet::prelude::*;

fn main() -> Result<()> {
    let raw = RawModelParams {
        n: 3,
        lambda_raw: 1e3,
        mu: 400.0,
        c_p: vec![1e-6, 1e-6, 1e-5],
        alpha: vec![0.5, 0.3, 0.2],
        beta: vec![vec![0.0, 1e-8, 0.0], vec![1e-8, 0.0, 1e-9], vec![0.0, 1e-9, 0.0]],
        k: vec![1e-6, 1e-8, 1e-10],
        tau: 1.0,
    };
    let scaled = rescale_preview(&raw)?;
    println!("λ = {:.3e}, R⁻¹ = {:?}, α_p = {:?}", scaled.lambda, scaled.r_inv, scaled.alpha_p);

    let closed = SideConditions::new(DisplacementBc::Traction([0.0, 0.0]), vec![PressureBc::ZeroFlux; 3]);
    let held = SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::Dirichlet(1.0); 3]);
    let spec = ProblemSpec {
        name: "custom".into(),
        params: ModelParams::Raw(raw),
        sides: [closed.clone(), closed.clone(), closed, held],
        f: None,
        g: vec![None; 3],
        g_extra: None,
    };
    let system = BlockSystem::assemble(&Mesh::structured(16)?, &spec, &AssemblyOptions::default())?;
    let (x, report) = schemes::uzawa::solve(&system, &SolverConfig::default(), None)?;
    let mean = |i: usize| x.p[i * system.n_cells..(i + 1) * system.n_cells].iter().sum::<f64>() / system.n_cells as f64;
    println!("uzawa: {} iterations; mean pressures {:.4} {:.4} {:.4}", report.iterations, mean(0), mean(1), mean(2));
    Ok(())
}

fn rescale_preview(raw: &RawModelParams) -> Result<ScaledParams> {
    mpet::model::rescale(raw)
}
