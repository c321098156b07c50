//! Uzawa iteration counts over a slice of the Biot parameter grid (α_p = 1e-4)
//! on a 16 x 16 mesh, with the largest measured pressure contraction.

use mpet::harness::{run_suite, ExperimentSuite, RunOptions};
use mpet::schemes::Scheme;

fn main() -> mpet::Result<()> {
    let mut suite = ExperimentSuite::biot()?;
    suite.points.retain(|p| p.label.starts_with("alpha_p=1e-4;"));
    suite.mesh_levels = vec![16];
    suite.schemes = vec![Scheme::Uzawa];
    let rows = run_suite(&suite, &RunOptions::default())?;
    println!("{:<36} {:>5} {:>10}", "point", "its", "max ratio");
    for r in rows {
        let ratio = r.max_contraction.map_or("-".to_string(), |c| format!("{c:.3}"));
        println!("{:<36} {:>5} {:>10}", r.param_point, r.iterations, ratio);
    }
    Ok(())
}
