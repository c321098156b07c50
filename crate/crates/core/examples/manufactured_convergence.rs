//! Flux and pressure L² errors of the direct solve against a polynomial
//! exact solution.

use mpet::harness::problems::{flux_l2_error, pressure_l2_error, PolynomialSolution};
use mpet::prelude::*;

fn main() -> Result<()> {
    let exact = PolynomialSolution {
        lambda: 10.0,
        r_inv: 1.0,
        alpha_p: 1.0,
    };
    let spec = exact.spec()?;
    let mut prev: Option<(f64, f64)> = None;
    println!("{:>4} {:>11} {:>6} {:>11} {:>6}", "N", "flux", "order", "pressure", "order");
    for n in [4, 8, 16, 32, 64] {
        let mesh = Mesh::structured(n)?;
        let system = BlockSystem::assemble(&mesh, &spec, &AssemblyOptions::default())?;
        let x = schemes::monolithic::solve(&system)?;
        let ev = flux_l2_error(&mesh, &system.expand_v(&x.v, 0), |p| exact.flux(p));
        let ep = pressure_l2_error(&mesh, &x.p, |p| exact.pressure(p));
        let (ov, op) = prev.map_or((f64::NAN, f64::NAN), |(a, b)| ((a / ev).log2(), (b / ep).log2()));
        println!("{n:>4} {ev:>11.3e} {ov:>6.2} {ep:>11.3e} {op:>6.2}");
        prev = Some((ev, ep));
    }
    Ok(())
}
