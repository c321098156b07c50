//! Writes the assembled blocks of a small scaling problem in Matrix Market
//! format. Usage: `export_blocks [dir]`.

use mpet::prelude::*;

fn main() -> Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "blocks".to_string());
    let mesh = Mesh::structured(8)?;
    let system = BlockSystem::assemble(&mesh, &harness::problems::scaling(2)?, &AssemblyOptions::default())?;
    system.export_matrix_market(&dir)?;
    let s = system.sizes();
    println!("wrote blocks to {dir}/ (flux {}, pressure {}, displacement {})", s.v, s.p, s.u);
    Ok(())
}
