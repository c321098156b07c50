//! Finite element discretization and iterative solvers for quasi-static
//! Biot and multiple-network poroelasticity (MPET) in flux-pressure-displacement
//! form.
//!
//! The discrete problem lives on a structured triangulation of the unit square:
//! lowest-order Raviart-Thomas fluxes, piecewise-constant pressures and a
//! Brezzi-Douglas-Marini displacement with a symmetric interior-penalty DG
//! elasticity form. The resulting double saddle point system is solved by
//!
//! * the fully decoupled augmented Uzawa iteration ([`schemes::uzawa`]),
//! * the fixed-stress split iteration ([`schemes::fixed_stress`]),
//! * GMRES preconditioned by the block Gauss-Seidel operator
//!   ([`schemes::gmres_outer`]).
//!
//! [`harness`] wires these into parameter sweeps that write CSV tables.
//!
//! ```no_run
//! use mpet::prelude::*;
//!
//! let mesh = Mesh::structured(32).unwrap();
//! let spec = harness::problems::scaling(4).unwrap();
//! let system = BlockSystem::assemble(&mesh, &spec, &AssemblyOptions::default()).unwrap();
//! let (solution, report) = schemes::uzawa::solve(&system, &SolverConfig::default(), None).unwrap();
//! println!("{} iterations, converged = {}", report.iterations, report.converged);
//! # let _ = solution;
//! ```

pub mod assembly;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod schemes;
pub mod spaces;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::assembly::{
        AssemblyOptions, AugmentedSystem, BlockSystem, DisplacementBc, ModelParams, PressureBc,
        ProblemSpec, SideConditions,
    };
    pub use crate::harness;
    pub use crate::mesh::{BoundarySide, Mesh};
    pub use crate::model::{RawModelParams, ScaledParams, StabilizationConstants};
    pub use crate::schemes::{self, IterationReport, Scheme, SolverConfig};
    pub use crate::{Error, Result};
}
