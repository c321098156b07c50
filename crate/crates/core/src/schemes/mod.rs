//! Outer iterations for the block system and their convergence diagnostics.
//!
//! All schemes share one stopping rule: the Euclidean norm of the block
//! Gauss-Seidel preconditioned residual of the augmented system must drop by
//! [`SolverConfig::tolerance_factor`] relative to the initial guess.

pub mod diagnostics;
pub mod fixed_stress;
pub mod gmres_outer;
pub mod monolithic;
pub mod preconditioner;
pub mod uzawa;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{Augmentation, AugmentedSystem, BlockSystem, FieldSizes, Fields};
use crate::error::{invalid, Error, Result};
use crate::linalg::norm2;

pub use diagnostics::{ErrorNorms, IdentityCheck};
pub use preconditioner::{build_gs_preconditioner, GsPreconditioner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    Uzawa,
    FixedStress,
    Gmres,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Uzawa, Scheme::FixedStress, Scheme::Gmres];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uzawa => "uzawa",
            Scheme::FixedStress => "fixed-stress",
            Scheme::Gmres => "gmres",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uzawa" => Ok(Scheme::Uzawa),
            "fixed-stress" | "fixed_stress" | "fs" => Ok(Scheme::FixedStress),
            "gmres" => Ok(Scheme::Gmres),
            _ => invalid(format!("unknown scheme `{s}` (expected uzawa, fixed-stress or gmres)")),
        }
    }
}

/// Starting point of an outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// Every unknown uniform in `[0, 1)` from the configured seed.
    Random,
    Zero,
    Given(Fields),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Required reduction of the preconditioned residual.
    pub tolerance_factor: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Fixed-stress `L`; `None` uses the value computed at assembly.
    pub fixed_stress_l: Option<f64>,
    pub augmentation: Augmentation,
    pub initial_guess: InitialGuess,
    /// 0 = silent, 1 = one line per solve, 2 = one line per iteration.
    pub verbosity: u8,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tolerance_factor: 1e8,
            max_iter: 200,
            seed: 42,
            scheme: Scheme::Uzawa,
            fixed_stress_l: None,
            augmentation: Augmentation::InverseS,
            initial_guess: InitialGuess::Random,
            verbosity: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_scheme(scheme: Scheme) -> Self {
        SolverConfig {
            scheme,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance_factor > 1.0) {
            return invalid(format!("tolerance factor must exceed 1, got {}", self.tolerance_factor));
        }
        if self.max_iter == 0 {
            return invalid("max_iter must be at least 1");
        }
        if let Some(l) = self.fixed_stress_l {
            if !(l >= 0.0) || !l.is_finite() {
                return invalid(format!("fixed-stress L must be finite and nonnegative, got {l}"));
            }
        }
        Ok(())
    }

    pub fn initial_fields(&self, sizes: FieldSizes) -> Result<Fields> {
        match &self.initial_guess {
            InitialGuess::Zero => Ok(Fields::zeros(sizes)),
            InitialGuess::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let x: Vec<f64> = (0..sizes.total()).map(|_| rng.random::<f64>()).collect();
                Ok(Fields::from_slice(&x, sizes))
            }
            InitialGuess::Given(f) => {
                if f.sizes() != sizes {
                    return invalid(format!("initial guess has sizes {:?}, system has {:?}", f.sizes(), sizes));
                }
                Ok(f.clone())
            }
        }
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    /// Factorizations.
    pub setup_s: f64,
    /// Outer iterations, excluding residual monitoring.
    pub solve_s: f64,
    /// Preconditioned residual evaluation for the stopping rule.
    pub monitor_s: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.setup_s + self.solve_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub scheme: Scheme,
    pub iterations: usize,
    /// Preconditioned residual norm of the initial guess and of every iterate.
    pub residual_history: Vec<f64>,
    /// `‖e_p^{k+1}‖ / ‖e_p^k‖` in the `P_θ` norm, with a reference solution.
    pub contraction_history: Vec<f64>,
    /// Error norms of every iterate, with a reference solution.
    pub error_history: Vec<ErrorNorms>,
    /// Residuals of the flux-pressure energy identity along the iteration.
    pub identity_history: Vec<IdentityCheck>,
    pub timings: Timings,
    pub converged: bool,
}

impl IterationReport {
    pub(crate) fn new(scheme: Scheme) -> Self {
        IterationReport {
            scheme,
            iterations: 0,
            residual_history: Vec::new(),
            contraction_history: Vec::new(),
            error_history: Vec::new(),
            identity_history: Vec::new(),
            timings: Timings::default(),
            converged: false,
        }
    }

    /// Last over first preconditioned residual.
    pub fn residual_ratio(&self) -> f64 {
        match (self.residual_history.first(), self.residual_history.last()) {
            (Some(&f), Some(&l)) if f > 0.0 => l / f,
            _ => 0.0,
        }
    }

    /// Largest contraction ratio after the first iteration.
    pub fn max_contraction(&self) -> Option<f64> {
        self.contraction_history.iter().skip(1).cloned().reduce(f64::max)
    }
}

/// Pressure errors below this fraction of the reference pressure norm are
/// round-off; ratios of such errors are not recorded as contractions.
pub const CONTRACTION_FLOOR: f64 = 1e-9;

/// Multiple of [`diagnostics::pressure_rounding_level`] below which pressure
/// errors are treated as round-off.
pub const ROUNDING_FACTOR: f64 = 10.0;

/// Tracks the stopping rule and the optional reference diagnostics.
pub(crate) struct Monitor<'a> {
    pub precond: &'a GsPreconditioner<'a>,
    pub reference: Option<&'a Fields>,
    pub target: f64,
    pub report: IterationReport,
    pub verbosity: u8,
    prev_p_norm: Option<f64>,
    noise_floor: Option<f64>,
}

impl<'a> Monitor<'a> {
    pub fn new(
        precond: &'a GsPreconditioner<'a>,
        reference: Option<&'a Fields>,
        scheme: Scheme,
        verbosity: u8,
    ) -> Self {
        Monitor {
            precond,
            reference,
            target: 0.0,
            report: IterationReport::new(scheme),
            verbosity,
            prev_p_norm: None,
            noise_floor: None,
        }
    }

    fn noise_floor(&mut self, reference: &Fields) -> f64 {
        let sys = self.precond.augmented.system;
        *self.noise_floor.get_or_insert_with(|| {
            let relative = CONTRACTION_FLOOR * diagnostics::pressure_norm(sys, &reference.p);
            relative.max(ROUNDING_FACTOR * diagnostics::pressure_rounding_level(sys, reference))
        })
    }

    /// Records iterate `x`; returns true once the stopping rule holds.
    pub fn observe(&mut self, x: &Fields, tolerance_factor: f64) -> Result<bool> {
        let t = Instant::now();
        let r = self.precond.augmented.residual(x);
        let z = self.precond.apply(&r)?;
        let norm = norm2(&z.to_vec());
        if self.report.residual_history.is_empty() {
            self.target = norm / tolerance_factor;
        }
        self.report.residual_history.push(norm);
        if let Some(reference) = self.reference {
            let e = x.sub(reference);
            let norms = diagnostics::error_norms(self.precond.augmented.system, &e);
            let floor = self.noise_floor(reference);
            if let Some(prev) = self.prev_p_norm {
                if norms.p > floor && prev > floor {
                    self.report.contraction_history.push(norms.p / prev);
                }
            }
            self.prev_p_norm = Some(norms.p);
            self.report.error_history.push(norms);
            if self.report.error_history.len() > 1 {
                self.report
                    .identity_history
                    .push(diagnostics::identity_check(self.precond.augmented.system, &e));
            }
        }
        if self.verbosity >= 2 {
            eprintln!(
                "{} it {:3}  res {:.3e}",
                self.report.scheme,
                self.report.residual_history.len() - 1,
                norm
            );
        }
        self.report.timings.monitor_s += t.elapsed().as_secs_f64();
        Ok(norm <= self.target)
    }

    pub fn finish(mut self, iterations: usize, converged: bool) -> IterationReport {
        self.report.iterations = iterations;
        self.report.converged = converged;
        if self.verbosity >= 1 {
            eprintln!(
                "{}: {} iterations, converged = {}, ratio {:.2e}",
                self.report.scheme,
                iterations,
                converged,
                self.report.residual_ratio()
            );
        }
        self.report
    }
}

/// Runs the scheme selected in `config`.
pub fn solve(system: &BlockSystem, config: &SolverConfig, reference: Option<&Fields>) -> Result<(Fields, IterationReport)> {
    match config.scheme {
        Scheme::Uzawa => uzawa::solve(system, config, reference),
        Scheme::FixedStress => fixed_stress::solve(system, config, reference),
        Scheme::Gmres => {
            let aug = AugmentedSystem::new(system, config.augmentation);
            gmres_outer::solve(&aug, config, reference)
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::assembly::{AssemblyOptions, DisplacementBc, ModelParams, PressureBc, ProblemSpec, SideConditions};
    use crate::mesh::Mesh;
    use crate::model::ScaledParams;

    /// Single-network problem with smooth sources on an `n x n` mesh.
    pub fn small_biot(n: usize, lambda: f64, r_inv: f64, alpha_p: f64) -> BlockSystem {
        let mut spec = ProblemSpec::uniform(
            "biot-test",
            ModelParams::Scaled(ScaledParams::uniform(1, lambda, r_inv, alpha_p).unwrap()),
            SideConditions::new(DisplacementBc::Dirichlet([0.0, 0.0]), vec![PressureBc::Dirichlet(0.0)]),
        );
        spec.g = vec![Some(Arc::new(|x: [f64; 2]| (3.0 * x[0]).sin() + x[1]))];
        spec.f = Some(Arc::new(|x: [f64; 2]| [x[1] * x[1], 1.0 - x[0]]));
        let mesh = Mesh::structured(n).unwrap();
        BlockSystem::assemble(&mesh, &spec, &AssemblyOptions::default()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            tolerance_factor: 1.0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidArgument(_))));
        let bad = SolverConfig {
            max_iter: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("newton".parse::<Scheme>().is_err());
    }

    #[test]
    fn random_guess_in_unit_interval_and_seeded() {
        let sizes = FieldSizes { v: 10, p: 5, u: 7 };
        let a = SolverConfig::default().initial_fields(sizes).unwrap().to_vec();
        let b = SolverConfig::default().initial_fields(sizes).unwrap().to_vec();
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| (0.0..1.0).contains(&x)));
        let c = SolverConfig {
            seed: 7,
            ..Default::default()
        }
        .initial_fields(sizes)
        .unwrap()
        .to_vec();
        assert_ne!(a, c);
    }

    #[test]
    fn all_schemes_agree() {
        let sys = small_biot(4, 30.0, 1.0, 1e-2);
        let xs = monolithic::solve(&sys).unwrap();
        for s in Scheme::ALL {
            let (x, rep) = solve(&sys, &SolverConfig::with_scheme(s), Some(&xs)).unwrap();
            assert!(rep.converged, "{s}");
            assert!(diagnostics::relative_distance(&sys, &x, &xs) < 1e-5, "{s}");
        }
    }
}
