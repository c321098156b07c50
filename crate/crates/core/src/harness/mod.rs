//! Experiment suites: parameter grids, sweep execution and CSV output.

pub mod problems;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{AssemblyOptions, BlockSystem, Fields, ModelParams, ProblemSpec};
use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;
use crate::model::ScaledParams;
use crate::schemes::{self, monolithic, IterationReport, Scheme, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    Biot,
    Barenblatt,
    FourNetwork,
    Scaling,
}

impl SuiteName {
    pub const ALL: [SuiteName; 4] = [SuiteName::Biot, SuiteName::Barenblatt, SuiteName::FourNetwork, SuiteName::Scaling];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteName::Biot => "biot",
            SuiteName::Barenblatt => "barenblatt",
            SuiteName::FourNetwork => "four_network",
            SuiteName::Scaling => "scaling",
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "biot" => Ok(SuiteName::Biot),
            "barenblatt" => Ok(SuiteName::Barenblatt),
            "four_network" | "four-network" => Ok(SuiteName::FourNetwork),
            "scaling" => Ok(SuiteName::Scaling),
            _ => invalid(format!("unknown suite `{s}` (expected biot, barenblatt, four_network or scaling)")),
        }
    }
}

/// Parameter values shared by the Biot sweep.
pub const BIOT_ALPHA_P: [f64; 5] = [1e-8, 1e-6, 1e-4, 1e-2, 1.0];
pub const BIOT_LAMBDA: [f64; 4] = [1.0, 1e2, 1e4, 1e6];
pub const BIOT_R_INV: [f64; 5] = [1e-8, 1e-4, 1.0, 1e4, 1e8];
/// Conductivity multipliers of the Barenblatt and four-network sweeps.
pub const K_SCALES: [f64; 5] = [1e-2, 1.0, 1e2, 1e4, 1e10];
pub const BARENBLATT_LAMBDA_SCALES: [f64; 3] = [1e-2, 1.0, 1e2];
pub const FOUR_NETWORK_K_SCALES: [f64; 3] = [1e-2, 1.0, 1e2];
pub const FOUR_NETWORK_LAMBDA_SCALES: [f64; 3] = [1.0, 1e3, 1e6];
pub const DEFAULT_LEVELS: [usize; 3] = [16, 32, 64];

/// One parameter combination of a suite.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub label: String,
    pub spec: ProblemSpec,
}

#[derive(Debug, Clone)]
pub struct ExperimentSuite {
    pub name: SuiteName,
    pub points: Vec<GridPoint>,
    /// Mesh subdivisions `N`, `h = 1/N`.
    pub mesh_levels: Vec<usize>,
    pub schemes: Vec<Scheme>,
}

impl ExperimentSuite {
    /// `α_p × λ × R^{-1}` grid of the single-network test.
    pub fn biot() -> Result<Self> {
        let mut points = Vec::new();
        for &alpha_p in &BIOT_ALPHA_P {
            for &lambda in &BIOT_LAMBDA {
                for &r_inv in &BIOT_R_INV {
                    let spec = problems::biot_manufactured(ScaledParams::uniform(1, lambda, r_inv, alpha_p)?)?;
                    points.push(GridPoint {
                        label: format!("alpha_p={alpha_p:e};lambda={lambda:e};r_inv={r_inv:e}"),
                        spec,
                    });
                }
            }
        }
        Ok(ExperimentSuite {
            name: SuiteName::Biot,
            points,
            mesh_levels: DEFAULT_LEVELS.to_vec(),
            schemes: vec![Scheme::Uzawa, Scheme::Gmres],
        })
    }

    /// Joint `K1, K2` scaling against `λ̂` scaling.
    pub fn barenblatt() -> Result<Self> {
        let mut points = Vec::new();
        for &ls in &BARENBLATT_LAMBDA_SCALES {
            for &ks in &K_SCALES {
                points.push(GridPoint {
                    label: format!("k_scale={ks:e};lambda_scale={ls:e}"),
                    spec: problems::barenblatt_with(problems::barenblatt_scaled(ks, ls)),
                });
            }
        }
        Ok(ExperimentSuite {
            name: SuiteName::Barenblatt,
            points,
            mesh_levels: DEFAULT_LEVELS.to_vec(),
            schemes: Scheme::ALL.to_vec(),
        })
    }

    /// `K3` scaling against `K` and `λ` scalings.
    pub fn four_network() -> Result<Self> {
        let mut points = Vec::new();
        for &ls in &FOUR_NETWORK_LAMBDA_SCALES {
            for &ks in &FOUR_NETWORK_K_SCALES {
                for &k3 in &K_SCALES {
                    points.push(GridPoint {
                        label: format!("k3_scale={k3:e};k_scale={ks:e};lambda_scale={ls:e}"),
                        spec: problems::four_network_with(problems::four_network_scaled(k3, ks, ls)),
                    });
                }
            }
        }
        Ok(ExperimentSuite {
            name: SuiteName::FourNetwork,
            points,
            mesh_levels: DEFAULT_LEVELS.to_vec(),
            schemes: Scheme::ALL.to_vec(),
        })
    }

    /// `n = 1, 2, 4, 8` uncoupled networks at `h = 1/32`.
    pub fn scaling() -> Result<Self> {
        let points = [1, 2, 4, 8]
            .iter()
            .map(|&n| {
                Ok(GridPoint {
                    label: format!("n={n}"),
                    spec: problems::scaling(n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ExperimentSuite {
            name: SuiteName::Scaling,
            points,
            mesh_levels: vec![32],
            schemes: vec![Scheme::Uzawa, Scheme::Gmres],
        })
    }

    pub fn by_name(name: SuiteName) -> Result<Self> {
        match name {
            SuiteName::Biot => Self::biot(),
            SuiteName::Barenblatt => Self::barenblatt(),
            SuiteName::FourNetwork => Self::four_network(),
            SuiteName::Scaling => Self::scaling(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return invalid(format!("suite {} has an empty grid", self.name));
        }
        if self.mesh_levels.is_empty() || self.mesh_levels.contains(&0) {
            return invalid(format!("suite {} needs positive mesh levels", self.name));
        }
        if self.schemes.is_empty() {
            return invalid(format!("suite {} runs no scheme", self.name));
        }
        Ok(())
    }

    pub fn num_runs(&self) -> usize {
        self.points.len() * self.mesh_levels.len() * self.schemes.len()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub max_iter: usize,
    pub tolerance_factor: f64,
    pub assembly: AssemblyOptions,
    /// Time step override for suites with physical parameters.
    pub tau: Option<f64>,
    /// Solve each system directly as well, for contraction ratios.
    pub with_reference: bool,
    /// Write the assembled blocks of every (point, mesh) pair here.
    pub export_blocks: Option<PathBuf>,
    pub verbosity: u8,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            seed: 42,
            max_iter: 200,
            tolerance_factor: 1e8,
            assembly: AssemblyOptions::default(),
            tau: None,
            with_reference: true,
            export_blocks: None,
            verbosity: 0,
        }
    }
}

impl RunOptions {
    pub fn solver_config(&self, scheme: Scheme) -> SolverConfig {
        SolverConfig {
            scheme,
            seed: self.seed,
            max_iter: self.max_iter,
            tolerance_factor: self.tolerance_factor,
            verbosity: self.verbosity,
            ..Default::default()
        }
    }

    fn apply_tau(&self, spec: &ProblemSpec) -> ProblemSpec {
        let mut spec = spec.clone();
        if let (Some(tau), ModelParams::Raw(p)) = (self.tau, &mut spec.params) {
            p.tau = tau;
        }
        spec
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub suite: String,
    pub scheme: String,
    pub n: usize,
    pub h: f64,
    pub lambda: f64,
    pub param_point: String,
    pub iterations: usize,
    pub converged: bool,
    pub residual_ratio: f64,
    pub max_contraction: Option<f64>,
    pub elapsed_s: f64,
}

pub struct SchemeRun {
    pub scheme: Scheme,
    pub result: Result<(Fields, IterationReport)>,
}

/// Everything computed for one (grid point, mesh) pair.
pub struct PointOutcome {
    pub system: BlockSystem,
    pub reference: Option<Fields>,
    pub runs: Vec<SchemeRun>,
}

/// Assembles `spec` on an `n_mesh` grid and runs `schemes` on it.
pub fn run_point(spec: &ProblemSpec, n_mesh: usize, schemes: &[Scheme], opts: &RunOptions) -> Result<PointOutcome> {
    let mesh = Mesh::structured(n_mesh)?;
    let spec = opts.apply_tau(spec);
    let system = BlockSystem::assemble(&mesh, &spec, &opts.assembly)?;
    let reference = if opts.with_reference {
        Some(monolithic::solve(&system)?)
    } else {
        None
    };
    let runs = schemes
        .iter()
        .map(|&scheme| SchemeRun {
            scheme,
            result: schemes::solve(&system, &opts.solver_config(scheme), reference.as_ref()),
        })
        .collect();
    Ok(PointOutcome {
        system,
        reference,
        runs,
    })
}

fn failed_record(suite: SuiteName, scheme: Scheme, n: usize, n_mesh: usize, label: &str) -> RunRecord {
    RunRecord {
        suite: suite.to_string(),
        scheme: scheme.to_string(),
        n,
        h: 1.0 / n_mesh as f64,
        lambda: f64::NAN,
        param_point: label.to_string(),
        iterations: 0,
        converged: false,
        residual_ratio: f64::NAN,
        max_contraction: None,
        elapsed_s: 0.0,
    }
}

fn run_job(suite: &ExperimentSuite, point: &GridPoint, n_mesh: usize, opts: &RunOptions) -> Vec<RunRecord> {
    let n = point.spec.params.n();
    let t = Instant::now();
    let outcome = match run_point(&point.spec, n_mesh, &suite.schemes, opts) {
        Ok(o) => o,
        Err(e) => {
            if opts.verbosity >= 1 {
                eprintln!("{} {} N={n_mesh}: {e}", suite.name, point.label);
            }
            return suite
                .schemes
                .iter()
                .map(|&s| failed_record(suite.name, s, n, n_mesh, &point.label))
                .collect();
        }
    };
    if let Some(dir) = &opts.export_blocks {
        let sub = dir.join(format!("{}_{}_N{n_mesh}", suite.name, point.label.replace([';', '='], "_")));
        if let Err(e) = outcome.system.export_matrix_market(&sub) {
            eprintln!("export to {}: {e}", sub.display());
        }
    }
    if opts.verbosity >= 1 {
        eprintln!("{} {} N={n_mesh} done in {:.2}s", suite.name, point.label, t.elapsed().as_secs_f64());
    }
    outcome
        .runs
        .into_iter()
        .map(|run| match run.result {
            Ok((_, rep)) => RunRecord {
                suite: suite.name.to_string(),
                scheme: run.scheme.to_string(),
                n,
                h: 1.0 / n_mesh as f64,
                lambda: outcome.system.scaled.lambda,
                param_point: point.label.clone(),
                iterations: rep.iterations,
                converged: rep.converged,
                residual_ratio: rep.residual_ratio(),
                max_contraction: rep.max_contraction(),
                elapsed_s: rep.timings.total(),
            },
            Err(e) => {
                if opts.verbosity >= 1 {
                    eprintln!("{} {} N={n_mesh} {}: {e}", suite.name, point.label, run.scheme);
                }
                let mut r = failed_record(suite.name, run.scheme, n, n_mesh, &point.label);
                r.lambda = outcome.system.scaled.lambda;
                r
            }
        })
        .collect()
}

/// Runs every (point, mesh level, scheme) combination. Grid points are
/// processed in parallel; rows come back in grid order. Failed runs are
/// recorded with `converged = false`.
pub fn run_suite(suite: &ExperimentSuite, opts: &RunOptions) -> Result<Vec<RunRecord>> {
    suite.validate()?;
    if opts.max_iter == 0 || !(opts.tolerance_factor > 1.0) {
        return invalid("max_iter must be positive and the tolerance factor above 1");
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let jobs: Vec<(&GridPoint, usize)> = suite
        .mesh_levels
        .iter()
        .flat_map(|&n| suite.points.iter().map(move |p| (p, n)))
        .collect();
    let rows: Vec<Vec<RunRecord>> = jobs.par_iter().map(|&(p, n)| run_job(suite, p, n, opts)).collect();
    Ok(rows.into_iter().flatten().collect())
}

pub const CSV_HEADER: [&str; 11] = [
    "suite",
    "scheme",
    "n",
    "h",
    "lambda",
    "param_point",
    "iterations",
    "converged",
    "residual_ratio",
    "max_contraction",
    "elapsed_s",
];

pub fn write_csv<W: Write>(records: &[RunRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    if records.is_empty() {
        wr.write_record(CSV_HEADER)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    write_csv(records, std::io::BufWriter::new(f))
}

/// Standalone matplotlib script plotting iterations per grid point.
pub fn plot_script(csv_path: &str) -> String {
    format!(
        r#"import csv
import collections
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open({csv_path:?})))
series = collections.defaultdict(list)
for r in rows:
    series[(r["scheme"], r["h"])].append(int(r["iterations"]))
fig, ax = plt.subplots(figsize=(10, 4))
markers = {{"uzawa": "x", "gmres": ".", "fixed-stress": "o"}}
for (scheme, h), its in sorted(series.items()):
    ax.plot(range(len(its)), its, marker=markers.get(scheme, "s"), label=f"{{scheme}}, h={{float(h):.4g}}")
ax.set_xlabel("parameter point")
ax.set_ylabel("iterations")
ax.legend()
fig.tight_layout()
fig.savefig({png:?})
"#,
        png = format!("{}.png", csv_path.trim_end_matches(".csv"))
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(ExperimentSuite::biot().unwrap().points.len(), 100);
        assert_eq!(ExperimentSuite::barenblatt().unwrap().points.len(), 15);
        assert_eq!(ExperimentSuite::four_network().unwrap().points.len(), 45);
        let s = ExperimentSuite::scaling().unwrap();
        assert_eq!(s.points.len(), 4);
        assert_eq!(s.num_runs() / s.schemes.len(), 4);
        let b = ExperimentSuite::biot().unwrap();
        assert_eq!(b.num_runs() / b.schemes.len(), 300);
    }

    #[test]
    fn suite_names_parse() {
        for s in SuiteName::ALL {
            assert_eq!(s.as_str().parse::<SuiteName>().unwrap(), s);
        }
        assert!("terzaghi".parse::<SuiteName>().is_err());
    }

    #[test]
    fn empty_grid_rejected() {
        let mut s = ExperimentSuite::scaling().unwrap();
        s.points.clear();
        assert!(run_suite(&s, &RunOptions::default()).is_err());
    }

    #[test]
    fn small_sweep_rows_and_determinism() {
        let mut s = ExperimentSuite::scaling().unwrap();
        s.mesh_levels = vec![4];
        s.points.truncate(2);
        let opts = RunOptions {
            with_reference: false,
            ..Default::default()
        };
        let a = run_suite(&s, &opts).unwrap();
        let b = run_suite(&s, &opts).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.iterations, x.residual_ratio, &x.param_point), (y.iterations, y.residual_ratio, &y.param_point));
            assert!(x.converged);
        }
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn plot_script_mentions_csv() {
        let s = plot_script("out/biot.csv");
        assert!(s.contains("\"out/biot.csv\"") && s.contains("out/biot.png"));
    }
}
