use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mpet::assembly::elasticity_min_eigenvalue;
use mpet::harness::{self, ExperimentSuite, RunOptions, SuiteName};
use mpet::schemes::Scheme;
use mpet::{Error, Result};

#[derive(Parser)]
#[command(name = "mpet", version, about = "Iterative solvers for multiple-network poroelasticity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment suite and write a CSV table.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Uzawa,
    FixedStress,
    Gmres,
    All,
}

#[derive(clap::Args)]
struct RunArgs {
    /// biot, barenblatt, four_network or scaling
    suite: String,
    /// Single mesh size, e.g. 1/32. Defaults to the suite's levels.
    #[arg(long)]
    h: Option<String>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Time step for suites with physical parameters.
    #[arg(long)]
    tau: Option<f64>,
    /// Interior penalty parameter.
    #[arg(long, default_value_t = 10.0)]
    eta: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Add h = 1/128 to the default levels.
    #[arg(long)]
    fine: bool,
    /// Skip the direct reference solve (no contraction column).
    #[arg(long)]
    no_reference: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a matplotlib script next to the CSV.
    #[arg(long)]
    plot: bool,
    /// Write assembled blocks in Matrix Market format below this directory.
    #[arg(long)]
    export_blocks: Option<PathBuf>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn parse_h(s: &str) -> Result<usize> {
    let bad = || Error::InvalidArgument(format!("cannot read mesh size `{s}` (expected 1/N)"));
    let h = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().map_err(|_| bad())? / b.trim().parse::<f64>().map_err(|_| bad())?,
        None => s.trim().parse::<f64>().map_err(|_| bad())?,
    };
    if !(h > 0.0 && h <= 1.0) {
        return Err(bad());
    }
    let n = (1.0 / h).round() as usize;
    if ((n as f64) * h - 1.0).abs() > 1e-9 {
        return Err(bad());
    }
    Ok(n)
}

fn run(args: RunArgs) -> Result<()> {
    let name: SuiteName = args.suite.parse()?;
    let mut suite = ExperimentSuite::by_name(name)?;
    if let Some(h) = &args.h {
        suite.mesh_levels = vec![parse_h(h)?];
    } else if args.fine && name == SuiteName::Biot {
        suite.mesh_levels.push(128);
    }
    match args.scheme {
        Some(SchemeArg::Uzawa) => suite.schemes = vec![Scheme::Uzawa],
        Some(SchemeArg::FixedStress) => suite.schemes = vec![Scheme::FixedStress],
        Some(SchemeArg::Gmres) => suite.schemes = vec![Scheme::Gmres],
        Some(SchemeArg::All) => suite.schemes = Scheme::ALL.to_vec(),
        None => {}
    }
    let min_ev = elasticity_min_eigenvalue(2, args.eta, 1.0)?;
    if min_ev <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "penalty {} leaves the elasticity block indefinite (smallest eigenvalue {min_ev:e})",
            args.eta
        )));
    }
    let mut opts = RunOptions {
        seed: args.seed,
        max_iter: args.max_iter,
        tau: args.tau,
        with_reference: !args.no_reference,
        export_blocks: args.export_blocks,
        verbosity: args.verbose,
        ..Default::default()
    };
    opts.assembly.eta = args.eta;
    let out = args.out.unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    eprintln!("{name}: {} runs", suite.num_runs());
    let records = harness::run_suite(&suite, &opts)?;
    harness::write_csv_file(&records, &out)?;
    let failed = records.iter().filter(|r| !r.converged).count();
    eprintln!("wrote {} rows to {} ({failed} not converged)", records.len(), out.display());
    if args.plot {
        let script = out.with_extension("py");
        std::fs::write(&script, harness::plot_script(&out.to_string_lossy()))?;
        eprintln!("plot script: {}", script.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(args) => run(args),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_size_parsing() {
        assert_eq!(parse_h("1/32").unwrap(), 32);
        assert_eq!(parse_h("0.0625").unwrap(), 16);
        assert!(parse_h("0.3").is_err());
        assert!(parse_h("2").is_err());
        assert!(parse_h("abc").is_err());
    }
}
