//! Command line driver for the study harness: runs stability, convergence,
//! noise, nodal, and norm-check studies and writes their CSV results.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wellposed::error::Result;
use wellposed::geometry::Domain;
use wellposed::harness::{
    grid_size_for_fill_distance, run_convergence_study, run_mlpg_norm_check, run_nodal_study,
    run_noise_study, run_stability_study, ConvergenceConfig, NodeRule, NoiseConfig, StudyResult,
};
use wellposed::kernels::RadialKernel;
use wellposed::problems::{manufactured_solution, ProblemKind, ProblemSpec};
use wellposed::solvers::SolverKind;

#[derive(Parser)]
#[command(name = "wellposed", version, about = "Stability and convergence studies for well-posed recovery problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Chebyshev,
    Lsq,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> SolverKind {
        match s {
            SolverArg::Chebyshev => SolverKind::Chebyshev,
            SolverArg::Lsq => SolverKind::LeastSquares,
        }
    }
}

/// Flags shared by every study subcommand. Each study reads the subset it
/// needs and ignores the rest, so scripts can pass one flag block around.
#[derive(Args, Clone)]
struct StudyArgs {
    /// Recovery problem: interp, interp-weak, poisson, poisson-weak, mlpg5
    #[arg(long, default_value = "poisson")]
    problem: String,

    /// Manufactured solution registry name
    #[arg(long, default_value = "sin_sin_plus_x")]
    solution: String,

    /// Kernel family: matern, gaussian, multiquadric
    #[arg(long, default_value = "matern")]
    kernel: String,

    /// Kernel smoothness exponent (Matérn only)
    #[arg(long, default_value_t = 4.5)]
    smoothness: f64,

    /// Kernel shape (length-scale) parameter
    #[arg(long, default_value_t = 0.5)]
    shape: f64,

    /// Node counts for the stability study, comma separated
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    degrees: Vec<usize>,

    /// Node placement rules for the stability study, comma separated
    #[arg(long, value_delimiter = ',')]
    rules: Option<Vec<String>>,

    /// Target fill distances of the trial-space family, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.177,0.125,0.088")]
    fill_distances: Vec<f64>,

    /// Stability factor the greedy stabilizer must reach
    #[arg(long, default_value_t = 2.0)]
    target: f64,

    /// Refinement level of the functional pool
    #[arg(long, default_value_t = 5)]
    pool_density: u32,

    /// Refinement level of the reference functional set
    #[arg(long, default_value_t = 5)]
    reference_density: u32,

    /// Residual minimizer
    #[arg(long, value_enum, default_value_t = SolverArg::Chebyshev)]
    solver: SolverArg,

    /// Residual-minimizer quality cap checked by the noise study
    #[arg(long, default_value_t = 1.5)]
    ca: f64,

    /// RNG seed; studies are deterministic given the seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Noise levels for the noise study, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0,1e-4,1e-2")]
    eps: Vec<f64>,

    /// Repetitions per noise level
    #[arg(long, default_value_t = 20)]
    repetitions: usize,

    /// Random fields for the norm check
    #[arg(long, default_value_t = 20)]
    fields: usize,

    /// Ball radii for the norm check, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
    radii: Vec<f64>,

    /// Output CSV path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stability constants of 1D polynomial interpolation per node rule
    StabilityStudy(StudyArgs),
    /// Convergence rates over a kernel trial-space family
    Converge(StudyArgs),
    /// Noise-level sweep checking the recovery error bound
    Noise(StudyArgs),
    /// Nodal-basis error tracking over the family
    Nodal(StudyArgs),
    /// Ball-average sup versus sup norm for random smooth fields
    MlpgNormCheck(StudyArgs),
}

fn build_kernel(args: &StudyArgs) -> Result<RadialKernel> {
    match args.kernel.as_str() {
        "matern" | "whittle-matern" => {
            RadialKernel::whittle_matern(args.smoothness, args.shape, 2)
        }
        "gaussian" => RadialKernel::gaussian(args.shape, 2),
        "multiquadric" | "mq" => RadialKernel::multiquadric(args.shape, 2),
        other => Err(wellposed::error::Error::InvalidParameter(format!(
            "unknown kernel '{other}'"
        ))),
    }
}

fn build_convergence_config(args: &StudyArgs) -> Result<ConvergenceConfig> {
    let kind = ProblemKind::parse(&args.problem)?;
    let solution = manufactured_solution(&args.solution)?;
    let grid_sizes = args
        .fill_distances
        .iter()
        .map(|&h| grid_size_for_fill_distance(h))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceConfig {
        problem: ProblemSpec::new(kind, Domain::UnitSquare, solution),
        kernel: build_kernel(args)?,
        grid_sizes,
        target: args.target,
        pool_level: args.pool_density,
        reference_level: args.reference_density,
        solver: args.solver.into(),
        nodal: false,
        seed: args.seed,
    })
}

fn emit(result: &StudyResult, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => result.write_csv(path),
        None => {
            print!("{}", result.to_csv_string());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::StabilityStudy(args) => {
            let rules = match &args.rules {
                Some(names) => names
                    .iter()
                    .map(|s| NodeRule::parse(s))
                    .collect::<Result<Vec<_>>>()?,
                None => NodeRule::all().to_vec(),
            };
            let result = run_stability_study(&args.degrees, &rules, args.seed)?;
            emit(&result, &args.out)
        }
        Command::Converge(args) => {
            let cfg = build_convergence_config(&args)?;
            let result = run_convergence_study(&cfg)?;
            emit(&result, &args.out)
        }
        Command::Noise(args) => {
            let mut base = build_convergence_config(&args)?;
            // the noise study works on the coarsest family member
            let grid_size = base.grid_sizes.first().copied().unwrap_or(3);
            base.grid_sizes = vec![];
            let cfg = NoiseConfig {
                base,
                grid_size,
                eps: args.eps.clone(),
                repetitions: args.repetitions,
                ca_cap: args.ca,
            };
            let result = run_noise_study(&cfg)?;
            emit(&result, &args.out)
        }
        Command::Nodal(args) => {
            let cfg = build_convergence_config(&args)?;
            let result = run_nodal_study(&cfg)?;
            emit(&result, &args.out)
        }
        Command::MlpgNormCheck(args) => {
            let result = run_mlpg_norm_check(args.fields, &args.radii, args.seed)?;
            emit(&result, &args.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
