//! `measure-fw` command-line front end.

mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::l1::l1_solve_on_grid;
use crate::measure::{DiscreteMeasure, BUDGET_RTOL};
use crate::response::{simulate_objective, InfluenceField};
use crate::scenario::{load_scenario, make_city, parse_scenario, Problem};
use crate::solver::{certify, dfw_solve, fcfw_solve, run_demand, two_point_optimum, SolverConfig};

pub use output::{content_hash, write_atomic, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_PRECONDITION: i32 = 3;
pub const EXIT_NOT_CERTIFIED: i32 = 4;

/// Worker-count override; `0` lets the pool pick.
pub const THREADS_ENV: &str = "MEASURE_FW_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "measure-fw",
    version,
    about = "Frank-Wolfe solvers for volunteer placement measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize a volunteer measure for a scenario.
    Solve(SolveArgs),
    /// Tabulate the influence function of a measure over the domain.
    InfluenceMap(MapArgs),
    /// Check a measure for optimality.
    Certify(CertifyArgs),
    /// Reference computations.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Emit a synthetic city scenario.
    MakeCity(CityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Fcfw,
    Dfw,
    L1grid,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "fcfw")]
    algo: Algo,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Frozen sample size for continuous incident laws.
    #[arg(long)]
    batch: Option<usize>,
    /// Stop once |h★| falls below this.
    #[arg(long)]
    tol: Option<f64>,
    /// JSON solver configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, default_value_t = 100)]
    resolution: usize,
    #[arg(long)]
    out: PathBuf,
    /// Seeds the frozen batch for continuous incident laws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, default_value_t = 100)]
    grid: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum OracleCommand {
    /// Closed-form optimum for two demand points.
    TwoPoint(TwoPointArgs),
    /// Poisson-process simulation of the objective.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
struct TwoPointArgs {
    #[arg(long, value_parser = parse_point, default_value = "0,0")]
    y1: Point2,
    #[arg(long, value_parser = parse_point, default_value = "1,0")]
    y2: Point2,
    #[arg(long)]
    lambda1: f64,
    #[arg(long)]
    lambda2: f64,
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CityArgs {
    #[arg(long)]
    units: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50.0)]
    budget: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_point(s: &str) -> std::result::Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v}: {e}"));
    Ok(Point2::new(num(x)?, num(y)?))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Precondition(_) | Error::BudgetMismatch(..) | Error::SingularGradient => EXIT_PRECONDITION,
        _ => EXIT_INPUT,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a, &argv),
        Command::InfluenceMap(a) => cmd_influence_map(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Oracle(OracleCommand::TwoPoint(a)) => cmd_two_point(a),
        Command::Oracle(OracleCommand::Simulate(a)) => cmd_simulate(a),
        Command::MakeCity(a) => cmd_make_city(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::input(format!("{THREADS_ENV} must be a nonnegative integer (got {raw:?})")))?;
    // a pool may already exist when commands run in-process; keep it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))
}

fn load_measure_for(path: &Path, problem: &Problem) -> Result<DiscreteMeasure> {
    let mu = DiscreteMeasure::from_json(&read_text(path)?)?;
    if (mu.budget() - problem.budget).abs() > BUDGET_RTOL * problem.budget {
        return Err(Error::BudgetMismatch(mu.budget(), problem.budget));
    }
    Ok(mu)
}

fn batch_config(seed: u64, batch: Option<usize>) -> SolverConfig {
    let mut config = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    if let Some(n) = batch {
        config.mc_batch_size = n;
    }
    config
}

fn cmd_solve(a: SolveArgs, argv: &[String]) -> Result<i32> {
    let scenario_text = read_text(&a.scenario)?;
    let problem = parse_scenario(&scenario_text)?;
    let mut config = match &a.config {
        Some(p) => serde_json::from_str(&read_text(p)?)?,
        None => SolverConfig::default(),
    };
    config.seed = a.seed;
    if let Some(n) = a.iters {
        config.max_outer_iters = n;
    }
    if let Some(n) = a.batch {
        config.mc_batch_size = n;
    }
    if let Some(t) = a.tol {
        config.fw_tolerance = t;
    }
    config.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (mu, trace) = match a.algo {
        Algo::Fcfw => fcfw_solve(&problem, &config, &mut rng)?,
        Algo::Dfw => dfw_solve(&problem, &config, &mut rng)?,
        Algo::L1grid => l1_solve_on_grid(&problem, &config)?,
    };

    fs::create_dir_all(&a.out)?;
    write_atomic(&a.out.join("measure.json"), mu.to_json().as_bytes())?;
    write_atomic(&a.out.join("trace.csv"), trace.to_csv().as_bytes())?;
    let manifest = RunManifest {
        command: "solve".into(),
        argv: argv.to_vec(),
        scenario: a.scenario.display().to_string(),
        scenario_hash: content_hash(scenario_text.as_bytes()),
        algo: format!("{:?}", a.algo).to_lowercase(),
        config,
        seed: a.seed,
        output_dir: a.out.display().to_string(),
    };
    write_atomic(&a.out.join("manifest.json"), manifest.to_json().as_bytes())?;
    if let Some(last) = trace.last() {
        println!(
            "{} iterations, J = {:.10e}, h* = {:.3e}, {} atoms",
            trace.len(),
            last.objective,
            last.h_star,
            mu.len()
        );
    }
    Ok(EXIT_OK)
}

/// CSV rows `x,y,h` at the cell centres of an `R × R` grid over the domain's
/// bounding box; `h` is blank outside the domain.
fn influence_csv(field: &InfluenceField, problem: &Problem, resolution: usize) -> String {
    use rayon::prelude::*;
    let bb = problem.domain.bounding_box();
    let r = resolution.max(1);
    let cells: Vec<Point2> = (0..r * r)
        .map(|k| {
            let (i, j) = (k % r, k / r);
            Point2::new(
                bb.min.x + (i as f64 + 0.5) * bb.width() / r as f64,
                bb.min.y + (j as f64 + 0.5) * bb.height() / r as f64,
            )
        })
        .collect();
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&x| {
            if problem.domain.contains(x) {
                format!("{:e},{:e},{:e}\n", x.x, x.y, field.value(x))
            } else {
                format!("{:e},{:e},\n", x.x, x.y)
            }
        })
        .collect();
    let mut out = String::from("x,y,h\n");
    out.extend(rows);
    out
}

fn cmd_influence_map(a: MapArgs) -> Result<i32> {
    let problem = load_scenario(&a.scenario)?;
    let mu = load_measure_for(&a.measure, &problem)?;
    if a.resolution == 0 {
        return Err(Error::input("resolution must be at least 1"));
    }
    let (demand, _) = run_demand(&problem, &batch_config(a.seed, a.batch))?;
    let field = InfluenceField::new(&mu, &demand, &problem.curve, problem.norm);
    write_atomic(&a.out, influence_csv(&field, &problem, a.resolution).as_bytes())?;
    Ok(EXIT_OK)
}

fn cmd_certify(a: CertifyArgs) -> Result<i32> {
    let problem = load_scenario(&a.scenario)?;
    let mu = load_measure_for(&a.measure, &problem)?;
    if a.tol.is_nan() || a.tol < 0.0 {
        return Err(Error::input("tolerance must be nonnegative"));
    }
    let config = batch_config(a.seed, a.batch);
    let (demand, _) = run_demand(&problem, &config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let cert = certify(&mu, &problem, &demand, a.grid.max(1), &config, &mut rng);
    let ok = cert.is_optimal(a.tol);
    println!("min_h = {:.6e}", cert.min_h);
    println!("argmin = ({:.9}, {:.9})", cert.argmin.x, cert.argmin.y);
    if ok {
        println!("OPTIMAL({})", a.tol);
        Ok(EXIT_OK)
    } else {
        println!("NOT-OPTIMAL");
        Ok(EXIT_NOT_CERTIFIED)
    }
}

fn cmd_two_point(a: TwoPointArgs) -> Result<i32> {
    let mu = two_point_optimum(a.y1, a.y2, a.lambda1, a.lambda2, a.budget)?;
    let weight_at = |y: Point2| -> f64 {
        mu.atoms()
            .iter()
            .filter(|at| at.location() == y)
            .map(|at| at.weight)
            .sum()
    };
    let out = json!({
        "alpha": [weight_at(a.y1), weight_at(a.y2)],
        "measure": mu,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(EXIT_OK)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let problem = load_scenario(&a.scenario)?;
    let mu = load_measure_for(&a.measure, &problem)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let (estimate, se) = simulate_objective(&mu, &problem.eta, &problem.curve, problem.norm, a.reps, &mut rng)?;
    let out = json!({ "estimate": estimate, "standard_error": se, "reps": a.reps, "seed": a.seed });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(EXIT_OK)
}

fn cmd_make_city(a: CityArgs) -> Result<i32> {
    let doc = make_city(a.units, a.budget, a.seed)?;
    write_atomic(&a.out, doc.to_json().as_bytes())?;
    Ok(EXIT_OK)
}
