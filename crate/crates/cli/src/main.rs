//! `delassus`: compute, verify and meter Delassus matrices from the command line.
//!
//! Exit codes: 0 success, 1 verification failure, 2 bad model or arguments,
//! 3 numerical failure.

mod output;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use delassus_core::bench::{slopes, Family, SuiteSpec, DEFAULT_TAIL};
use delassus_core::metering::{count_ops, Algorithm, OpCountReport};
use delassus_core::model::generators::Base;
use delassus_core::model::random::random_configuration;
use delassus_core::{Arith, BenchError, Configuration, DelassusMatrix, DynamicsError, Error, IndexSets};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use output::Format;

#[derive(Debug)]
pub enum CliError {
    Spec(String),
    Model(Error),
    Verify(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Spec(_) => 2,
            CliError::Model(Error::Dynamics(_)) | CliError::Model(Error::Bench(BenchError::Dynamics(_))) => 3,
            CliError::Model(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Spec(m) | CliError::Verify(m) => f.write_str(m),
            CliError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Model(e)
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Model(e.into())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::BadParameters | BenchError::EmptyAlgorithms => CliError::Spec(e.to_string()),
            other => CliError::Model(other.into()),
        }
    }
}

#[derive(Parser)]
#[command(name = "delassus", version, about = "Delassus matrices of constrained kinematic trees", after_help = source::GEN_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Delassus matrix computed by one algorithm.
    Compute(ComputeArgs),
    /// Cross-check all algorithms at seeded random configurations.
    Verify(VerifyArgs),
    /// Count scalar operations per algorithm.
    Count(CountArgs),
    /// Run an operation-count scaling suite and write CSV.
    Bench(BenchArgs),
    /// Summarize a model.
    Info(InfoArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Generator spec, e.g. `chain:5:revolute`, `stem:20:2`, `fig1`.
    #[arg(long = "gen", value_name = "SPEC", conflicts_with = "model", required_unless_present = "model")]
    generator: Option<String>,
    /// JSON model file or URDF (`.urdf`).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Mount a URDF robot on a free-flyer instead of a fixed base.
    #[arg(long)]
    floating: bool,
    /// Extra constraint, e.g. `tip:weld`, `3:connect@0,0,0.1`, `@constraints.txt`.
    #[arg(long = "constrain", value_name = "SPEC")]
    constrain: Vec<String>,
}

#[derive(Args)]
struct ConfigArgs {
    /// Evaluate at a seeded random configuration instead of the neutral one.
    #[arg(long)]
    random_q: bool,
    #[arg(long, env = "DELASSUS_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ComputeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "pv-osimr", value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, value_enum, default_value_t = Format::MatrixText)]
    format: Format,
    /// Write the matrix here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of random configurations.
    #[arg(long, default_value_t = 10)]
    configs: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, env = "DELASSUS_SEED", default_value_t = 0)]
    seed: u64,
    /// Perturb one algorithm's output (for testing the checker).
    #[arg(long, hide = true, value_parser = parse_algorithm)]
    inject_fault: Option<Algorithm>,
}

#[derive(Args)]
struct CountArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algos: Vec<Algorithm>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchFamily {
    /// Floating stem with welded side branches; parameter `--stem`.
    Stem,
    /// `k²`-link chain welded every `k` links; parameter `--k`.
    ChainMd,
    /// Chain welded at every link; parameter `--n`.
    ChainAll,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    family: BenchFamily,
    /// Parameter range for chain-md: `A..B` (inclusive), `A..B:STEP` or `A,B,C`.
    #[arg(long, value_name = "RANGE")]
    k: Option<String>,
    /// Parameter range for chain-all.
    #[arg(long, value_name = "RANGE")]
    n: Option<String>,
    /// Stem-length range for stem.
    #[arg(long, value_name = "RANGE")]
    stem: Option<String>,
    /// Branches per side for stem.
    #[arg(long, default_value_t = 1)]
    branches: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
    algos: Vec<Algorithm>,
    /// Trailing points used by the slope fits.
    #[arg(long, default_value_t = DEFAULT_TAIL)]
    tail: usize,
    /// CSV destination; standard output when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    #[command(flatten)]
    model: ModelArgs,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse()
}

fn parse_range(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Spec(format!("bad range `{text}` (expected A..B, A..B:STEP or A,B,C)"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let values = if let Some((a, rest)) = text.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, s)) => (num(b)?, num(s)?),
            None => (num(rest)?, 1),
        };
        let a = num(a)?;
        if step == 0 || a > b {
            return Err(bad());
        }
        (a..=b).step_by(step).collect()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(values)
}

fn load(args: &ModelArgs) -> Result<source::Loaded, CliError> {
    let mut loaded = match (&args.generator, &args.model) {
        (Some(g), None) => {
            let (tree, cons) = source::generate(g)?;
            source::Loaded { tree, cons, warnings: Vec::new() }
        }
        (None, Some(path)) => source::load_file(path, if args.floating { Base::Floating } else { Base::Fixed })?,
        _ => return Err(CliError::Spec("give exactly one of --gen or --model".into())),
    };
    source::add_constraints(&loaded.tree, &mut loaded.cons, &args.constrain)?;
    for w in &loaded.warnings {
        eprintln!("warning: ignored URDF element {w}");
    }
    Ok(loaded)
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Spec(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn compute(args: ComputeArgs) -> Result<(), CliError> {
    let m = load(&args.model)?;
    let q = if args.config.random_q {
        random_configuration(&mut ChaCha8Rng::seed_from_u64(args.config.seed), &m.tree)
    } else {
        m.tree.neutral_configuration()
    };
    let sets = IndexSets::new(&m.tree, &m.cons);
    let l = args.algo.run(&Arith::silent(), &m.tree, &m.cons, &sets, &q)?;
    if l.matrix.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::SingularJsim.into());
    }
    emit(&output::matrix(&l, args.format), args.output.as_ref())
}

fn verify(args: VerifyArgs) -> Result<(), CliError> {
    if !(args.tol >= 0.0) {
        return Err(CliError::Spec(format!("tolerance must be non-negative, got {}", args.tol)));
    }
    if args.configs == 0 {
        return Err(CliError::Spec("--configs must be positive".into()));
    }
    let m = load(&args.model)?;
    let sets = IndexSets::new(&m.tree, &m.cons);
    let ar = Arith::silent();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst: Option<(f64, Algorithm, Algorithm, usize)> = None;
    for c in 0..args.configs {
        let q: Configuration = random_configuration(&mut rng, &m.tree);
        let results: Vec<(Algorithm, DelassusMatrix)> = Algorithm::ALL
            .iter()
            .map(|&a| {
                let mut l = a.run(&ar, &m.tree, &m.cons, &sets, &q)?;
                if args.inject_fault == Some(a) && l.dim() > 0 {
                    l.matrix[(0, 0)] += 1e-3 * l.max_abs().max(1.0);
                }
                Ok((a, l))
            })
            .collect::<Result<_, DynamicsError>>()?;
        for (i, (a, la)) in results.iter().enumerate() {
            for (b, lb) in &results[i + 1..] {
                let dev = la.relative_error(lb).max(lb.relative_error(la));
                let dev = if dev.is_nan() { f64::INFINITY } else { dev };
                if worst.is_none_or(|w| dev > w.0) {
                    worst = Some((dev, *a, *b, c));
                }
            }
        }
    }
    let (dev, a, b, c) = worst.expect("at least one configuration and pair");
    let summary = format!(
        "max pairwise relative deviation {dev:.3e} between {a} and {b} (configuration {c}) over {} configurations, m = {}",
        args.configs,
        m.cons.m()
    );
    if dev < args.tol {
        println!("ok: {summary}");
        Ok(())
    } else {
        Err(CliError::Verify(format!("verification failed: {summary} exceeds tolerance {:.3e}", args.tol)))
    }
}

fn algos_or_all(list: Vec<Algorithm>) -> Vec<Algorithm> {
    if list.is_empty() {
        Algorithm::ALL.to_vec()
    } else {
        list
    }
}

fn count(args: CountArgs) -> Result<(), CliError> {
    let m = load(&args.model)?;
    let sets = IndexSets::new(&m.tree, &m.cons);
    let q = m.tree.neutral_configuration();
    let reports: Vec<OpCountReport> = algos_or_all(args.algos)
        .into_iter()
        .map(|a| count_ops(a, &m.tree, &m.cons, &sets, &q))
        .collect::<Result<_, _>>()?;
    print!("{}", output::reports(&reports, args.format));
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let need = |opt: &Option<String>, flag: &str| {
        opt.as_deref().ok_or_else(|| CliError::Spec(format!("this family needs --{flag}"))).and_then(parse_range)
    };
    let family = match args.family {
        BenchFamily::ChainMd => Family::ChainMd { k: need(&args.k, "k")? },
        BenchFamily::ChainAll => Family::ChainAllConstrained { n: need(&args.n, "n")? },
        BenchFamily::Stem => Family::StemBranches { branches_per_side: args.branches, stem_lengths: need(&args.stem, "stem")? },
    };
    let algos = if args.algos.is_empty() { vec![Algorithm::PvOsim, Algorithm::Efpa, Algorithm::PvOsimr] } else { args.algos };
    let spec = SuiteSpec { family, algorithms: algos, output: args.output.clone() };
    let rows = spec.execute()?;
    if args.output.is_none() {
        print!("{}", delassus_core::bench::csv_string(&rows)?);
    }
    let points = spec.family.params().len();
    if points >= 2 {
        let summary: String = slopes(&rows, args.tail.max(2))?
            .into_iter()
            .map(|(a, f)| format!("slope {a}: {:.3} (r2 {:.4}, last {} points)\n", f.slope, f.r2, f.points_used))
            .collect();
        if args.output.is_some() {
            print!("{summary}");
        } else {
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn info(args: InfoArgs) -> Result<(), CliError> {
    let m = load(&args.model)?;
    print!("{}", output::info(&m.tree, &m.cons));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Compute(a) => compute(a),
        Command::Verify(a) => verify(a),
        Command::Count(a) => count(a),
        Command::Bench(a) => bench(a),
        Command::Info(a) => info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
