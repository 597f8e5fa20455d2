//! `invclass`: inverse classification from the command line.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use invclass::bench::{self, BenchConfig, SuiteSpec};
use invclass::io::{load_instance, load_instance_dir, load_model_path, write_vector};
use invclass::objective::eval_objective;
use invclass::solver::{fmt17, write_trace_csv};
use invclass::{
    solve_baseline, solve_logistic, solve_path, BaselineConfig, Error, LineSearch, Method, PathConfig, Problem,
    SoftmaxModel, SolverConfig, SolverResult,
};

#[derive(Parser)]
#[command(name = "invclass", version, about = "Closest input assigned to a target class by a linear softmax model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one problem and write the solution vector.
    Solve(SolveArgs),
    /// Solve over a log-spaced grid of lambda values.
    Path(PathArgs),
    /// Run every method on a synthetic problem suite.
    Bench(BenchArgs),
    /// Run every method on one problem and print E_k - E* side by side.
    Compare(CompareArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// Model file: JSON, or the weights file of a CSV pair.
    #[arg(long)]
    model: PathBuf,
    /// Biases file for CSV models.
    #[arg(long)]
    biases: Option<PathBuf>,
    /// Source instance: one CSV line or a JSON array.
    #[arg(long)]
    instance: PathBuf,
    /// Target class, 0-based.
    #[arg(long)]
    target_class: usize,
}

#[derive(Args)]
struct StopArgs {
    /// Stop when the gradient norm falls below this.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 1000)]
    max_iter: usize,
    /// Write 0 in every timing column so output is byte-stable.
    #[arg(long)]
    zero_times: bool,
}

impl StopArgs {
    fn solver(&self, line_search: LineSearch) -> SolverConfig {
        SolverConfig { grad_tol: self.tol, max_iter: self.max_iter, line_search, ..SolverConfig::default() }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverChoice {
    Newton,
    Gd,
    Cg,
    Lbfgs,
    Bfgs,
    ClosedForm,
}

impl SolverChoice {
    fn method(self) -> Option<Method> {
        match self {
            Self::Newton => Some(Method::Newton),
            Self::Gd => Some(Method::Gd),
            Self::Cg => Some(Method::Cg),
            Self::Lbfgs => Some(Method::Lbfgs),
            Self::Bfgs => Some(Method::Bfgs),
            Self::ClosedForm => None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LsChoice {
    Backtracking,
    Wolfe,
    Constant,
}

impl From<LsChoice> for LineSearch {
    fn from(c: LsChoice) -> Self {
        match c {
            LsChoice::Backtracking => LineSearch::Backtracking,
            LsChoice::Wolfe => LineSearch::Wolfe,
            LsChoice::Constant => LineSearch::Constant,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum, default_value = "newton")]
    solver: SolverChoice,
    /// Line search; defaults to the method's usual choice.
    #[arg(long, value_enum)]
    ls: Option<LsChoice>,
    #[command(flatten)]
    stop: StopArgs,
    /// Per-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Solution vector output; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 1e3)]
    lambda_start: f64,
    #[arg(long, default_value_t = 1e-5)]
    lambda_end: f64,
    #[arg(long, default_value_t = 100)]
    num: usize,
    /// Start every solve from the source instance.
    #[arg(long)]
    no_warm_start: bool,
    #[command(flatten)]
    stop: StopArgs,
    /// Path CSV output; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write each solution as `x_<index>.csv` into this directory.
    #[arg(long)]
    solutions_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite description (JSON with D, K, seed, counts, lambdas, weight_scale).
    #[arg(long)]
    spec: PathBuf,
    /// Per-run report CSV.
    #[arg(long)]
    out: PathBuf,
    /// Full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Comma-separated methods; all by default.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Override every method's line search.
    #[arg(long, value_enum)]
    ls: Option<LsChoice>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Timing repetitions per run.
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Directory of source instance files to use instead of sampling.
    #[arg(long)]
    instances: Option<PathBuf>,
    /// Dump one trace CSV per run into this directory.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    #[command(flatten)]
    stop: StopArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    lambda: f64,
    #[command(flatten)]
    stop: StopArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Path(a) => run_path(a),
        Command::Bench(a) => run_bench(a),
        Command::Compare(a) => run_compare(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_)
        | Error::DimensionMismatch(_)
        | Error::NonFinite(_)
        | Error::ClassOutOfRange { .. }
        | Error::NotBinary(_)
        | Error::InvalidConfig(_)
        | Error::InvalidProblem(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_) => 3,
        _ => 4,
    }
}

fn not_converged(iterations: usize) -> ExitCode {
    eprintln!("error: did not converge within {iterations} iterations");
    ExitCode::from(4)
}

fn load(p: &ProblemArgs, lambda: f64) -> invclass::Result<(SoftmaxModel<f64>, Problem<f64>)> {
    let model = load_model_path(&p.model, p.biases.as_deref())?;
    let source = load_instance(&p.instance)?;
    let problem = Problem::new(source, p.target_class, lambda)?;
    Ok((model, problem))
}

fn create(path: &Path) -> invclass::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_solution(out: Option<&Path>, x: &[f64]) -> invclass::Result<()> {
    match out {
        Some(p) => {
            let mut w = create(p)?;
            write_vector(&mut w, x)?;
            w.flush()?;
        }
        None => write_vector(std::io::stdout().lock(), x)?,
    }
    Ok(())
}

fn print_summary(e: f64, grad_norm: f64, iterations: usize, p_target: f64, seconds: f64) {
    eprintln!(
        "E={} grad_norm={} iterations={iterations} p_target={} seconds={seconds:.6}",
        fmt17(e),
        fmt17(grad_norm),
        fmt17(p_target)
    );
}

fn run_solve(a: SolveArgs) -> invclass::Result<ExitCode> {
    let (model, problem) = load(&a.problem, a.lambda)?;
    let Some(method) = a.solver.method() else {
        return solve_closed_form(&model, &problem, a.out.as_deref());
    };
    let line_search = a.ls.map(LineSearch::from).unwrap_or(method.default_line_search());
    let cfg = BaselineConfig { method, lbfgs_memory: 4, solver: a.stop.solver(line_search) };
    let reduced = model.reduce(problem.target_class)?;
    let res = solve_baseline(&reduced, &problem, &problem.source, &cfg)?;
    if let Some(path) = &a.trace {
        let mut w = create(path)?;
        write_trace_csv(&mut w, &res.trace, !a.stop.zero_times)?;
        w.flush()?;
    }
    write_solution(a.out.as_deref(), &res.x_star)?;
    let p_target = res.probs[problem.target_class];
    print_summary(res.objective, res.grad_norm, res.iterations, p_target, res.elapsed_seconds);
    if !res.converged {
        return Ok(not_converged(res.iterations));
    }
    Ok(ExitCode::SUCCESS)
}

fn solve_closed_form(model: &SoftmaxModel<f64>, problem: &Problem<f64>, out: Option<&Path>) -> invclass::Result<ExitCode> {
    let start = std::time::Instant::now();
    let lm = model.to_logistic()?;
    let lm = match problem.target_class {
        0 => lm,
        1 => lm.flipped(),
        k => return Err(Error::ClassOutOfRange { index: k, classes: 2 }),
    };
    let sol = solve_logistic(&lm, &problem.source, problem.lambda)?;
    let seconds = start.elapsed().as_secs_f64();
    let grad = invclass::logistic::logistic_gradient(&lm, &problem.source, problem.lambda, &sol.x_star);
    let (e, _) = eval_objective(model, problem, &sol.x_star)?;
    write_solution(out, &sol.x_star)?;
    print_summary(e, invclass::linalg::norm(&grad), 0, sol.p_target, seconds);
    Ok(ExitCode::SUCCESS)
}

fn run_path(a: PathArgs) -> invclass::Result<ExitCode> {
    let (model, problem) = load(&a.problem, a.lambda_start)?;
    let cfg = PathConfig {
        lambda_max: a.lambda_start,
        lambda_min: a.lambda_end,
        num_points: a.num,
        warm_start: !a.no_warm_start,
        solver: a.stop.solver(LineSearch::Backtracking),
    };
    let reduced = model.reduce(problem.target_class)?;
    let (result, failure) = match solve_path(&reduced, &problem.source, &cfg) {
        Ok(r) => (r, None),
        Err(f) => (f.partial, Some(f.source)),
    };
    let with_times = !a.stop.zero_times;
    match &a.out {
        Some(p) => {
            let mut w = create(p)?;
            result.write_csv(&mut w, with_times)?;
            w.flush()?;
        }
        None => result.write_csv(std::io::stdout().lock(), with_times)?,
    }
    if let Some(dir) = &a.solutions_dir {
        std::fs::create_dir_all(dir)?;
        for (i, e) in result.entries.iter().enumerate() {
            let mut w = create(&dir.join(format!("x_{i:04}.csv")))?;
            write_vector(&mut w, &e.x_star)?;
            w.flush()?;
        }
    }
    eprintln!(
        "points={} total_iterations={} seconds={:.6}",
        result.entries.len(),
        result.total_iterations(),
        result.total_seconds
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(ExitCode::SUCCESS),
    }
}

fn run_bench(a: BenchArgs) -> invclass::Result<ExitCode> {
    let spec: SuiteSpec = serde_json::from_reader(File::open(&a.spec)?)?;
    let model = spec.model::<f64>()?;
    let suite = match &a.instances {
        Some(dir) => bench::problems_from_sources(&model, &spec, &load_instance_dir(dir)?)?,
        None => bench::generate_problem_suite(&model, &spec)?,
    };
    let mut methods = bench::default_methods(&a.stop.solver(LineSearch::Backtracking));
    if let Some(selected) = &a.methods {
        methods.retain(|m| selected.contains(&m.method));
    }
    if let Some(ls) = a.ls {
        methods = methods.into_iter().map(|m| m.with_line_search(ls.into())).collect();
    }
    let cfg = BenchConfig { repetitions: a.reps, jobs: a.jobs.max(1), keep_traces: a.trace_dir.is_some() };
    let report = bench::run_benchmark(&model, &suite, &methods, &cfg)?;
    let with_times = !a.stop.zero_times;
    let mut w = create(&a.out)?;
    report.write_csv(&mut w, with_times)?;
    w.flush()?;
    if let Some(p) = &a.json {
        let mut w = create(p)?;
        report.write_json(&mut w)?;
        w.flush()?;
    }
    if let Some(dir) = &a.trace_dir {
        report.write_traces(dir, with_times)?;
    }
    for s in &report.summaries {
        eprintln!(
            "{:<7} {:<13} converged={}/{} median_iterations={} median_seconds={:.6}",
            s.method.name(),
            s.line_search.name(),
            s.converged,
            s.runs,
            s.median_iterations,
            s.median_runtime
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn run_compare(a: CompareArgs) -> invclass::Result<ExitCode> {
    let (model, problem) = load(&a.problem, a.lambda)?;
    let reduced = model.reduce(problem.target_class)?;
    let methods = bench::default_methods(&a.stop.solver(LineSearch::Backtracking));
    let mut runs: Vec<(Method, invclass::Result<SolverResult<f64>>)> = Vec::new();
    for m in &methods {
        runs.push((m.method, solve_baseline(&reduced, &problem, &problem.source, m)));
    }
    let e_star = match &runs[0] {
        (Method::Newton, Ok(r)) => r.trace.last().map(|t| t.objective).unwrap_or(f64::NAN),
        (_, Err(e)) => return Err(Error::InvalidProblem(format!("reference Newton solve failed: {e}"))),
        _ => f64::NAN,
    };
    let mut out = std::io::stdout().lock();
    let rows = runs.iter().filter_map(|(_, r)| r.as_ref().ok()).map(|r| r.trace.len()).max().unwrap_or(0);
    write!(out, "{:>5}", "k")?;
    for (m, _) in &runs {
        write!(out, " {:>24}", m.name())?;
    }
    writeln!(out)?;
    for k in 0..rows {
        write!(out, "{k:>5}")?;
        for (_, r) in &runs {
            match r.as_ref().ok().and_then(|r| r.trace.get(k)) {
                Some(t) => write!(out, " {:>24}", fmt17(t.objective - e_star))?,
                None => write!(out, " {:>24}", "")?,
            }
        }
        writeln!(out)?;
    }
    let mut all_converged = true;
    for (m, r) in &runs {
        match r {
            Ok(r) => {
                all_converged &= r.converged;
                eprintln!(
                    "{:<7} iterations={} converged={} E={} seconds={:.6}",
                    m.name(),
                    r.iterations,
                    r.converged,
                    fmt17(r.objective),
                    r.elapsed_seconds
                );
            }
            Err(e) => {
                all_converged = false;
                eprintln!("{:<7} failed: {e}", m.name());
            }
        }
    }
    Ok(if all_converged { ExitCode::SUCCESS } else { ExitCode::from(4) })
}
