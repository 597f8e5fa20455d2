//! Synthetic problem suites and the multi-method benchmark harness.
//!
//! Trained classifiers are replaced by seeded Gaussian models. Each suite
//! mixes "far" problems (target = least probable class at `x̄`) with "near"
//! problems (target = second most probable class), as in the usual protocol
//! for inverse-classification benchmarks.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{solve_baseline, BaselineConfig, Method};
use crate::error::{Error, Result};
use crate::line_search::LineSearch;
use crate::linalg::{norm, sub, Matrix};
use crate::model::{argmax, ReducedModel, SoftmaxModel};
use crate::objective::Problem;
use crate::scalar::Scalar;
use crate::solver::{fmt17, write_trace_csv, IterRecord, SolverConfig, SolverResult};

/// Synthetic suite description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSpec {
    #[serde(rename = "D")]
    pub dim: usize,
    #[serde(rename = "K")]
    pub classes: usize,
    pub seed: u64,
    pub count_far: usize,
    pub count_near: usize,
    pub lambda_far: f64,
    pub lambda_near: f64,
    pub weight_scale: f64,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            dim: 784,
            classes: 10,
            seed: 0,
            count_far: 40,
            count_near: 10,
            lambda_far: 0.01,
            lambda_near: 0.1,
            weight_scale: 1.0,
        }
    }
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.classes < 2 {
            return Err(Error::InvalidConfig(format!("need D >= 1 and K >= 2, got D={} K={}", self.dim, self.classes)));
        }
        if !(self.lambda_far > 0.0 && self.lambda_near > 0.0) {
            return Err(Error::InvalidConfig("suite lambdas must be positive".into()));
        }
        if !(self.weight_scale >= 0.0 && self.weight_scale.is_finite()) {
            return Err(Error::InvalidConfig("weight_scale must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.count_far + self.count_near
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The seeded model this suite is posed on.
    pub fn model<T: Scalar>(&self) -> Result<SoftmaxModel<T>> {
        self.validate()?;
        generate_synthetic_model(self.dim, self.classes, self.seed, self.weight_scale)
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal_vec<T: Scalar>(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<T> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::lit(z * scale)
        })
        .collect()
}

/// Weights and biases drawn i.i.d. from `N(0, 1)·weight_scale/√D`.
pub fn generate_synthetic_model<T: Scalar>(
    dim: usize,
    classes: usize,
    seed: u64,
    weight_scale: f64,
) -> Result<SoftmaxModel<T>> {
    if dim == 0 || classes < 2 {
        return Err(Error::InvalidConfig(format!("need D >= 1 and K >= 2, got D={dim} K={classes}")));
    }
    let mut rng = stream_rng(seed, 0);
    let scale = weight_scale / (dim as f64).sqrt();
    let weights = normal_vec(&mut rng, dim * classes, scale);
    let biases = normal_vec(&mut rng, classes, scale);
    SoftmaxModel::new(Matrix::from_row_major(classes, dim, weights)?, biases)
}

/// How a suite problem's target class was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Least probable class at `x̄`.
    Far,
    /// Second most probable class at `x̄`.
    Near,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteProblem<T> {
    pub kind: ProblemKind,
    pub problem: Problem<T>,
}

/// Seeded suite with `x̄ ~ N(0, I)`; problem `i` uses its own random stream,
/// so problems do not depend on each other or on scheduling.
pub fn generate_problem_suite<T: Scalar>(model: &SoftmaxModel<T>, spec: &SuiteSpec) -> Result<Vec<SuiteProblem<T>>> {
    spec.validate()?;
    let sources: Vec<Vec<T>> = (0..spec.len())
        .map(|i| normal_vec(&mut stream_rng(spec.seed, i as u64 + 1), model.dim(), 1.0))
        .collect();
    problems_from_sources(model, spec, &sources)
}

/// Suite over user-supplied source instances, used in order and cycled.
pub fn problems_from_sources<T: Scalar>(
    model: &SoftmaxModel<T>,
    spec: &SuiteSpec,
    sources: &[Vec<T>],
) -> Result<Vec<SuiteProblem<T>>> {
    if sources.is_empty() && !spec.is_empty() {
        return Err(Error::InvalidConfig("no source instances supplied".into()));
    }
    (0..spec.len())
        .map(|i| {
            let source = sources[i % sources.len()].clone();
            let probs = model.softmax_eval(&source)?.probs;
            let (kind, target, lambda) = if i < spec.count_far {
                let neg: Vec<T> = probs.iter().map(|&p| -p).collect();
                (ProblemKind::Far, argmax(&neg), spec.lambda_far)
            } else {
                (ProblemKind::Near, second_largest(&probs), spec.lambda_near)
            };
            Ok(SuiteProblem { kind, problem: Problem::new(source, target, T::lit(lambda))? })
        })
        .collect()
}

fn second_largest<T: Scalar>(v: &[T]) -> usize {
    let top = argmax(v);
    let mut best = if top == 0 { 1 } else { 0 };
    for (i, &x) in v.iter().enumerate() {
        if i != top && x > v[best] {
            best = i;
        }
    }
    best
}

/// Harness settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    /// Timings are the median over this many identical runs.
    pub repetitions: usize,
    /// Worker threads across problems; 1 runs sequentially.
    pub jobs: usize,
    /// Keep full per-iteration traces in the records.
    pub keep_traces: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { repetitions: 3, jobs: 1, keep_traces: false }
    }
}

/// Every method with its preferred line search and the given stopping rule.
pub fn default_methods(solver: &SolverConfig) -> Vec<BaselineConfig> {
    Method::ALL
        .iter()
        .map(|&m| {
            let mut c = BaselineConfig::new(m);
            c.solver = SolverConfig { line_search: m.default_line_search(), ..*solver };
            c
        })
        .collect()
}

/// One `(problem, method, line search)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub problem: usize,
    pub kind: ProblemKind,
    pub target_class: usize,
    pub lambda: f64,
    pub method: Method,
    pub line_search: LineSearch,
    pub iterations: usize,
    pub converged: bool,
    /// Median solve time over the repetitions; excludes the reduction.
    pub runtime_seconds: f64,
    /// Time to build the reduced model for this problem's target class.
    pub setup_seconds: f64,
    pub final_objective: f64,
    pub final_grad_norm: f64,
    /// `‖x* − x*_newton‖`
    pub distance_to_newton: f64,
    /// `p_k(x*)`
    pub p_target: f64,
    /// Entry `i` counts line searches that evaluated `i + 1` trial steps.
    pub trial_histogram: Vec<usize>,
    /// `E_k − E*` per iteration, `E*` from Newton's final iterate.
    pub gaps: Vec<f64>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<IterRecord>>,
}

/// Aggregates for one method/line-search pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub line_search: LineSearch,
    pub runs: usize,
    pub converged: usize,
    pub failed: usize,
    pub median_iterations: f64,
    pub mean_iterations: f64,
    pub median_runtime: f64,
    pub mean_runtime: f64,
    pub total_runtime: f64,
    pub trial_histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub summaries: Vec<MethodSummary>,
}

/// Runs every method on every problem from `x0 = x̄`, recording failures per
/// cell. Newton is always solved first per problem to supply `E*` and the
/// reference `x*`; it is reported only if listed in `methods`.
pub fn run_benchmark<T: Scalar>(
    model: &SoftmaxModel<T>,
    suite: &[SuiteProblem<T>],
    methods: &[BaselineConfig],
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    for m in methods {
        m.validate()?;
    }
    if cfg.repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be positive".into()));
    }
    let reference_cfg = methods
        .iter()
        .find(|m| m.method == Method::Newton)
        .map(|m| m.solver)
        .unwrap_or_default();
    let run_one = |(index, sp): (usize, &SuiteProblem<T>)| -> Result<Vec<BenchRecord>> {
        let t0 = Instant::now();
        let reduced = model.reduce(sp.problem.target_class)?;
        let setup_seconds = t0.elapsed().as_secs_f64();
        let reference = BaselineConfig { method: Method::Newton, lbfgs_memory: 4, solver: reference_cfg };
        let newton = solve_baseline(&reduced, &sp.problem, &sp.problem.source, &reference).ok();
        Ok(methods
            .iter()
            .map(|m| bench_cell(index, sp, &reduced, m, newton.as_ref(), setup_seconds, cfg))
            .collect())
    };
    let per_problem: Vec<Result<Vec<BenchRecord>>> = if cfg.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        pool.install(|| suite.par_iter().enumerate().map(run_one).collect())
    } else {
        suite.iter().enumerate().map(run_one).collect()
    };
    let mut records = Vec::with_capacity(suite.len() * methods.len());
    for r in per_problem {
        records.extend(r?);
    }
    let summaries = summarize(&records, methods);
    Ok(BenchReport { records, summaries })
}

fn bench_cell<T: Scalar>(
    index: usize,
    sp: &SuiteProblem<T>,
    reduced: &ReducedModel<T>,
    method: &BaselineConfig,
    newton: Option<&SolverResult<T>>,
    setup_seconds: f64,
    cfg: &BenchConfig,
) -> BenchRecord {
    let mut times = Vec::with_capacity(cfg.repetitions);
    let mut outcome = None;
    for _ in 0..cfg.repetitions {
        let res = solve_baseline(reduced, &sp.problem, &sp.problem.source, method);
        if let Ok(r) = &res {
            times.push(r.elapsed_seconds);
        }
        outcome = Some(res);
    }
    let mut record = BenchRecord {
        problem: index,
        kind: sp.kind,
        target_class: sp.problem.target_class,
        lambda: sp.problem.lambda.to_f64_lossy(),
        method: method.method,
        line_search: method.solver.line_search,
        iterations: 0,
        converged: false,
        runtime_seconds: median(&mut times),
        setup_seconds,
        final_objective: f64::NAN,
        final_grad_norm: f64::NAN,
        distance_to_newton: f64::NAN,
        p_target: f64::NAN,
        trial_histogram: Vec::new(),
        gaps: Vec::new(),
        error: None,
        trace: None,
    };
    match outcome.expect("at least one repetition") {
        Err(e) => record.error = Some(e.to_string()),
        Ok(res) => {
            let e_star = newton.and_then(|n| n.trace.last()).map(|r| r.objective);
            record.iterations = res.iterations;
            record.converged = res.converged;
            record.final_objective = res.objective.to_f64_lossy();
            record.final_grad_norm = res.grad_norm.to_f64_lossy();
            record.p_target = res.probs[sp.problem.target_class].to_f64_lossy();
            if let Some(n) = newton {
                record.distance_to_newton = norm(&sub(&res.x_star, &n.x_star)).to_f64_lossy();
            }
            record.trial_histogram = histogram(res.trial_counts());
            if let Some(e_star) = e_star {
                record.gaps = res.trace.iter().map(|r| r.objective - e_star).collect();
            }
            if cfg.keep_traces {
                record.trace = Some(res.trace);
            }
        }
    }
    record
}

/// Counts per trial number: entry `i` is the number of `i + 1`.
pub fn histogram(trials: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut h: Vec<usize> = Vec::new();
    for t in trials {
        if t == 0 {
            continue;
        }
        if h.len() < t {
            h.resize(t, 0);
        }
        h[t - 1] += 1;
    }
    h
}

fn merge_histograms<'a>(hs: impl IntoIterator<Item = &'a Vec<usize>>) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for h in hs {
        if out.len() < h.len() {
            out.resize(h.len(), 0);
        }
        for (o, &c) in out.iter_mut().zip(h) {
            *o += c;
        }
    }
    out
}

/// Median of finite values; NaN when there are none.
pub fn median(values: &mut [f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn summarize(records: &[BenchRecord], methods: &[BaselineConfig]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|m| {
            let rs: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| r.method == m.method && r.line_search == m.solver.line_search)
                .collect();
            let ok: Vec<&&BenchRecord> = rs.iter().filter(|r| r.error.is_none()).collect();
            let mut its: Vec<f64> = ok.iter().map(|r| r.iterations as f64).collect();
            let mut times: Vec<f64> = ok.iter().map(|r| r.runtime_seconds).collect();
            let mean = |v: &[f64]| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            MethodSummary {
                method: m.method,
                line_search: m.solver.line_search,
                runs: rs.len(),
                converged: rs.iter().filter(|r| r.converged).count(),
                failed: rs.len() - ok.len(),
                mean_iterations: mean(&its),
                median_iterations: median(&mut its),
                mean_runtime: mean(&times),
                total_runtime: times.iter().sum(),
                median_runtime: median(&mut times),
                trial_histogram: merge_histograms(ok.iter().map(|r| &r.trial_histogram)),
            }
        })
        .collect()
}

impl BenchReport {
    pub fn summary(&self, method: Method, line_search: LineSearch) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method && s.line_search == line_search)
    }

    pub fn records_for(&self, method: Method) -> impl Iterator<Item = &BenchRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }

    /// One row per record. Timing columns are written as 0 when
    /// `with_times` is false so output can be compared byte for byte.
    pub fn write_csv<W: Write>(&self, out: W, with_times: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "problem",
            "kind",
            "target_class",
            "lambda",
            "method",
            "line_search",
            "iterations",
            "converged",
            "runtime_s",
            "setup_s",
            "final_E",
            "grad_norm",
            "distance_to_newton",
            "p_target",
            "trial_histogram",
            "error",
        ])?;
        let t = |v: f64| fmt17(if with_times { v } else { 0.0 });
        for r in &self.records {
            let hist = r.trial_histogram.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";");
            w.write_record([
                r.problem.to_string(),
                format!("{:?}", r.kind).to_lowercase(),
                r.target_class.to_string(),
                fmt17(r.lambda),
                r.method.to_string(),
                r.line_search.to_string(),
                r.iterations.to_string(),
                r.converged.to_string(),
                t(r.runtime_seconds),
                t(r.setup_seconds),
                fmt17(r.final_objective),
                fmt17(r.final_grad_norm),
                fmt17(r.distance_to_newton),
                fmt17(r.p_target),
                hist,
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Writes `problem{i}_{method}_{line_search}.csv` per record that kept
    /// its trace.
    pub fn write_traces(&self, dir: &Path, with_times: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for r in &self.records {
            if let Some(trace) = &r.trace {
                let name = format!("problem{}_{}_{}.csv", r.problem, r.method, r.line_search);
                write_trace_csv(std::fs::File::create(dir.join(name))?, trace, with_times)?;
            }
        }
        Ok(())
    }
}

/// Late-iteration order check on `E_k − E*`: every consecutive pair with
/// `E_k − E* ∈ (1e−12, 1e−2)` must satisfy
/// `log10(E_{k+1} − E*) ≤ 1.5·log10(E_k − E*)`, i.e. the number of correct
/// digits grows by at least half each step. A next gap of zero or below
/// passes.
pub fn quadratic_tail_holds(gaps: &[f64]) -> bool {
    gaps.windows(2).all(|w| {
        let (cur, next) = (w[0], w[1]);
        if !(cur > 1e-12 && cur < 1e-2) || next <= 0.0 {
            return true;
        }
        next.log10() <= 1.5 * cur.log10()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_generation_is_deterministic() {
        let a: SoftmaxModel<f64> = generate_synthetic_model(20, 4, 7, 3.0).unwrap();
        let b: SoftmaxModel<f64> = generate_synthetic_model(20, 4, 7, 3.0).unwrap();
        let c: SoftmaxModel<f64> = generate_synthetic_model(20, 4, 8, 3.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let big: SoftmaxModel<f64> = generate_synthetic_model(784, 10, 1, 1.0).unwrap();
        assert_eq!((big.classes(), big.dim()), (10, 784));
    }

    #[test]
    fn zero_scale_gives_uniform_model() {
        let m: SoftmaxModel<f64> = generate_synthetic_model(5, 3, 1, 0.0).unwrap();
        assert!(m.weights().as_slice().iter().all(|&v| v == 0.0));
        assert!(m.biases().iter().all(|&v| v == 0.0));
        let p = m.softmax_eval(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().probs;
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn suite_layout_and_targets() {
        let spec = SuiteSpec { dim: 30, classes: 5, seed: 3, ..SuiteSpec::default() };
        let model: SoftmaxModel<f64> = spec.model().unwrap();
        let suite = generate_problem_suite(&model, &spec).unwrap();
        assert_eq!(suite.len(), 50);
        assert_eq!(suite.iter().filter(|p| p.problem.lambda == 0.01).count(), 40);
        assert_eq!(suite.iter().filter(|p| p.problem.lambda == 0.1).count(), 10);
        for sp in &suite {
            let p = model.softmax_eval(&sp.problem.source).unwrap().probs;
            let k = sp.problem.target_class;
            match sp.kind {
                ProblemKind::Far => assert!(p.iter().all(|&v| p[k] <= v)),
                ProblemKind::Near => {
                    assert_eq!(p.iter().filter(|&&v| v > p[k]).count(), 1);
                }
            }
        }
        assert_eq!(suite, generate_problem_suite(&model, &spec).unwrap());
    }

    #[test]
    fn second_largest_picks_runner_up() {
        assert_eq!(second_largest(&[0.1, 0.6, 0.3]), 2);
        assert_eq!(second_largest(&[0.6, 0.1, 0.3]), 2);
        assert_eq!(second_largest(&[0.3, 0.1, 0.6]), 0);
    }

    #[test]
    fn histogram_and_median() {
        assert_eq!(histogram([1, 1, 3, 1, 2]), vec![3, 1, 1]);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&mut []).is_nan());
    }

    #[test]
    fn tail_check() {
        assert!(quadratic_tail_holds(&[1.0, 1e-3, 1e-6, 1e-12, 0.0]));
        assert!(!quadratic_tail_holds(&[1.0, 1e-3, 1e-4, 1e-5, 0.0]));
        assert!(quadratic_tail_holds(&[5.0, 4.0, 3.0]));
    }
}
