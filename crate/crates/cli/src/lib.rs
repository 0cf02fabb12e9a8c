//! Command-line harness for budgeted-at-k multi-label inference.
//!
//! Subcommands tie the library pieces into reproducible experiments:
//!
//! * `infer` — apply closed-form strategies and/or saved classifiers to a
//!   test set and report metrics over repeats;
//! * `fw-train` — search for a randomized classifier and persist it with its
//!   optimization trace;
//! * `sample` — realize fractional label-inclusion rows as exact-k
//!   predictions by systematic sampling;
//! * `oracle` — brute-force small discrete distributions, including the
//!   built-in coupling example pair;
//! * `mixed-sweep` — trade off instance precision against a macro metric
//!   across a grid of blend weights;
//! * `report` — recompute metrics from emitted prediction files (the
//!   independent scorer behind `infer --audit`).
//!
//! Exit codes: 0 success, 2 parse/usage errors, 3 numeric contract
//! violations, 4 oversized search spaces.

use budgetk::io::{
    load_classifier, load_distribution, load_labels, load_marginals, load_predictions,
    save_classifier, save_predictions, save_report, save_trace, Report,
};
use budgetk::{
    best_deterministic, best_randomized_vertex_fw, closed_form_strategy, coupling_witness,
    empirical_confusion, estimate_priors, macro_value, madow_sample, run_frank_wolfe, seeded_rng,
    split_dataset, AffineTopK, DiscreteDistribution, Error, FWConfig, FWOutcome, InitRule,
    LabelMatrix, MarginalMatrix, MetricId, PredictionMatrix, RandomizedClassifier, Result,
    SmoothingConfig, SplitRatio, StepRule, StrategyId, DEFAULT_ENUMERATION_LIMIT,
};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// A metric the harness can score predictions with: any confusion-tensor
/// metric, plus instance recall (which depends on per-instance label counts
/// and is therefore not a tensor function).
#[derive(Debug, Clone, PartialEq)]
pub enum HarnessMetric {
    Tensor(MetricId),
    InstanceRecall,
}

impl fmt::Display for HarnessMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HarnessMetric::Tensor(id) => write!(f, "{id}"),
            HarnessMetric::InstanceRecall => write!(f, "instr"),
        }
    }
}

impl FromStr for HarnessMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "instr" {
            Ok(HarnessMetric::InstanceRecall)
        } else {
            Ok(HarnessMetric::Tensor(s.parse()?))
        }
    }
}

fn intersect_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    c
}

/// Mean per-instance recall; an instance without true labels counts as
/// fully recovered.
pub fn instance_recall(preds: &PredictionMatrix, labels: &LabelMatrix) -> Result<f64> {
    if preds.n() != labels.n() || preds.m() != labels.m() {
        return Err(Error::Shape(format!(
            "predictions are {}x{} but labels are {}x{}",
            preds.n(),
            preds.m(),
            labels.n(),
            labels.m()
        )));
    }
    let mut total = 0.0;
    for i in 0..preds.n() {
        let truth = labels.row(i);
        if truth.is_empty() {
            total += 1.0;
        } else {
            total += intersect_count(preds.row(i), truth) as f64 / truth.len() as f64;
        }
    }
    Ok(total / preds.n() as f64)
}

/// Scores one prediction matrix with one harness metric.
pub fn evaluate_metric(
    metric: &HarnessMetric,
    preds: &PredictionMatrix,
    labels: &LabelMatrix,
    k: usize,
    s: &SmoothingConfig,
) -> Result<f64> {
    match metric {
        HarnessMetric::Tensor(id) => {
            let tensor = empirical_confusion(preds, labels, k)?;
            macro_value(id, &tensor, s)
        }
        HarnessMetric::InstanceRecall => instance_recall(preds, labels),
    }
}

/// Mean and population standard deviation; bitwise-identical repeats give a
/// standard deviation of exactly zero.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    if values.windows(2).all(|w| w[0].to_bits() == w[1].to_bits()) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn parse_harness_metric(s: &str) -> std::result::Result<HarnessMetric, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_tensor_metric(s: &str) -> std::result::Result<MetricId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_strategy(s: &str) -> std::result::Result<StrategyId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<SplitRatio, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Topk,
    Random,
}

impl From<InitArg> for InitRule {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Topk => InitRule::TopK,
            InitArg::Random => InitRule::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StepArg {
    Linesearch,
    Fixed,
}

impl From<StepArg> for StepRule {
    fn from(v: StepArg) -> Self {
        match v {
            StepArg::Linesearch => StepRule::LineSearch,
            StepArg::Fixed => StepRule::FixedSchedule,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "budgetk",
    version,
    about = "Budgeted-at-k multi-label inference: plug-in rules, randomized classifiers, sampling, and brute-force checks"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply strategies and/or saved classifiers to a test set and report
    /// metrics over repeats.
    Infer(InferArgs),
    /// Search for a randomized classifier; write it plus its trace.
    FwTrain(FwTrainArgs),
    /// Turn fractional label-inclusion rows into exact-k predictions.
    Sample(SampleArgs),
    /// Brute-force a small discrete distribution.
    Oracle(OracleArgs),
    /// Sweep the blend weight of a mixed utility and tabulate the trade-off.
    MixedSweep(MixedSweepArgs),
    /// Recompute metrics from prediction files (independent scorer).
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct InferArgs {
    /// Ground-truth labels for evaluation.
    #[arg(long)]
    labels: PathBuf,
    /// Estimated marginal probabilities for the same instances.
    #[arg(long)]
    marginals: PathBuf,
    /// Prediction budget: every instance gets exactly k labels.
    #[arg(long)]
    k: usize,
    /// Closed-form strategies to run (topk, macro-recall, bacc, pow:<b>, log).
    #[arg(long = "strategy", value_delimiter = ',', value_parser = parse_strategy)]
    strategies: Vec<StrategyId>,
    /// Saved classifier JSON files to run alongside the strategies.
    #[arg(long = "classifier")]
    classifiers: Vec<PathBuf>,
    /// Labels used for prior estimation (defaults to --labels).
    #[arg(long)]
    train_labels: Option<PathBuf>,
    /// Extra metrics beyond instp, instr, precision, recall, f1.
    #[arg(long = "metric", value_delimiter = ',', value_parser = parse_harness_metric)]
    metrics: Vec<HarnessMetric>,
    /// Randomized strategies are repeated this many times (seeds seed+r).
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep only the largest k' marginals per row; 0 disables truncation.
    #[arg(long, default_value_t = 200)]
    kprime: usize,
    /// Additive smoothing count for prior estimation.
    #[arg(long, default_value_t = 1.0)]
    add_count: f64,
    /// Denominator smoothing for tensor metrics.
    #[arg(long, default_value_t = 1e-9)]
    smoothing: f64,
    /// Base path: writes <out>.tsv, <out>.json, and prediction files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Re-score the emitted prediction files and verify the report.
    #[arg(long, requires = "out")]
    audit: bool,
}

#[derive(Debug, Args)]
struct FwTrainArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    marginals: PathBuf,
    #[arg(long)]
    k: usize,
    /// Target metric (any tensor metric, e.g. f1, jaccard, mixed:0.5:f1).
    #[arg(long, value_parser = parse_tensor_metric, default_value = "f1")]
    metric: MetricId,
    /// Estimation/search split: 50, 75, or 100 (no split).
    #[arg(long, value_parser = parse_split, default_value = "100")]
    split: SplitRatio,
    #[arg(long, value_enum, default_value_t = InitArg::Topk)]
    init: InitArg,
    #[arg(long, value_enum, default_value_t = StepArg::Linesearch)]
    step: StepArg,
    /// Stop once the accepted step size falls below this threshold.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep only the largest k' marginals per row; 0 disables truncation.
    #[arg(long, default_value_t = 200)]
    kprime: usize,
    /// Denominator smoothing for the objective and its gradient.
    #[arg(long, default_value_t = 1e-9)]
    smoothing: f64,
    /// Base path: writes <out>.classifier.json and <out>.trace.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = ArgGroup::new("source").required(true).args(["pi", "classifier"]))]
struct SampleArgs {
    /// Fractional label-inclusion rows (each sums to k) to realize directly.
    #[arg(long)]
    pi: Option<PathBuf>,
    /// Saved classifier whose fractional rows are realized instead.
    #[arg(long, requires = "marginals")]
    classifier: Option<PathBuf>,
    /// Marginals to feed the classifier (with --classifier).
    #[arg(long)]
    marginals: Option<PathBuf>,
    /// Expected budget; checked against each row.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Verify the built-in coupling example against its reference optima.
    #[arg(long)]
    check_appendix_e: bool,
    #[arg(long, value_parser = parse_tensor_metric, required_unless_present = "check_appendix_e")]
    metric: Option<MetricId>,
    #[arg(long, required_unless_present = "check_appendix_e")]
    k: Option<usize>,
    /// Distribution file, or builtin:appendixE-A / builtin:appendixE-B.
    #[arg(long, required_unless_present = "check_appendix_e")]
    dist: Option<String>,
    /// Assignment-count cap for the exhaustive scan.
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_LIMIT)]
    limit: u64,
    #[arg(long, default_value_t = 1e-9)]
    smoothing: f64,
    /// Also search for the best randomized mixture over the vertices.
    #[arg(long)]
    randomized: bool,
    /// Iteration budget for the randomized vertex search.
    #[arg(long, default_value_t = 2000)]
    vertex_iters: usize,
}

#[derive(Debug, Args)]
struct MixedSweepArgs {
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    marginals: PathBuf,
    #[arg(long)]
    k: usize,
    /// Blend weights to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
    lambdas: Vec<f64>,
    /// Macro metric blended against instance precision.
    #[arg(long, value_parser = parse_tensor_metric, default_value = "f1")]
    inner: MetricId,
    #[arg(long, value_parser = parse_split, default_value = "100")]
    split: SplitRatio,
    #[arg(long, value_enum, default_value_t = InitArg::Topk)]
    init: InitArg,
    #[arg(long, value_enum, default_value_t = StepArg::Linesearch)]
    step: StepArg,
    /// Stop once the accepted step size falls below this threshold.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    kprime: usize,
    #[arg(long, default_value_t = 1e-9)]
    smoothing: f64,
    /// Base path: writes <out>.tsv and <out>.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    labels: PathBuf,
    /// Prediction files; each file is scored as one repeat.
    #[arg(long = "predictions", required = true, num_args = 1..)]
    predictions: Vec<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long = "metric", value_delimiter = ',', value_parser = parse_harness_metric)]
    metrics: Vec<HarnessMetric>,
    /// Strategy column value in the emitted rows.
    #[arg(long, default_value = "external")]
    name: String,
    #[arg(long, default_value_t = 1e-9)]
    smoothing: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Entry point used by the binary; parses `std::env::args_os()`.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Parses and executes; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// Maps library errors onto the documented exit codes.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Io(_) | Error::Json(_) => 2,
        Error::SearchSpaceTooLarge(_) => 4,
        _ => 3,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Infer(a) => cmd_infer(a),
        Command::FwTrain(a) => cmd_fw_train(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::MixedSweep(a) => cmd_mixed_sweep(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn keep_top(kprime: usize) -> Option<usize> {
    if kprime == 0 {
        None
    } else {
        Some(kprime)
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

fn render_report(report: &Report) -> String {
    let mut out = String::from("strategy\tmetric\tmean\tstd\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{}\t{}\t{:.6}\t{:.6}\n",
            row.strategy, row.metric, row.mean, row.std
        ));
    }
    out
}

enum Predictor {
    Deterministic(AffineTopK),
    Randomized(RandomizedClassifier),
}

/// Predictions of one predictor for every repeat. Deterministic predictors
/// produce a single matrix shared by all repeats.
fn predict_repeats(
    predictor: &Predictor,
    marginals: &MarginalMatrix,
    repeats: usize,
    seed: u64,
) -> Result<Vec<PredictionMatrix>> {
    match predictor {
        Predictor::Deterministic(clf) => Ok(vec![clf.predict_all(marginals)?]),
        Predictor::Randomized(rclf) => {
            let fallbacks = rclf.fallback_orders();
            (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let mut rng = seeded_rng(seed + r as u64, 0);
                    let rows = (0..marginals.n())
                        .map(|i| {
                            let (idx, val) = marginals.row(i);
                            let c = rclf.sample_component(&mut rng);
                            let kh = rclf.components()[c].predict_sparse_prepared(
                                idx,
                                val,
                                &fallbacks[c],
                            )?;
                            Ok(kh.ones().to_vec())
                        })
                        .collect::<Result<Vec<_>>>()?;
                    PredictionMatrix::from_rows(marginals.m(), rows)
                })
                .collect()
        }
    }
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let labels = load_labels(&a.labels)?;
    let marginals = load_marginals(&a.marginals, keep_top(a.kprime))?;
    if labels.n() != marginals.n() || labels.m() != marginals.m() {
        return Err(Error::Shape(format!(
            "labels are {}x{} but marginals are {}x{}",
            labels.n(),
            labels.m(),
            marginals.n(),
            marginals.m()
        )));
    }
    let smoothing = SmoothingConfig::new(a.smoothing)?;
    let k = a.k;

    // Metric set: the standard five plus any extras not already present.
    let mut metrics = vec![
        HarnessMetric::Tensor(MetricId::InstancePrecision),
        HarnessMetric::InstanceRecall,
        HarnessMetric::Tensor(MetricId::Precision),
        HarnessMetric::Tensor(MetricId::Recall),
        HarnessMetric::Tensor(MetricId::f1()),
    ];
    for extra in &a.metrics {
        if !metrics.iter().any(|m| m.to_string() == extra.to_string()) {
            metrics.push(extra.clone());
        }
    }

    // Assemble named predictors.
    let strategies = if a.strategies.is_empty() && a.classifiers.is_empty() {
        vec![StrategyId::TopK]
    } else {
        a.strategies.clone()
    };
    let needs_priors = strategies.iter().any(|s| !matches!(s, StrategyId::TopK));
    let priors = if needs_priors {
        let fit_labels = match &a.train_labels {
            Some(path) => {
                let fit = load_labels(path)?;
                if fit.m() != labels.m() {
                    return Err(Error::Shape(format!(
                        "prior-estimation labels have m={} but evaluation labels have m={}",
                        fit.m(),
                        labels.m()
                    )));
                }
                fit
            }
            None => labels.clone(),
        };
        Some(estimate_priors(&fit_labels, a.add_count)?)
    } else {
        None
    };

    let mut predictors: Vec<(String, Predictor)> = Vec::new();
    for strat in &strategies {
        let name = strat.to_string();
        if predictors.iter().any(|(n, _)| *n == name) {
            continue;
        }
        let clf = match strat {
            StrategyId::TopK => AffineTopK::plain_topk(labels.m(), k)?,
            other => closed_form_strategy(other, priors.as_ref().expect("priors estimated"), k)?,
        };
        predictors.push((name, Predictor::Deterministic(clf)));
    }
    for path in &a.classifiers {
        let rclf = load_classifier(path)?;
        if rclf.m() != labels.m() {
            return Err(Error::Shape(format!(
                "classifier {} has m={}, dataset has m={}",
                path.display(),
                rclf.m(),
                labels.m()
            )));
        }
        if rclf.k() != k {
            return Err(Error::InvalidBudget {
                k: rclf.k(),
                m: labels.m(),
            });
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let predictor = if rclf.components().len() == 1 {
            Predictor::Deterministic(rclf.components()[0].clone())
        } else {
            Predictor::Randomized(rclf)
        };
        predictors.push((name, predictor));
    }

    // Score every predictor.
    let repeats = a.repeats as usize;
    let mut report = Report::default();
    let mut emitted: Vec<(String, Vec<PathBuf>)> = Vec::new();
    for (name, predictor) in &predictors {
        let pred_sets = predict_repeats(predictor, &marginals, repeats, a.seed)?;
        let mut files = Vec::new();
        if let Some(base) = &a.out {
            for (r, preds) in pred_sets.iter().enumerate() {
                let path = PathBuf::from(format!(
                    "{}.preds.{}.r{r}.txt",
                    base.display(),
                    sanitize(name)
                ));
                save_predictions(preds, &path)?;
                files.push(path);
            }
        }
        for metric in &metrics {
            let per_repeat = pred_sets
                .iter()
                .map(|preds| evaluate_metric(metric, preds, &labels, k, &smoothing))
                .collect::<Result<Vec<f64>>>()?;
            let (mean, std) = mean_std(&per_repeat);
            report.push(name, &format!("{metric}@{k}"), mean, std);
        }
        emitted.push((name.clone(), files));
    }
    report
        .rows
        .sort_by(|x, y| x.strategy.cmp(&y.strategy).then(x.metric.cmp(&y.metric)));

    print!("{}", render_report(&report));
    if let Some(base) = &a.out {
        let (tsv, json) = save_report(&report, base)?;
        eprintln!("wrote {} and {}", tsv.display(), json.display());
    }

    if a.audit {
        let mut checked = 0usize;
        for (name, files) in &emitted {
            for metric in &metrics {
                let per_repeat = files
                    .iter()
                    .map(|path| {
                        let preds = load_predictions(path)?;
                        evaluate_metric(metric, &preds, &labels, k, &smoothing)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let (mean, std) = mean_std(&per_repeat);
                let metric_name = format!("{metric}@{k}");
                let row = report
                    .rows
                    .iter()
                    .find(|r| r.strategy == *name && r.metric == metric_name)
                    .expect("reported row exists for every scored metric");
                if (row.mean - mean).abs() > 1e-12 || (row.std - std).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "audit mismatch for {name} {metric_name}: reported {}/{}, recomputed {mean}/{std}",
                        row.mean, row.std
                    )));
                }
                checked += 1;
            }
        }
        eprintln!("audit: {checked} values recomputed from emitted predictions and matched");
    }
    Ok(())
}

fn cmd_fw_train(a: FwTrainArgs) -> Result<()> {
    let labels = load_labels(&a.labels)?;
    let marginals = load_marginals(&a.marginals, keep_top(a.kprime))?;
    let split = split_dataset(&labels, &marginals, a.split, a.seed)?;
    let cfg = FWConfig {
        max_iters: a.max_iters,
        stop_eps: a.eps,
        init: a.init.into(),
        step_rule: a.step.into(),
        seed: a.seed,
        smoothing: SmoothingConfig::new(a.smoothing)?,
        ..FWConfig::default()
    };
    let FWOutcome { classifier, trace } = run_frank_wolfe(
        &a.metric,
        &split.search_marginals,
        &split.search_labels,
        a.k,
        &cfg,
    )?;

    let clf_path = PathBuf::from(format!("{}.classifier.json", a.out.display()));
    let trace_path = PathBuf::from(format!("{}.trace.tsv", a.out.display()));
    save_classifier(&classifier, &clf_path)?;
    save_trace(&trace, &trace_path)?;
    println!(
        "final {} = {:.12} after {} iterations ({} components, stop: {:?})",
        a.metric,
        trace.final_objective(),
        trace.iterations(),
        classifier.components().len(),
        trace.stop
    );
    eprintln!("wrote {} and {}", clf_path.display(), trace_path.display());
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let mut rng = seeded_rng(a.seed, 0);
    let (m, rows): (usize, Vec<Vec<u32>>) = if let Some(pi_path) = &a.pi {
        let pi = load_marginals(pi_path, None)?;
        let rows = (0..pi.n())
            .map(|i| {
                let dense = pi.to_dense_row(i);
                let kh = madow_sample(&dense, &mut rng)?;
                if let Some(k) = a.k {
                    if kh.count() != k {
                        return Err(Error::BudgetViolation(format!(
                            "row {i} sums to {} but --k is {k}",
                            kh.count()
                        )));
                    }
                }
                Ok(kh.ones().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        (pi.m(), rows)
    } else {
        let clf_path = a.classifier.as_ref().expect("clap group guarantees source");
        let marg_path = a.marginals.as_ref().expect("clap enforces --marginals");
        let rclf = load_classifier(clf_path)?;
        if let Some(k) = a.k {
            if rclf.k() != k {
                return Err(Error::InvalidBudget { k, m: rclf.m() });
            }
        }
        let marginals = load_marginals(marg_path, None)?;
        if marginals.m() != rclf.m() {
            return Err(Error::Shape(format!(
                "classifier has m={}, marginals have m={}",
                rclf.m(),
                marginals.m()
            )));
        }
        let fallbacks = rclf.fallback_orders();
        let rows = (0..marginals.n())
            .map(|i| {
                let (idx, val) = marginals.row(i);
                let pi = rclf.fractional_row_with(idx, val, &fallbacks);
                Ok(madow_sample(&pi, &mut rng)?.ones().to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        (rclf.m(), rows)
    };
    let preds = PredictionMatrix::from_rows(m, rows)?;
    save_predictions(&preds, &a.out)?;
    println!("wrote {} predictions to {}", preds.n(), a.out.display());
    Ok(())
}

fn resolve_distribution(source: &str) -> Result<DiscreteDistribution> {
    match source {
        "builtin:appendixE-A" => Ok(DiscreteDistribution::coupling_example_a()),
        "builtin:appendixE-B" => Ok(DiscreteDistribution::coupling_example_b()),
        other if other.starts_with("builtin:") => Err(Error::InvalidInput(format!(
            "unknown built-in distribution {other:?}"
        ))),
        path => load_distribution(Path::new(path)),
    }
}

fn cmd_oracle(a: OracleArgs) -> Result<()> {
    if a.check_appendix_e {
        let witness = coupling_witness()?;
        println!("{witness}");
        if !witness.holds() {
            return Err(Error::InvalidInput(
                "coupling example failed to reproduce its reference optima".into(),
            ));
        }
        return Ok(());
    }
    let metric = a.metric.expect("clap enforces --metric");
    let k = a.k.expect("clap enforces --k");
    let dist = resolve_distribution(a.dist.as_deref().expect("clap enforces --dist"))?;
    let s = SmoothingConfig::new(a.smoothing)?;
    let (assignment, value) = best_deterministic(&metric, &dist, k, &s, a.limit)?;
    println!("value {value:.12}");
    for (p, combo) in assignment.iter().enumerate() {
        let joined = combo
            .iter()
            .map(|j| j.to_string())
            .collect::<Vec<_>>()
            .join(",");
        println!("point {p}: {joined}");
    }
    if a.randomized {
        let mix = best_randomized_vertex_fw(&metric, &dist, k, &s, a.vertex_iters, a.limit)?;
        println!("randomized value {:.12}", mix.value);
        for (w, assignment) in &mix.atoms {
            let shown = assignment
                .iter()
                .map(|combo| {
                    combo
                        .iter()
                        .map(|j| j.to_string())
                        .collect::<Vec<_>>()
                        .join(",")
                })
                .collect::<Vec<_>>()
                .join(" | ");
            println!("atom w={w:.6}: {shown}");
        }
    }
    Ok(())
}

fn cmd_mixed_sweep(a: MixedSweepArgs) -> Result<()> {
    let labels = load_labels(&a.labels)?;
    let marginals = load_marginals(&a.marginals, keep_top(a.kprime))?;
    let split = split_dataset(&labels, &marginals, a.split, a.seed)?;
    let smoothing = SmoothingConfig::new(a.smoothing)?;

    let mut lambdas = a.lambdas.clone();
    lambdas.sort_by(|x, y| x.partial_cmp(y).expect("blend weights are not NaN"));
    lambdas.dedup();

    let results: Vec<(f64, f64, f64)> = lambdas
        .par_iter()
        .map(|&lambda| {
            let metric = MetricId::Mixed {
                lambda,
                inner: Box::new(a.inner.clone()),
            };
            let cfg = FWConfig {
                max_iters: a.max_iters,
                stop_eps: a.eps,
                init: a.init.into(),
                step_rule: a.step.into(),
                seed: a.seed,
                smoothing,
                ..FWConfig::default()
            };
            let out = run_frank_wolfe(
                &metric,
                &split.search_marginals,
                &split.search_labels,
                a.k,
                &cfg,
            )?;
            let tensor = &out.trace.confusion;
            let instp = macro_value(&MetricId::InstancePrecision, tensor, &smoothing)?;
            let inner_val = macro_value(&a.inner, tensor, &smoothing)?;
            Ok((lambda, instp, inner_val))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tsv = format!("lambda\tinstp@{}\t{}@{}\n", a.k, a.inner, a.k);
    for (lambda, instp, inner_val) in &results {
        tsv.push_str(&format!("{lambda}\t{instp:.12}\t{inner_val:.12}\n"));
    }
    print!("{tsv}");
    let tsv_path = PathBuf::from(format!("{}.tsv", a.out.display()));
    let json_path = PathBuf::from(format!("{}.json", a.out.display()));
    write_file(&tsv_path, &tsv)?;
    let json = serde_json::json!({
        "k": a.k,
        "inner": a.inner.to_string(),
        "rows": results
            .iter()
            .map(|(lambda, instp, inner_val)| {
                serde_json::json!({
                    "lambda": lambda,
                    "instance_precision": instp,
                    "inner_value": inner_val,
                })
            })
            .collect::<Vec<_>>(),
    });
    write_file(&json_path, &format!("{:#}\n", json))?;
    eprintln!("wrote {} and {}", tsv_path.display(), json_path.display());
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let labels = load_labels(&a.labels)?;
    let smoothing = SmoothingConfig::new(a.smoothing)?;
    let metrics = if a.metrics.is_empty() {
        vec![
            HarnessMetric::Tensor(MetricId::InstancePrecision),
            HarnessMetric::InstanceRecall,
            HarnessMetric::Tensor(MetricId::Precision),
            HarnessMetric::Tensor(MetricId::Recall),
            HarnessMetric::Tensor(MetricId::f1()),
        ]
    } else {
        a.metrics.clone()
    };
    let pred_sets = a
        .predictions
        .iter()
        .map(|p| load_predictions(p))
        .collect::<Result<Vec<_>>>()?;
    let mut report = Report::default();
    for metric in &metrics {
        let values = pred_sets
            .iter()
            .map(|preds| evaluate_metric(metric, preds, &labels, a.k, &smoothing))
            .collect::<Result<Vec<f64>>>()?;
        let (mean, std) = mean_std(&values);
        report.push(&a.name, &format!("{metric}@{}", a.k), mean, std);
    }
    report
        .rows
        .sort_by(|x, y| x.strategy.cmp(&y.strategy).then(x.metric.cmp(&y.metric)));
    print!("{}", render_report(&report));
    if let Some(base) = &a.out {
        let (tsv, json) = save_report(&report, base)?;
        eprintln!("wrote {} and {}", tsv.display(), json.display());
    }
    Ok(())
}
