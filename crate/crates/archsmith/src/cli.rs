//! Command-line interface tying the modules into the four-step
//! pipeline: search → aggregate → extrapolate → plan, plus scoring,
//! frontier/Pareto analysis, and log/submission validation.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::aggregate::{
    aggregate_exponential_multidataset, aggregate_n0, aggregate_n1, aggregate_n2, kmeans_cluster,
    rank_architectures, PoolRecord, RankedPool, MULTIDATASET_LAMBDA, N2_LAMBDA,
};
use crate::analysis::{
    fit_frontier, fit_isoflop_parabola, frontier_delta, generalization_gap, march_of_9s,
    normalized_score, pareto_frontier, vsr, FrontierFit, ScoreContext,
};
use crate::arch::{format_architecture, parse_architecture, Architecture, Primitive, PrimitivePool};
use crate::extrapolate::{extrapolate, stack, stretch, PatternOrigin, StackFill};
use crate::protocol::{LineProcess, ProposeRequest, ProposeResponse};
use crate::proxy::{FitnessDirection, FitnessRecord, FitnessSource};
use crate::scale::{
    flops_per_step, load_preset, steps_for_budget, LayerCounts, PerLayerFlops, PRESET_NAMES,
};
use crate::search::{
    run_greedy, verify_log, Evaluator, Limits, MutatingProposer, Proposer, RunLog, SearchError,
    SearchTask, SyntheticEvaluator,
};
use crate::workspace::{
    load_task, read_pool_file, read_run_log_file, read_submission, write_pool, write_run_log_file,
    EvaluatorSpec, TaskManifest, Workspace,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN_ERROR: i32 = 1;
pub const EXIT_USAGE_ERROR: i32 = 2;

const WIRE_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Parser)]
#[command(name = "archsmith", version, about = "Hybrid architecture search and scaling toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run greedy searches over one or more seeds and write JSONL logs.
    Search(SearchArgs),
    /// Collapse a scored pool into a base architecture.
    Aggregate(AggregateArgs),
    /// Scale a base architecture to a target parameter budget.
    Extrapolate(ExtrapolateArgs),
    /// Compute per-budget training step counts for a layer profile.
    Plan(PlanArgs),
    /// Scoring metrics: ns, phi, vsr, gap.
    Score(ScoreArgs),
    /// Fit isoFLOP parabolas and the compute-optimal frontier from CSV.
    Frontier(FrontierArgs),
    /// Extract the Pareto frontier from a latency/loss CSV.
    Pareto(ParetoArgs),
    /// Check a submission file against a task manifest.
    ValidateSubmission(ValidateArgs),
    /// Re-check tree-shape and greedy-frontier invariants of a run log.
    VerifyLog(VerifyLogArgs),
}

#[derive(Args)]
struct SearchArgs {
    /// Task directory containing task.json.
    #[arg(long)]
    task: PathBuf,
    /// Seeds: "7", "1,2,5", or inclusive range "1..10".
    #[arg(long, default_value = "0")]
    seeds: String,
    /// "builtin:mutate" or "exec:<program> [args...]".
    #[arg(long, default_value = "builtin:mutate")]
    proposer: String,
    /// Override the manifest's max step count.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Concurrent seed runs; defaults to $ARCHSMITH_JOBS, then 1.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AggregateMethod {
    /// Centroid-nearest member of the best k-means cluster.
    N0,
    /// Unweighted layer-wise mode over the top records.
    N1,
    /// exp(-lambda*rank)-weighted layer-wise mode.
    N2,
    /// Cross-dataset exponential aggregation with equal dataset weight.
    Multi,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Maximize,
    Minimize,
}

impl From<DirectionArg> for FitnessDirection {
    fn from(d: DirectionArg) -> FitnessDirection {
        match d {
            DirectionArg::Maximize => FitnessDirection::Maximize,
            DirectionArg::Minimize => FitnessDirection::Minimize,
        }
    }
}

#[derive(Args)]
struct AggregateArgs {
    /// Pool JSONL file ({"arch","val","test","agent","seed","dataset"}).
    #[arg(long)]
    pool: PathBuf,
    #[arg(long, value_enum)]
    method: AggregateMethod,
    #[arg(long, value_enum, default_value = "maximize")]
    direction: DirectionArg,
    /// Cluster count for n0.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Records taken per (ranked) pool for n1/n2/multi.
    #[arg(long, default_value_t = 10)]
    top_n: usize,
    /// Decay rate; defaults to 0.1 for n2 and 0.5 for multi.
    #[arg(long)]
    lambda: Option<f64>,
    /// RNG seed (k-means seeding).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the aggregated architecture here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Stacked,
    Stretched,
}

#[derive(Args)]
struct ExtrapolateArgs {
    /// File holding the base architecture tokens.
    #[arg(long, conflicts_with = "arch")]
    base: Option<PathBuf>,
    /// Base architecture tokens inline.
    #[arg(long)]
    arch: Option<String>,
    /// Scale preset name (e.g. 1B-2prim).
    #[arg(long)]
    config: String,
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Target non-embedding parameter count, e.g. 1.0e9.
    #[arg(long)]
    target_params: f64,
    /// Stack remainder fill: prefix, suffix, or a primitive token.
    #[arg(long, default_value = "prefix")]
    fill: String,
    /// Exact depth override; skips the target-params depth search.
    #[arg(long)]
    depth: Option<usize>,
    /// Write <out>.txt (compact + exploded) and <out>.json (summary).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    /// Scale preset name.
    #[arg(long)]
    config: String,
    /// Layer counts, e.g. "A=10,M=19" or "A=9,M=17,Mb=26".
    #[arg(long)]
    layers: String,
    /// Comma-separated FLOP budgets, e.g. "2e19,4e19".
    #[arg(long)]
    budgets: String,
}

#[derive(Subcommand)]
enum ScoreCommand {
    /// Normalized score via the march of 9s.
    Ns {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        sota: f64,
        #[arg(long)]
        opt: f64,
    },
    /// March of 9s: -log10(|s - opt|).
    Phi {
        #[arg(long)]
        s: f64,
        #[arg(long)]
        opt: f64,
    },
    /// Valid submission rate.
    Vsr {
        #[arg(long)]
        valid: u64,
        #[arg(long)]
        total: u64,
    },
    /// Generalization gap between best explored and submitted fitness.
    Gap {
        #[arg(long)]
        best: f64,
        #[arg(long)]
        submitted: f64,
        #[arg(long, value_enum, default_value = "maximize")]
        direction: DirectionArg,
    },
}

#[derive(Args)]
struct ScoreArgs {
    #[command(subcommand)]
    metric: ScoreCommand,
}

#[derive(Args)]
struct FrontierArgs {
    /// CSV with header budget_flops,model_size,val_loss.
    #[arg(long)]
    input: PathBuf,
    /// Baseline CSV in the same format for the delta columns.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Write the q,m,dq,dm CSV here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParetoArgs {
    /// CSV with header latency_ms,val_loss.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    task: PathBuf,
    #[arg(long)]
    file: PathBuf,
}

#[derive(Args)]
struct VerifyLogArgs {
    /// Run-log JSONL file.
    log: PathBuf,
}

/// Formats a float with six significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..=8).contains(&exp) {
        format!("{x:.5e}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE_ERROR,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Search(args) => cmd_search(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Extrapolate(args) => cmd_extrapolate(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Score(args) => cmd_score(args),
        Command::Frontier(args) => cmd_frontier(args),
        Command::Pareto(args) => cmd_pareto(args),
        Command::ValidateSubmission(args) => cmd_validate(args),
        Command::VerifyLog(args) => cmd_verify_log(args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_DOMAIN_ERROR
        }
    }
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| format!("bad seed range {text:?}"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| format!("bad seed range {text:?}"))?;
        if lo > hi {
            return Err(format!("empty seed range {text:?}"));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| format!("bad seed {s:?}")))
        .collect()
}

/// External proposer speaking the line protocol.
struct ProcessProposer {
    proc: LineProcess,
}

impl Proposer for ProcessProposer {
    fn propose(&mut self, req: &ProposeRequest) -> Result<ProposeResponse, String> {
        self.proc.propose(req).map_err(|e| e.to_string())
    }
}

/// External evaluator speaking the line protocol.
struct ProcessEvaluator {
    proc: LineProcess,
    task_id: String,
}

impl Evaluator for ProcessEvaluator {
    fn evaluate(&mut self, arch: &Architecture, step: u64) -> Result<(f64, f64), String> {
        self.proc
            .evaluate(arch, &self.task_id, step)
            .map(|rec| (rec.val_fitness, rec.test_fitness))
            .map_err(|e| e.to_string())
    }
}

fn spawn_line_process(command: &str) -> Result<LineProcess, String> {
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or("empty command")?;
    let args: Vec<String> = parts.map(str::to_string).collect();
    LineProcess::spawn(program, &args, WIRE_TIMEOUT).map_err(|e| e.to_string())
}

fn make_proposer(spec: &str, manifest: &TaskManifest, seed: u64) -> Result<Box<dyn Proposer>, String> {
    if spec == "builtin:mutate" {
        Ok(Box::new(MutatingProposer::new(manifest.pool.clone(), manifest.length, seed)))
    } else if let Some(command) = spec.strip_prefix("exec:") {
        Ok(Box::new(ProcessProposer { proc: spawn_line_process(command)? }))
    } else {
        Err(format!("unknown proposer {spec:?}; use builtin:mutate or exec:<command>"))
    }
}

fn make_evaluator(manifest: &TaskManifest) -> Result<Box<dyn Evaluator>, String> {
    match &manifest.evaluator {
        EvaluatorSpec::Synthetic { seed } => {
            Ok(Box::new(SyntheticEvaluator { seed: *seed, direction: manifest.direction }))
        }
        EvaluatorSpec::External { address } => Ok(Box::new(ProcessEvaluator {
            proc: spawn_line_process(address)?,
            task_id: manifest.task_id.clone(),
        })),
    }
}

fn run_one_seed(
    manifest: &TaskManifest,
    proposer_spec: &str,
    limits: Limits,
    seed: u64,
) -> Result<RunLog, String> {
    let task = SearchTask {
        task_id: manifest.task_id.clone(),
        pool: manifest.pool.clone(),
        length: manifest.length,
        direction: manifest.direction,
        draft_count: manifest.draft_count,
    };
    let mut proposer = make_proposer(proposer_spec, manifest, seed)?;
    let mut evaluator = make_evaluator(manifest)?;
    match run_greedy(&task, proposer.as_mut(), evaluator.as_mut(), limits, seed) {
        Ok(log) => Ok(log),
        Err(SearchError::EvaluatorFailure { reason, partial }) => {
            eprintln!("warning: seed {seed}: evaluator failed ({reason}); keeping partial log");
            Ok(*partial)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_search(args: SearchArgs) -> Result<(), String> {
    let ws = Workspace::open(&args.task).map_err(|e| e.to_string())?;
    let manifest = &ws.manifest;
    let seeds = parse_seeds(&args.seeds)?;
    let mut limits = manifest.limits;
    if let Some(max_steps) = args.max_steps {
        limits.max_steps = max_steps;
    }
    let jobs = args
        .jobs
        .or_else(|| std::env::var("ARCHSMITH_JOBS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(1)
        .max(1);

    let mut logs: Vec<(u64, RunLog)> = Vec::with_capacity(seeds.len());
    if jobs == 1 {
        for &seed in &seeds {
            logs.push((seed, run_one_seed(manifest, &args.proposer, limits, seed)?));
        }
    } else {
        let mut results: Vec<Result<(u64, RunLog), String>> = Vec::new();
        for chunk in seeds.chunks(jobs) {
            let batch: Vec<Result<(u64, RunLog), String>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&seed| {
                        let proposer_spec = &args.proposer;
                        scope.spawn(move || {
                            run_one_seed(manifest, proposer_spec, limits, seed)
                                .map(|log| (seed, log))
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("seed thread panicked")).collect()
            });
            results.extend(batch);
        }
        for result in results {
            logs.push(result?);
        }
    }
    logs.sort_by_key(|(seed, _)| *seed);

    let mut pool_records: Vec<PoolRecord> = Vec::new();
    println!("seed\tnodes\tvalid\tbest_val\tbest_test");
    for (seed, log) in &logs {
        let path = ws.logs_dir().join(format!("run-{seed:04}.jsonl"));
        write_run_log_file(&path, log).map_err(|e| e.to_string())?;
        let valid = log.nodes.iter().filter(|n| n.valid).count();
        let best = log.best_val_node.and_then(|id| log.nodes.iter().find(|n| n.id == id));
        let (best_val, best_test) = best
            .map(|n| {
                (fmt_sig(n.val_fitness.unwrap_or(f64::NAN)), fmt_sig(n.test_fitness.unwrap_or(f64::NAN)))
            })
            .unwrap_or_else(|| ("-".into(), "-".into()));
        println!("{seed}\t{}\t{valid}\t{best_val}\t{best_test}", log.nodes.len());
        for node in log.nodes.iter().filter(|n| n.valid) {
            pool_records.push(PoolRecord {
                arch: node.arch.clone(),
                val: node.val_fitness.unwrap(),
                test: node.test_fitness.unwrap(),
                agent: args.proposer.clone(),
                seed: *seed,
                dataset: manifest.task_id.clone(),
            });
        }
    }
    let pool_path = ws.pools_dir().join("pool.jsonl");
    let mut file = fs::File::create(&pool_path).map_err(|e| e.to_string())?;
    write_pool(&mut file, &pool_records).map_err(|e| e.to_string())?;
    eprintln!("wrote {} logs and {}", logs.len(), pool_path.display());
    Ok(())
}

/// Converts pool-file records into fitness records, inferring the
/// primitive pool and layer length from the data.
fn pool_from_records(
    records: &[PoolRecord],
) -> Result<(Vec<(String, FitnessRecord)>, PrimitivePool, usize), String> {
    if records.is_empty() {
        return Err("pool file is empty".into());
    }
    let mut members: Vec<Primitive> = Vec::new();
    for rec in records {
        for tok in rec.arch.split_whitespace() {
            let p = Primitive::from_token(tok).ok_or(format!("unknown token {tok:?}"))?;
            if !members.contains(&p) {
                members.push(p);
            }
        }
    }
    members.sort();
    // a degenerate single-primitive pool still needs a valid pool object
    if members.len() == 1 {
        members = Primitive::ALL.to_vec();
    }
    let pool = PrimitivePool::new(&members).map_err(|e| e.to_string())?;
    let length = records[0].arch.split_whitespace().count();
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let arch = parse_architecture(&rec.arch, &pool, length)
            .map_err(|e| format!("record {:?}: {e}", rec.arch))?;
        out.push((
            rec.dataset.clone(),
            FitnessRecord {
                architecture: arch,
                val_fitness: rec.val,
                test_fitness: rec.test,
                source: FitnessSource::External,
                seed: rec.seed,
            },
        ));
    }
    Ok((out, pool, length))
}

fn cmd_aggregate(args: AggregateArgs) -> Result<(), String> {
    let records = read_pool_file(&args.pool).map_err(|e| e.to_string())?;
    let (tagged, prim_pool, _length) = pool_from_records(&records)?;
    let direction: FitnessDirection = args.direction.into();
    let all: Vec<FitnessRecord> = tagged.iter().map(|(_, r)| r.clone()).collect();

    let result = match args.method {
        AggregateMethod::N0 => {
            let ranked = rank_architectures(&all, direction, "pool").map_err(|e| e.to_string())?;
            let assign = kmeans_cluster(&ranked, &prim_pool, args.k, args.seed)
                .map_err(|e| e.to_string())?;
            aggregate_n0(&assign, &ranked, &prim_pool).map_err(|e| e.to_string())?
        }
        AggregateMethod::N1 => {
            let ranked = rank_architectures(&all, direction, "pool").map_err(|e| e.to_string())?;
            aggregate_n1(&ranked, args.top_n).map_err(|e| e.to_string())?
        }
        AggregateMethod::N2 => {
            let ranked = rank_architectures(&all, direction, "pool").map_err(|e| e.to_string())?;
            let lambda = args.lambda.unwrap_or(N2_LAMBDA);
            aggregate_n2(&ranked, args.top_n, lambda).map_err(|e| e.to_string())?
        }
        AggregateMethod::Multi => {
            let mut by_dataset: BTreeMap<String, Vec<FitnessRecord>> = BTreeMap::new();
            for (dataset, rec) in &tagged {
                by_dataset.entry(dataset.clone()).or_default().push(rec.clone());
            }
            let pools: Vec<RankedPool> = by_dataset
                .iter()
                .map(|(dataset, recs)| rank_architectures(recs, direction, dataset))
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let lambda = args.lambda.unwrap_or(MULTIDATASET_LAMBDA);
            aggregate_exponential_multidataset(&pools, args.top_n, lambda)
                .map_err(|e| e.to_string())?
        }
    };
    let text = format_architecture(&result);
    if let Some(out) = &args.out {
        fs::write(out, format!("{text}\n")).map_err(|e| e.to_string())?;
    }
    println!("{text}");
    Ok(())
}

fn parse_fill(text: &str) -> Result<StackFill, String> {
    match text {
        "prefix" => Ok(StackFill::Prefix),
        "suffix" => Ok(StackFill::Suffix),
        tok => Primitive::from_token(tok)
            .map(StackFill::Constant)
            .ok_or(format!("bad fill {tok:?}; use prefix, suffix, or a primitive token")),
    }
}

fn cmd_extrapolate(args: ExtrapolateArgs) -> Result<(), String> {
    let text = match (&args.base, &args.arch) {
        (Some(path), None) => fs::read_to_string(path).map_err(|e| e.to_string())?,
        (None, Some(inline)) => inline.clone(),
        _ => return Err("provide exactly one of --base or --arch".into()),
    };
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let pool = PrimitivePool::three_primitive();
    let base =
        parse_architecture(&tokens.join(" "), &pool, tokens.len()).map_err(|e| e.to_string())?;
    let cfg = load_preset(&args.config)
        .map_err(|_| format!("unknown preset {:?}; available: {}", args.config, PRESET_NAMES.join(", ")))?;
    if args.target_params <= 0.0 && args.depth.is_none() {
        return Err("target params must be positive".into());
    }
    let mode = match args.mode {
        ModeArg::Stacked => PatternOrigin::Stacked,
        ModeArg::Stretched => PatternOrigin::Stretched,
    };
    let fill = parse_fill(&args.fill)?;
    let pattern = match (mode, args.depth) {
        (PatternOrigin::Stacked, Some(depth)) => stack(&base, depth, fill).map_err(|e| e.to_string())?,
        (PatternOrigin::Stretched, Some(depth)) => stretch(&base, depth).map_err(|e| e.to_string())?,
        (_, None) => {
            let target = args.target_params as u128;
            if mode == PatternOrigin::Stacked && fill != StackFill::Prefix {
                let depth = crate::extrapolate::choose_depth(&base, &cfg, mode, target)
                    .map_err(|e| e.to_string())?;
                stack(&base, depth, fill).map_err(|e| e.to_string())?
            } else {
                extrapolate(&base, &cfg, mode, target).map_err(|e| e.to_string())?
            }
        }
        (PatternOrigin::Literal, _) => unreachable!(),
    };
    let summary = pattern.summary(&cfg);
    let summary_json = serde_json::to_string_pretty(&summary).unwrap();
    println!("{}", pattern.compact());
    println!("{}", pattern.exploded());
    println!("{summary_json}");
    if let Some(out) = &args.out {
        fs::write(
            out.with_extension("txt"),
            format!("{}\n{}\n", pattern.compact(), pattern.exploded()),
        )
        .map_err(|e| e.to_string())?;
        fs::write(out.with_extension("json"), format!("{summary_json}\n"))
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn parse_layer_counts(text: &str) -> Result<LayerCounts, String> {
    let mut counts = LayerCounts::default();
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or(format!("bad layer spec {part:?}; expected A=10,M=19[,Mb=0]"))?;
        let n: u64 = value.trim().parse().map_err(|_| format!("bad count {value:?}"))?;
        match key.trim() {
            "A" => counts.attn = n,
            "M" => counts.mlp = n,
            "Mb" => counts.ssm = n,
            other => return Err(format!("unknown layer key {other:?}; use A, M, Mb")),
        }
    }
    if counts.total() == 0 {
        return Err("layer counts sum to zero".into());
    }
    Ok(counts)
}

fn parse_budgets(text: &str) -> Result<Vec<u128>, String> {
    text.split(',')
        .map(|s| {
            let v: f64 = s.trim().parse().map_err(|_| format!("bad budget {s:?}"))?;
            if v <= 0.0 {
                return Err(format!("budget {s:?} must be positive"));
            }
            Ok(v as u128)
        })
        .collect()
}

fn cmd_plan(args: PlanArgs) -> Result<(), String> {
    let cfg = load_preset(&args.config)
        .map_err(|_| format!("unknown preset {:?}; available: {}", args.config, PRESET_NAMES.join(", ")))?;
    let counts = parse_layer_counts(&args.layers)?;
    let budgets = parse_budgets(&args.budgets)?;
    let per_layer = PerLayerFlops::for_scale(&cfg);
    let c_step = flops_per_step(&counts, &per_layer, cfg.tokens_per_step);
    let steps: Vec<String> = budgets
        .iter()
        .map(|&budget| steps_for_budget(budget, c_step).to_string())
        .collect();
    eprintln!("c_step = {c_step} FLOPs");
    println!("{}", steps.join(","));
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<(), String> {
    let value = match args.metric {
        ScoreCommand::Ns { s, min, sota, opt } => {
            // clamp the singularity at the optimum rather than erroring
            let s = if s == opt {
                eprintln!("warning: s equals s_opt; clamping |s - s_opt| to 1e-12");
                opt - 1e-12
            } else {
                s
            };
            let ctx = ScoreContext {
                s_min: min,
                s_sota: sota,
                s_opt: opt,
                direction: FitnessDirection::Maximize,
            };
            normalized_score(s, &ctx).map_err(|e| e.to_string())?
        }
        ScoreCommand::Phi { s, opt } => {
            let s = if s == opt {
                eprintln!("warning: s equals s_opt; clamping |s - s_opt| to 1e-12");
                opt - 1e-12
            } else {
                s
            };
            march_of_9s(s, opt).map_err(|e| e.to_string())?
        }
        ScoreCommand::Vsr { valid, total } => {
            if valid > total {
                return Err(format!("valid ({valid}) exceeds total ({total})"));
            }
            vsr(valid, total).map_err(|e| e.to_string())?
        }
        ScoreCommand::Gap { best, submitted, direction } => {
            generalization_gap(best, submitted, direction.into())
        }
    };
    println!("{}", fmt_sig(value));
    Ok(())
}

fn read_csv_rows(path: &Path, expected_header: &str) -> Result<Vec<Vec<f64>>, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty CSV")?;
    if header.trim() != expected_header {
        return Err(format!("expected header {expected_header:?}, found {header:?}"));
    }
    let columns = expected_header.split(',').count();
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse().map_err(|_| format!("bad number in row {line:?}")))
            .collect::<Result<_, String>>()?;
        if fields.len() != columns {
            return Err(format!("row {line:?} has {} fields, expected {columns}", fields.len()));
        }
        rows.push(fields);
    }
    Ok(rows)
}

fn fit_frontier_from_csv(path: &Path) -> Result<FrontierFit, String> {
    let rows = read_csv_rows(path, "budget_flops,model_size,val_loss")?;
    let mut by_budget: BTreeMap<u128, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        by_budget.entry(row[0] as u128).or_default().push((row[1], row[2]));
    }
    let mut minima: Vec<(f64, f64)> = Vec::new();
    for (budget, points) in by_budget {
        let parabola = fit_isoflop_parabola(&points)
            .map_err(|e| format!("budget {budget}: {e}"))?;
        minima.push((budget as f64, parabola.y_min));
    }
    fit_frontier(&minima).map_err(|e| e.to_string())
}

fn cmd_frontier(args: FrontierArgs) -> Result<(), String> {
    let fit = fit_frontier_from_csv(&args.input)?;
    let (dq, dm) = match &args.baseline {
        Some(path) => frontier_delta(&fit, &fit_frontier_from_csv(path)?),
        None => (0.0, 0.0),
    };
    let csv = format!(
        "q,m,dq,dm\n{},{},{},{}\n",
        fmt_sig(fit.q),
        fmt_sig(fit.m),
        fmt_sig(dq),
        fmt_sig(dm)
    );
    if let Some(out) = &args.out {
        fs::write(out, &csv).map_err(|e| e.to_string())?;
    }
    print!("{csv}");
    Ok(())
}

fn cmd_pareto(args: ParetoArgs) -> Result<(), String> {
    let rows = read_csv_rows(&args.input, "latency_ms,val_loss")?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
    let frontier = pareto_frontier(&points);
    let mut csv = String::from("latency_ms,val_loss\n");
    for (latency, loss) in frontier {
        csv.push_str(&format!("{},{}\n", fmt_sig(latency), fmt_sig(loss)));
    }
    if let Some(out) = &args.out {
        fs::write(out, &csv).map_err(|e| e.to_string())?;
    }
    print!("{csv}");
    Ok(())
}

fn cmd_validate(args: ValidateArgs) -> Result<(), String> {
    let manifest = load_task(&args.task).map_err(|e| e.to_string())?;
    let arch = read_submission(&args.file, &manifest).map_err(|e| e.to_string())?;
    println!("valid: {}", format_architecture(&arch));
    Ok(())
}

fn cmd_verify_log(args: VerifyLogArgs) -> Result<(), String> {
    let log = read_run_log_file(&args.log).map_err(|e| e.to_string())?;
    verify_log(&log)?;
    println!(
        "ok: {} nodes, {} valid, best_val_node {:?}",
        log.nodes.len(),
        log.nodes.iter().filter(|n| n.valid).count(),
        log.best_val_node
    );
    Ok(())
}
