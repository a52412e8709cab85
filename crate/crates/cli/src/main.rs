//! `guidesynth` command line: realizability checking plus the offline
//! learning pipeline.

mod bench;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use guidesynth::arena::Verdict;
use guidesynth::autlab::{decompose, AutError, Automaton};
use guidesynth::explore::{run_timed, ExploreConfig, RunOutcome};
use guidesynth::featex::FeatureSpec;
use guidesynth::guide::{Baseline, Heuristic, Model, PairModel, RandomOrder, Reverse};
use guidesynth::learn::{
    self, labelled_corpus, mcts_decision, random_eval, rfe, state_score_eval, train_gbt, ClassScores, Dataset,
    GbtParams, GenConfig, LabelledGame, MctsConfig, PatternPools, DEFAULT_GAMMA, DEFAULT_ROW_CAP,
};
use guidesynth::ltl::{parse_ltl, Formula, Partition, DEFAULT_MAX_PROPS};
use guidesynth::psolve::{solve_full_with, ORACLE_NODE_BUDGET};

#[derive(Parser)]
#[command(
    name = "guidesynth",
    version,
    about = "LTL realizability with guided on-the-fly exploration"
)]
struct Cli {
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide realizability with guided exploration.
    Solve(SolveArgs),
    /// Decide realizability by building and solving the whole arena.
    Oracle(OracleArgs),
    /// Generate random specifications as JSON lines.
    Gen(GenArgs),
    /// Edge ground truth of one specification or an instance file.
    Gt(GtArgs),
    /// Build a pairwise training set from generated games.
    Dataset(DatasetArgs),
    /// Train a pairwise ranking model.
    Train(TrainArgs),
    /// Recursive feature elimination.
    Rfe(RfeArgs),
    /// State-wise scores of heuristics on generated games.
    Eval(EvalArgs),
    /// Compare heuristics on a set of instances.
    Bench(bench::BenchArgs),
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Environment propositions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "")]
    ins: Vec<String>,
    /// System propositions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "")]
    outs: Vec<String>,
    /// The LTL formula.
    #[arg(short = 'f', long)]
    formula: Option<String>,
    /// TLSF input (not supported; convert to explicit form first).
    #[arg(long)]
    tlsf: Option<PathBuf>,
    /// Accepted for compatibility; realizability is the only mode.
    #[arg(long)]
    realizability: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// baseline, reverse, random, model (bundled) or model:<path>.
    #[arg(long, default_value = "baseline")]
    heuristic: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Arena node budget.
    #[arg(long, default_value_t = 200_000)]
    budget: usize,
    /// Expansions per perspective before switching.
    #[arg(long, default_value_t = 4096)]
    stint: usize,
    /// Nodes reopened per backtrack round.
    #[arg(long, default_value_t = 8)]
    fanout: usize,
    #[arg(long)]
    no_merge: bool,
    /// Print a JSON run report instead of the verdict token.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = ORACLE_NODE_BUDGET)]
    budget: usize,
    #[arg(long)]
    no_merge: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Clone)]
struct GenOpts {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Template pool file; the bundled pools by default.
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    env_props: usize,
    #[arg(long, default_value_t = 2)]
    sys_props: usize,
    #[arg(long, default_value_t = 2)]
    max_disjuncts: usize,
    #[arg(long, default_value_t = 2)]
    max_conjuncts: usize,
}

impl GenOpts {
    fn config(&self) -> Result<GenConfig, CliError> {
        let pools = match &self.patterns {
            Some(p) => serde_json::from_str::<PatternPools>(&std::fs::read_to_string(p)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
            None => PatternPools::builtin(),
        };
        Ok(GenConfig {
            pools,
            max_disjuncts: self.max_disjuncts,
            max_conjuncts: self.max_conjuncts,
            env_props: self.env_props,
            sys_props: self.sys_props,
            seed: self.seed,
            ..GenConfig::default()
        })
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[command(flatten)]
    gen: GenOpts,
    /// Keep only specifications whose automaton has at most this many states.
    #[arg(long)]
    max_states: Option<usize>,
    /// Output file; stdout by default.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum GtMethod {
    Exact,
    Mcts,
}

#[derive(Args)]
struct GtArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Instance file (JSON lines from `gen`) instead of a single formula.
    #[arg(long)]
    instances: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    method: GtMethod,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 10_000)]
    iterations: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ORACLE_NODE_BUDGET)]
    budget: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CorpusOpts {
    /// Number of games.
    #[arg(long, default_value_t = 500)]
    games: usize,
    #[command(flatten)]
    gen: GenOpts,
    /// Automaton size cut for games.
    #[arg(long, default_value_t = 500)]
    max_states: usize,
    #[arg(long, default_value_t = ORACLE_NODE_BUDGET)]
    max_nodes: usize,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
}

impl CorpusOpts {
    fn build(&self) -> Result<Vec<LabelledGame>, CliError> {
        let cfg = self.gen.config()?;
        let corpus = labelled_corpus(&cfg, self.games, self.max_states, self.max_nodes, self.gamma)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        log::info!("{} labelled games", corpus.len());
        Ok(corpus.into_iter().map(|(_, g)| g).collect())
    }
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    corpus: CorpusOpts,
    /// Row cap per class.
    #[arg(long, default_value_t = DEFAULT_ROW_CAP)]
    cap: usize,
    /// Feature list file (one name per line); all features by default.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct GbtOpts {
    #[arg(long, default_value_t = 30)]
    trees: usize,
    #[arg(long, default_value_t = 2)]
    depth: usize,
    #[arg(long, default_value_t = 0.2)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5)]
    min_leaf: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

impl GbtOpts {
    fn params(&self) -> GbtParams {
        GbtParams {
            trees: self.trees,
            depth: self.depth,
            learning_rate: self.learning_rate,
            min_leaf: self.min_leaf,
            lambda: self.lambda,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset produced by `dataset`.
    #[arg(long)]
    data: PathBuf,
    /// Restrict to the features listed in this file.
    #[arg(long)]
    features: Option<PathBuf>,
    #[command(flatten)]
    gbt: GbtOpts,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct RfeArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 64)]
    target: usize,
    #[command(flatten)]
    gbt: GbtOpts,
    /// Where to write the surviving feature names.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    corpus: CorpusOpts,
    /// Heuristics to score, comma separated; `random` is the exact
    /// expectation of a uniform ranking.
    #[arg(long, value_delimiter = ',', default_value = "random,baseline,model")]
    heuristics: Vec<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Unsupported(String),
    Exhausted(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Unsupported(_) => 2,
            CliError::Exhausted(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Exhausted(m) => f.write_str(m),
            CliError::Unsupported(m) => write!(f, "unsupported: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

/// One specification as stored in instance files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub(crate) struct Instance {
    pub formula: String,
    pub ins: Vec<String>,
    pub outs: Vec<String>,
}

/// Parsed and checked specification.
pub(crate) struct Spec {
    pub formula: Formula,
    pub partition: Partition,
}

impl Instance {
    pub fn load(&self) -> Result<Spec, CliError> {
        let formula = parse_ltl(&self.formula).map_err(|e| CliError::Usage(format!("parse error: {e}")))?;
        // fragment errors name the offending subformula, so they go first
        decompose(&formula).map_err(|e| CliError::Unsupported(e.to_string()))?;
        let partition = Partition::from_names(&self.ins, &self.outs).map_err(|e| CliError::Usage(e.to_string()))?;
        partition
            .check(&formula, DEFAULT_MAX_PROPS)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if let Err(e) = Automaton::new(&formula, &partition) {
            return Err(aut_error(e));
        }
        Ok(Spec { formula, partition })
    }
}

pub(crate) fn aut_error(e: AutError) -> CliError {
    CliError::Unsupported(e.to_string())
}

impl SpecArgs {
    fn instance(&self) -> Result<Instance, CliError> {
        if let Some(p) = &self.tlsf {
            return Err(CliError::Usage(format!(
                "{}: TLSF input is not read natively; convert it to --ins/--outs/-f form with an external tool",
                p.display()
            )));
        }
        let formula = self
            .formula
            .clone()
            .ok_or_else(|| CliError::Usage("missing formula (-f)".into()))?;
        Ok(Instance {
            formula,
            ins: self.ins.clone(),
            outs: self.outs.clone(),
        })
    }
}

pub(crate) fn load_model(path: Option<&str>) -> Result<Arc<PairModel>, CliError> {
    let m = match path {
        None => PairModel::builtin(),
        Some(p) => PairModel::load(Path::new(p)).map_err(|e| CliError::Usage(format!("{p}: {e}")))?,
    };
    Ok(Arc::new(m))
}

/// Builds a heuristic from its command-line name.
pub(crate) fn heuristic(name: &str, seed: u64) -> Result<Box<dyn Heuristic + Send>, CliError> {
    Ok(match name {
        "baseline" => Box::new(Baseline),
        "reverse" => Box::new(Reverse),
        "random" => Box::new(RandomOrder::new(seed)),
        "model" => Box::new(Model::new(load_model(None)?)),
        _ => match name.strip_prefix("model:") {
            Some(p) => Box::new(Model::new(load_model(Some(p))?)),
            None => return Err(CliError::Usage(format!("unknown heuristic {name}"))),
        },
    })
}

/// Counters and timing of one guided run.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub(crate) struct RunReport {
    pub verdict: Verdict,
    pub time_ms: f64,
    pub env_nodes: usize,
    pub sys_nodes: usize,
    pub solves: usize,
    pub backtracks: usize,
    pub heuristic: String,
    pub seed: u64,
}

impl RunReport {
    pub fn new(out: &RunOutcome, time_ms: f64, heuristic: String, seed: u64) -> RunReport {
        RunReport {
            verdict: out.verdict,
            time_ms,
            env_nodes: out.stats.env_nodes,
            sys_nodes: out.stats.sys_nodes,
            solves: out.stats.solves,
            backtracks: out.stats.backtracks,
            heuristic,
            seed,
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

pub(crate) fn read_instances(path: &Path) -> Result<Vec<Instance>, CliError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| CliError::Usage(format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}

fn read_features(path: &Path) -> Result<Vec<FeatureSpec>, CliError> {
    std::fs::read_to_string(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|e: guidesynth::featex::UnknownFeature| CliError::Usage(e.to_string()))
        })
        .collect()
}

fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::read_jsonl(BufReader::new(File::open(path)?))
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn solve(a: SolveArgs) -> Result<(), CliError> {
    let spec = a.spec.instance()?.load()?;
    let mut h = heuristic(&a.heuristic, a.seed)?;
    let cfg = ExploreConfig {
        stint_budget: a.stint,
        fanout: a.fanout,
        max_nodes: a.budget,
        merging: !a.no_merge,
        ..ExploreConfig::default()
    };
    let (out, ms) = run_timed(&spec.formula, &spec.partition, cfg, h.as_mut()).map_err(aut_error)?;
    let report = RunReport::new(&out, ms, h.name(), a.seed);
    if a.json {
        println!("{}", serde_json::to_string(&report).expect("reports serialize"));
    } else {
        println!("{}", out.verdict);
    }
    log::info!(
        "{} env / {} sys nodes, {} solves, {} backtracks, {ms:.1} ms",
        report.env_nodes,
        report.sys_nodes,
        report.solves,
        report.backtracks
    );
    match out.verdict {
        Verdict::Unknown => Err(CliError::Exhausted(out.diagnostic.unwrap_or_else(|| "gave up".into()))),
        _ => Ok(()),
    }
}

fn oracle(a: OracleArgs) -> Result<(), CliError> {
    let spec = a.spec.instance()?.load()?;
    let start = std::time::Instant::now();
    let res = solve_full_with(&spec.formula, &spec.partition, !a.no_merge, a.budget);
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let (verdict, nodes, err) = match res {
        Ok((v, n)) => (v, Some(n), None),
        Err(e) => (Verdict::Unknown, None, Some(e.to_string())),
    };
    if a.json {
        let j = serde_json::json!({ "verdict": verdict, "timeMs": ms, "nodes": nodes });
        println!("{j}");
    } else {
        println!("{verdict}");
    }
    match err {
        Some(e) => Err(CliError::Exhausted(e)),
        None => Ok(()),
    }
}

fn gen(a: GenArgs) -> Result<(), CliError> {
    let cfg = a.gen.config()?;
    let mut w = output(a.out.as_deref())?;
    let mut kept = 0;
    let mut round = 0u64;
    while kept < a.count {
        let batch_cfg = GenConfig {
            seed: cfg.seed.wrapping_add(round.wrapping_mul(0x9E37_79B9)),
            ..cfg.clone()
        };
        let batch = learn::gen_formulas(&batch_cfg, a.count - kept).map_err(|e| CliError::Usage(e.to_string()))?;
        for s in batch {
            if a.max_states
                .is_some_and(|m| learn::gen::automaton_size(&s, m).is_none())
            {
                continue;
            }
            let names = |vs: &[guidesynth::ltl::Var]| vs.iter().map(|v| v.name().to_string()).collect();
            let inst = Instance {
                formula: s.text,
                ins: names(s.partition.env()),
                outs: names(s.partition.sys()),
            };
            writeln!(w, "{}", serde_json::to_string(&inst).expect("instances serialize"))?;
            kept += 1;
        }
        round += 1;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GtRow {
    edge_key: String,
    score: f64,
    tag: &'static str,
}

fn gt(a: GtArgs) -> Result<(), CliError> {
    let instances = match &a.instances {
        Some(p) => read_instances(p)?,
        None => vec![a.spec.instance()?],
    };
    let mut w = output(a.out.as_deref())?;
    let mcts = MctsConfig {
        gamma: a.gamma,
        iterations: a.iterations,
        seed: a.seed,
        ..MctsConfig::default()
    };
    for (i, inst) in instances.iter().enumerate() {
        let spec = inst.load()?;
        let mut g = LabelledGame::build(&spec.formula, &spec.partition, a.budget, a.gamma)
            .map_err(|e| CliError::Exhausted(format!("instance {i}: {e}")))?;
        let mut feat = guidesynth::featex::Featurizer::new();
        for d in g.decisions(&mut feat) {
            let scores = match a.method {
                GtMethod::Exact => d.gt.clone(),
                GtMethod::Mcts => mcts_decision(&g.view.game, &d, &mcts),
            };
            let tag = match a.method {
                GtMethod::Exact => "exact",
                GtMethod::Mcts => "mcts",
            };
            for (k, (&t, score)) in d.targets.iter().zip(scores).enumerate() {
                let prio = match d.edges[k].priority {
                    guidesynth::arena::NEUTRAL => "n".to_string(),
                    p => p.to_string(),
                };
                let row = GtRow {
                    edge_key: format!("{i}:{}->{t}@{prio}", d.source),
                    score,
                    tag,
                };
                writeln!(w, "{}", serde_json::to_string(&row).expect("rows serialize"))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn dataset(a: DatasetArgs) -> Result<(), CliError> {
    let specs = match &a.features {
        Some(p) => read_features(p)?,
        None => FeatureSpec::all(),
    };
    let mut games = a.corpus.build()?;
    let ds = learn::build_dataset(&mut games, &specs, a.cap, a.corpus.gen.seed);
    for (c, rows) in &ds.classes {
        log::info!("{}: {} rows", c.name(), rows.len());
    }
    let mut w = BufWriter::new(File::create(&a.out)?);
    ds.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut ds = read_dataset(&a.data)?;
    if let Some(p) = &a.features {
        let keep = read_features(p)?;
        if let Some(k) = keep.iter().find(|k| !ds.specs.contains(k)) {
            return Err(CliError::Usage(format!("feature {k} is not in the dataset")));
        }
        ds = ds.project(&keep);
    }
    let hp = a.gbt.params();
    let rows: std::collections::BTreeMap<&str, usize> = ds.classes.iter().map(|(c, r)| (c.name(), r.len())).collect();
    let meta = serde_json::json!({
        "rows": rows,
        "features": ds.specs.len(),
        "trees": hp.trees,
        "depth": hp.depth,
        "learningRate": hp.learning_rate,
        "minLeaf": hp.min_leaf,
        "lambda": hp.lambda,
    });
    let (model, _) = train_gbt(&ds, &hp, meta);
    model.save(&a.out).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(())
}

fn rfe_cmd(a: RfeArgs) -> Result<(), CliError> {
    let ds = read_dataset(&a.data)?;
    if a.target > ds.specs.len() {
        return Err(CliError::Usage(format!(
            "target {} exceeds the {} features of the dataset",
            a.target,
            ds.specs.len()
        )));
    }
    let kept = rfe(&ds, &a.gbt.params(), &ds.specs, a.target);
    let mut w = BufWriter::new(File::create(&a.out)?);
    for s in kept {
        writeln!(w, "{s}")?;
    }
    w.flush()?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut games = a.corpus.build()?;
    let mut results: Vec<(String, ClassScores)> = Vec::new();
    for name in &a.heuristics {
        let scores = if name == "random" {
            random_eval(&mut games)
        } else {
            let mut h = heuristic(name, a.corpus.gen.seed)?;
            state_score_eval(h.as_mut(), &mut games)
        };
        results.push((name.clone(), scores));
    }
    let classes = guidesynth::guide::StateClass::ALL;
    if a.json {
        let j: serde_json::Map<String, serde_json::Value> = results
            .iter()
            .map(|(n, s)| {
                let per: serde_json::Map<String, serde_json::Value> = classes
                    .iter()
                    .map(|c| {
                        let v =
                            serde_json::json!({ "mean": s.mean.get(c), "count": s.count.get(c).copied().unwrap_or(0) });
                        (c.name().to_string(), v)
                    })
                    .collect();
                (n.clone(), serde_json::Value::Object(per))
            })
            .collect();
        println!("{}", serde_json::Value::Object(j));
    } else {
        print!("{:<24}", "heuristic");
        for c in classes {
            print!("{:>10}", c.name());
        }
        println!();
        for (n, s) in &results {
            print!("{n:<24}");
            for c in &classes {
                match s.mean.get(c) {
                    Some(m) => print!("{m:>10.3}"),
                    None => print!("{:>10}", "-"),
                }
            }
            println!();
        }
        print!("{:<24}", "states");
        for c in &classes {
            print!(
                "{:>10}",
                results.first().and_then(|(_, s)| s.count.get(c)).copied().unwrap_or(0)
            );
        }
        println!();
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let res = match cli.cmd {
        Cmd::Solve(a) => solve(a),
        Cmd::Oracle(a) => oracle(a),
        Cmd::Gen(a) => gen(a),
        Cmd::Gt(a) => gt(a),
        Cmd::Dataset(a) => dataset(a),
        Cmd::Train(a) => train(a),
        Cmd::Rfe(a) => rfe_cmd(a),
        Cmd::Eval(a) => eval(a),
        Cmd::Bench(a) => bench::bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
