//! `qcr`: build factorization databases, train the lookup gate, reduce and
//! compare circuits, and benchmark the reduction strategies.
//!
//! Exit codes: 0 success, 1 circuits not equivalent, 2 usage or input error,
//! 3 training-data failure, 4 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use qcr_core::bench::{run_bench, BenchConfig};
use qcr_core::circuit::{parse_circuit, serialize_circuit};
use qcr_core::database::{extract_database, load_database, save_database, FactorDatabase};
use qcr_core::forest::{
    generate_training_data, load_forest, save_forest, train_forest, ForestParams, Label, RandomForest,
};
use qcr_core::graph::{build_graph_capped, graph_stats, DEFAULT_NODE_CAP};
use qcr_core::reducer::{reduce, verify_equivalence, ReducerConfig, Strategy, StrategyKind};
use qcr_core::{parse_gate_set, Circuit, Error, GateSet, PhaseTolerance};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "qcr", version, about = "Unitary-preserving quantum circuit length reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the compute graph and write its shortest factorizations.
    BuildDb(BuildDb),
    /// Train the random-forest lookup gate on database-labeled blocks.
    TrainClf(TrainClf),
    /// Reduce a circuit and write the verified result.
    Reduce(Reduce),
    /// Check two circuits for equivalence up to global phase.
    Verify(Verify),
    /// Paired timing runs of the strategies on random circuits.
    Bench(Bench),
}

#[derive(Args)]
struct GateSetArg {
    /// Gate-set config file, or `preset:<name>` (iontrap, nisq, clifford_t).
    #[arg(long)]
    gateset: String,
}

impl GateSetArg {
    fn load(&self) -> Result<GateSet, Failure> {
        if self.gateset.starts_with("preset:") {
            Ok(parse_gate_set(&self.gateset)?)
        } else {
            Ok(parse_gate_set(&read(Path::new(&self.gateset))?)?)
        }
    }
}

#[derive(Args)]
struct BuildDb {
    #[command(flatten)]
    gs: GateSetArg,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=8))]
    qubits: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=255))]
    depth: u64,
    #[arg(long)]
    out: PathBuf,
    /// Abort when the graph grows past this many nodes.
    #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
    node_cap: usize,
}

#[derive(Args)]
struct TrainClf {
    #[command(flatten)]
    gs: GateSetArg,
    #[arg(long)]
    db: PathBuf,
    /// Total labeled blocks; 20% are held out for evaluation.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    samples: u64,
    #[arg(long, env = "QCRS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    tau: f64,
    #[arg(long, default_value_t = 50)]
    trees: usize,
    #[arg(long, default_value_t = 12)]
    max_depth: usize,
    #[arg(long, default_value_t = 3)]
    min_block: usize,
    #[arg(long, default_value_t = 7)]
    max_block: usize,
}

#[derive(Args, Clone)]
struct LoopArgs {
    #[arg(long, default_value_t = 3)]
    min_block: usize,
    #[arg(long, default_value_t = 7)]
    max_block: usize,
    #[arg(long, default_value_t = 2000)]
    stall_limit: usize,
    #[arg(long, default_value_t = 500)]
    rs_samples: usize,
    #[arg(long, default_value_t = 4)]
    shuffle_attempts: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

impl LoopArgs {
    fn config(&self, seed: u64) -> Result<ReducerConfig, Failure> {
        Ok(ReducerConfig {
            subblock_len_range: (self.min_block, self.max_block),
            rs_samples_per_block: self.rs_samples,
            shuffle_attempts_per_iter: self.shuffle_attempts,
            stall_limit: self.stall_limit,
            tol: PhaseTolerance::new(self.tol)?,
            seed,
            ..Default::default()
        })
    }
}

#[derive(Args)]
struct Reduce {
    #[command(flatten)]
    gs: GateSetArg,
    #[arg(long)]
    circuit: PathBuf,
    #[arg(long, value_parser = parse_strategy)]
    strategy: StrategyKind,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, env = "QCRS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    target: Option<usize>,
    /// Wall-clock budget; runs with a budget are not reproducible.
    #[arg(long)]
    budget_sec: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Override the model's vote threshold.
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    looping: LoopArgs,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args)]
struct Verify {
    #[command(flatten)]
    gs: GateSetArg,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
}

#[derive(Args)]
struct Bench {
    #[command(flatten)]
    gs: GateSetArg,
    #[arg(long, default_value_t = 2)]
    qubits: usize,
    #[arg(long, default_value_t = 100)]
    len: usize,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy, default_value = "rs,dr,rf")]
    strategies: Vec<StrategyKind>,
    #[arg(long)]
    db: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Target length; defaults to half of `--len`.
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, env = "QCRS_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    looping: LoopArgs,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// An error with its exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Training(_) => 3,
            Error::Verification(_) => 4,
            _ => 2,
        };
        Self {
            code,
            msg: e.to_string(),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_circuit(path: &Path, gs: &GateSet) -> Result<Circuit, Failure> {
    parse_circuit(&read(path)?, gs).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_db(path: Option<&PathBuf>, gs: &GateSet, k: StrategyKind) -> Result<FactorDatabase, Failure> {
    let path = path.ok_or_else(|| Failure::usage(format!("strategy {k} requires --db")))?;
    Ok(load_database(path, gs)?)
}

fn load_model(path: Option<&PathBuf>, gs: &GateSet, tau: Option<f64>) -> Result<RandomForest, Failure> {
    let path = path.ok_or_else(|| Failure::usage("strategy rf requires --model"))?;
    let forest = load_forest(path)?;
    forest.check_gate_set(gs)?;
    Ok(match tau {
        Some(t) => forest.with_tau(t)?,
        None => forest,
    })
}

fn build_db(args: BuildDb) -> Result<(), Failure> {
    let gs = args.gs.load()?;
    let g = build_graph_capped(&gs, args.qubits as usize, args.depth as usize, args.node_cap)?;
    let stats = graph_stats(&g);
    let db = extract_database(&g);
    save_database(&db, &gs, &args.out)?;
    println!("nodes={} edges={}", stats.nodes, stats.edges);
    for (d, n) in stats.per_depth.iter().enumerate() {
        println!("depth {d}: {n}");
    }
    Ok(())
}

fn train_clf(args: TrainClf) -> Result<(), Failure> {
    let gs = args.gs.load()?;
    let db = load_database(&args.db, &gs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let samples = generate_training_data(
        &gs,
        &db,
        &mut rng,
        args.samples as usize,
        (args.min_block, args.max_block),
    )?;
    let split = samples.len() - samples.len() / 5;
    let (train, held_out) = samples.split_at(split);
    let params = ForestParams {
        n_trees: args.trees,
        max_depth: args.max_depth,
        features_per_split: None,
        tau: args.tau,
    };
    let forest = train_forest(train, params, &mut rng)?.bind(&gs)?;
    save_forest(&forest, &args.out)?;
    let (mut correct, mut tp, mut positives) = (0usize, 0usize, 0usize);
    for s in held_out {
        let open = forest.passes_gate(&s.features)?;
        let reducible = s.label == Label::Reducible;
        correct += usize::from(open == reducible);
        positives += usize::from(reducible);
        tp += usize::from(open && reducible);
    }
    let ratio = |a: usize, b: usize| if b == 0 { f64::NAN } else { a as f64 / b as f64 };
    println!("train={} held_out={}", train.len(), held_out.len());
    println!(
        "accuracy={:.4} recall={:.4} tau={}",
        ratio(correct, held_out.len()),
        ratio(tp, positives),
        forest.tau()
    );
    Ok(())
}

fn reduce_cmd(args: Reduce) -> Result<(), Failure> {
    let gs = args.gs.load()?;
    let c = load_circuit(&args.circuit, &gs)?;
    let db;
    let forest;
    let strategy = match args.strategy {
        StrategyKind::Rs => Strategy::Rs,
        StrategyKind::Dr => {
            db = load_db(args.db.as_ref(), &gs, args.strategy)?;
            Strategy::Dr(&db)
        }
        StrategyKind::Rf => {
            db = load_db(args.db.as_ref(), &gs, args.strategy)?;
            forest = load_model(args.model.as_ref(), &gs, args.tau)?;
            Strategy::Rf(&db, &forest)
        }
    };
    let budget = match args.budget_sec {
        Some(s) if !(s.is_finite() && s > 0.0) => return Err(Failure::usage("--budget-sec must be positive")),
        b => b.map(Duration::from_secs_f64),
    };
    let cfg = ReducerConfig {
        target_length: args.target,
        wall_clock_budget: budget,
        inject_fault: args.inject_fault,
        ..args.looping.config(args.seed)?
    };
    let (out, trace) = reduce(&c, &gs, strategy, &cfg)?;
    if !verify_equivalence(&c, &out, &gs, cfg.tol)? {
        return Err(Error::Verification("reduced circuit differs from the input".into()).into());
    }
    write(&args.out, serialize_circuit(&out, &gs))?;
    if let Some(path) = &args.trace {
        write(path, trace.to_csv())?;
    }
    println!("in={} out={} verified=true", c.len(), out.len());
    Ok(())
}

fn verify_cmd(args: Verify) -> Result<bool, Failure> {
    let gs = args.gs.load()?;
    let a = load_circuit(&args.a, &gs)?;
    let b = load_circuit(&args.b, &gs)?;
    let eq = verify_equivalence(&a, &b, &gs, PhaseTolerance::new(args.tol)?)?;
    println!("equivalent={eq}");
    Ok(eq)
}

fn bench_cmd(args: Bench) -> Result<(), Failure> {
    let gs = args.gs.load()?;
    let needs_db = args.strategies.iter().any(|&k| k != StrategyKind::Rs);
    let db = match needs_db {
        true => {
            let first = *args.strategies.iter().find(|&&k| k != StrategyKind::Rs).unwrap();
            Some(load_db(args.db.as_ref(), &gs, first)?)
        }
        false => None,
    };
    let forest = match args.strategies.contains(&StrategyKind::Rf) {
        true => Some(load_model(args.model.as_ref(), &gs, None)?),
        false => None,
    };
    let cfg = BenchConfig {
        qubits: args.qubits,
        length: args.len,
        runs: args.runs as usize,
        strategies: args.strategies.clone(),
        target: args.target,
        seed: args.seed,
        jobs: args.jobs,
        reducer: args.looping.config(args.seed)?,
    };
    let report = run_bench(&gs, db.as_ref(), forest.as_ref(), &cfg)?;
    write(&args.csv, report.to_csv())?;
    print!("{}", report.table());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildDb(a) => build_db(a).map(|()| true),
        Command::TrainClf(a) => train_clf(a).map(|()| true),
        Command::Reduce(a) => reduce_cmd(a).map(|()| true),
        Command::Verify(a) => verify_cmd(a),
        Command::Bench(a) => bench_cmd(a).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("qcr: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
