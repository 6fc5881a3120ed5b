//! `dissim`: generate datasets, build similarity graphs, compute batch
//! decompositions and similarity-bounded subsets, and run experiments.
//!
//! Exit codes: 0 success, 1 infeasible instance or failed verification,
//! 2 invalid input, 3 round budget exhausted.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use dissim_core::dataset::summary;
use dissim_core::decomposition::{check_k_good, decompose_greedy, decompose_lll, tau_exact, EXACT_CAP};
use dissim_core::harness::{self, ExperimentPlan, PlanFile, Preset, DEFAULT_LLL_THETA, LLL_ROUNDS_PER_POINT};
use dissim_core::io;
use dissim_core::subsets::{
    check_similarity_budget, nsim_exact, nsim_greedy_direct, nsim_greedy_kway, nsim_upper_grid,
};
use dissim_core::{generate, CategoricalSpec, Error, GeneratorConfig, Order, SimilarityGraph};

#[derive(Parser)]
#[command(name = "dissim", version, about = "Batch decompositions and similarity-bounded subsets of random datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random dataset as CSV.
    Gen(GenArgs),
    /// Build the similarity graph and print degree statistics.
    Graph(GraphArgs),
    /// Compute a k-good batch decomposition.
    Decompose(DecomposeArgs),
    /// Compute a subset with similarity at most k-1, or the grid upper bound.
    Subset(SubsetArgs),
    /// Check a decomposition or subset file against a dataset.
    Verify(VerifyArgs),
    /// Run an experiment preset and write JSONL records.
    Experiment(ExperimentArgs),
    /// Summarize experiment records.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator config (TOML with [model], [density], [categorical], [rng]).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    r_n: Option<f64>,
    /// Probability that a point is corrupted.
    #[arg(long)]
    p0: Option<f64>,
    /// Uniform categorical law over this many symbols.
    #[arg(long)]
    cat_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the effective config here.
    #[arg(long)]
    write_config: Option<PathBuf>,
}

#[derive(Args)]
struct Instance {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    r_n: f64,
}

#[derive(Args)]
struct GraphArgs {
    #[command(flatten)]
    instance: Instance,
    /// Write the edge list `u,v` here.
    #[arg(long)]
    edges: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecomposeAlgo {
    Greedy,
    Lll,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Natural,
    Random,
    DegreeDesc,
}

impl OrderArg {
    fn order(self, seed: u64) -> Order {
        match self {
            OrderArg::Natural => Order::Natural,
            OrderArg::Random => Order::Random { seed },
            OrderArg::DegreeDesc => Order::DegreeDesc,
        }
    }
}

#[derive(Args)]
struct DecomposeArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "greedy")]
    algo: DecomposeAlgo,
    #[arg(long, value_enum, default_value = "natural")]
    order: OrderArg,
    #[arg(long, default_value_t = DEFAULT_LLL_THETA)]
    theta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to 50 n.
    #[arg(long)]
    max_rounds: Option<usize>,
    /// Write `idx,batch` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubsetAlgo {
    Direct,
    Kway,
    Exact,
    Upper,
}

#[derive(Args)]
struct SubsetArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "direct")]
    algo: SubsetAlgo,
    #[arg(long, value_enum, default_value = "natural")]
    order: OrderArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the index list here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: Instance,
    /// Decomposition file (`idx,batch`); needs --k.
    #[arg(long, requires = "k")]
    decomposition: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    /// Subset file; its header carries k.
    #[arg(long)]
    subset: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_parser = parse_preset)]
    preset: Preset,
    /// Overrides for the preset plan.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Base seed of the trial seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding records.jsonl.
    #[arg(long = "in")]
    input: PathBuf,
    /// Defaults to the input directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    Preset::from_name(s).ok_or_else(|| {
        let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
        format!("unknown preset `{s}`, expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Graph(a) => graph(a),
        Command::Decompose(a) => decompose(a),
        Command::Subset(a) => subset(a),
        Command::Verify(a) => verify(a),
        Command::Experiment(a) => experiment(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => 1,
        Error::BudgetExhausted { .. } => 3,
        _ => 2,
    }
}

type Outcome = dissim_core::Result<ExitCode>;

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn load(instance: &Instance) -> dissim_core::Result<(dissim_core::Dataset, SimilarityGraph)> {
    let ds = io::load_csv(&instance.data)?;
    let g = SimilarityGraph::build(&ds, instance.r_n)?;
    Ok((ds, g))
}

fn gen(a: GenArgs) -> Outcome {
    let mut cfg = match &a.config {
        Some(path) => io::load_config(path)?,
        None => GeneratorConfig::uniform(1000, 2, 0.05, 4, 0),
    };
    cfg.n = a.n.unwrap_or(cfg.n);
    cfg.d = a.d.unwrap_or(cfg.d);
    cfg.r_n = a.r_n.unwrap_or(cfg.r_n);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    if let Some(p0) = a.p0 {
        cfg = cfg.with_corruption(p0);
    }
    if let Some(cat_size) = a.cat_size {
        cfg.categorical = CategoricalSpec::Uniform { cat_size };
    }
    let ds = generate(&cfg)?;
    io::save_csv(&ds, &a.out)?;
    if let Some(path) = &a.write_config {
        io::save_config(&cfg, path)?;
    }
    print_json(&serde_json::to_value(summary(&ds))?);
    Ok(ExitCode::SUCCESS)
}

fn graph(a: GraphArgs) -> Outcome {
    let (ds, g) = load(&a.instance)?;
    let stats = g.degree_stats();
    let edges = g.edges();
    if let Some(path) = &a.edges {
        io::write_edges(edges.iter().copied(), std::fs::File::create(path)?)?;
    }
    print_json(&json!({
        "n": ds.n(),
        "r_n": a.instance.r_n,
        "edges": edges.len(),
        "max_degree": stats.max_degree,
        "argmax": stats.argmax,
        "mean_degree": stats.mean_degree,
        "histogram": stats.histogram,
    }));
    Ok(ExitCode::SUCCESS)
}

fn decompose(a: DecomposeArgs) -> Outcome {
    let (ds, g) = load(&a.instance)?;
    let mut out = json!({ "k": a.k });
    let dec = match a.algo {
        DecomposeAlgo::Greedy => {
            out["algo"] = json!("greedy");
            decompose_greedy(&g, &ds, a.k, a.order.order(a.seed))?
        }
        DecomposeAlgo::Lll => {
            let max_rounds = a.max_rounds.unwrap_or(LLL_ROUNDS_PER_POINT * ds.n());
            let res = decompose_lll(&g, &ds, a.k, a.theta, a.seed, max_rounds)?;
            out["algo"] = json!("lll");
            out["q"] = json!(res.q);
            out["resamples"] = json!(res.resamples);
            out["repairs"] = json!(res.repairs);
            res.decomposition
        }
        DecomposeAlgo::Exact => {
            out["algo"] = json!("exact");
            tau_exact(&g, &ds, a.k, EXACT_CAP)?.1
        }
    };
    let report = check_k_good(&g, &ds, &dec)?;
    out["size"] = json!(dec.size());
    out["valid"] = json!(report.valid);
    if let Some(path) = &a.out {
        io::save_decomposition(&dec, ds.n(), path)?;
    }
    print_json(&out);
    Ok(if report.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn subset(a: SubsetArgs) -> Outcome {
    let (ds, g) = load(&a.instance)?;
    let result = match a.algo {
        SubsetAlgo::Upper => {
            if a.out.is_some() {
                return Err(Error::InvalidInput("--out is not available with --algo upper".into()));
            }
            let bound = nsim_upper_grid(&ds, a.k, a.instance.r_n)?;
            print_json(&json!({ "algo": "upper", "k": a.k, "bound": bound }));
            return Ok(ExitCode::SUCCESS);
        }
        SubsetAlgo::Direct => nsim_greedy_direct(&g, a.k, a.order.order(a.seed))?,
        SubsetAlgo::Kway => nsim_greedy_kway(&g, a.k, a.seed)?,
        SubsetAlgo::Exact => nsim_exact(&g, a.k, EXACT_CAP)?,
    };
    if let Some(path) = &a.out {
        io::save_subset(&result, path)?;
    }
    print_json(&json!({ "algo": result.method.name(), "k": result.k, "size": result.size() }));
    Ok(ExitCode::SUCCESS)
}

fn verify(a: VerifyArgs) -> Outcome {
    if a.decomposition.is_none() && a.subset.is_none() {
        return Err(Error::InvalidInput("give --decomposition and/or --subset".into()));
    }
    let (ds, g) = load(&a.instance)?;
    let mut ok = true;
    if let (Some(path), Some(k)) = (&a.decomposition, a.k) {
        let dec = io::load_decomposition(path, k)?;
        let report = check_k_good(&g, &ds, &dec)?;
        ok &= report.valid;
        print!("{report}");
    }
    if let Some(path) = &a.subset {
        let s = io::load_subset(path)?;
        let check = check_similarity_budget(&g, &s.indices, s.k)?;
        ok &= check.within_budget;
        println!(
            "subset k={} size={} within_budget={} max_observed={}",
            s.k,
            s.size(),
            check.within_budget,
            check.max_observed
        );
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn experiment(a: ExperimentArgs) -> Outcome {
    let mut plan = ExperimentPlan::preset(a.preset);
    if let Some(path) = &a.config {
        plan = PlanFile::parse(&std::fs::read_to_string(path)?)?.apply(plan);
    }
    plan.base_seed = a.seed.unwrap_or(plan.base_seed);
    plan.trials = a.trials.unwrap_or(plan.trials);
    std::fs::create_dir_all(&a.out)?;
    std::fs::write(a.out.join("plan.json"), serde_json::to_string_pretty(&plan)?)?;
    let count = harness::run_to_dir(&plan, a.jobs, &a.out)?;
    print_json(&json!({
        "preset": plan.preset.name(),
        "records": count,
        "out": a.out.join(harness::RECORDS_FILE),
    }));
    Ok(ExitCode::SUCCESS)
}

fn report(a: ReportArgs) -> Outcome {
    let records = harness::read_records(&a.input.join(harness::RECORDS_FILE))?;
    let out = a.out.unwrap_or_else(|| a.input.clone());
    for v in harness::report(&records, &out)? {
        println!("{v}");
    }
    Ok(ExitCode::SUCCESS)
}
