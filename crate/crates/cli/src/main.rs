use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mltrp::opt::{CostModel, Method};
use mltrp::sim::SimConfig;
use mltrp::Route;
use mltrp_cli::commands::{self, RunConfig};
use mltrp_cli::demo::{cmd_demo, DemoKind};
use mltrp_cli::CliError;

#[derive(Parser)]
#[command(name = "mltrp", version, about = "Failure-probability estimation and repair-crew routing")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Training CSV with header f1,...,fd,label
    #[arg(long, global = true)]
    train: Option<PathBuf>,
    /// Held-out CSV in the training format
    #[arg(long, global = true)]
    test: Option<PathBuf>,
    /// Node feature CSV with header f1,...,fd; the first row is the depot
    #[arg(long, global = true)]
    nodes: Option<PathBuf>,
    /// Headerless M x M distance CSV
    #[arg(long, global = true)]
    distances: Option<PathBuf>,

    /// Weight of the traversal cost in the joint objective
    #[arg(long, global = true)]
    c1: Option<f64>,
    /// L2 penalty on the model coefficients
    #[arg(long, global = true, default_value_t = 0.1)]
    c2: f64,
    #[arg(long, global = true, value_enum, default_value_t = CostModelArg::Cost1)]
    cost_model: CostModelArg,
    #[arg(long, global = true, value_enum)]
    method: Option<MethodArg>,
    /// Comma-separated C1 values for a sweep
    #[arg(long, global = true, value_delimiter = ',')]
    c1_grid: Option<Vec<f64>>,

    /// Seed for demo data and simulation
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte Carlo trials
    #[arg(long, global = true, default_value_t = 100_000)]
    trials: u64,
    /// Route to simulate, e.g. 1-3-2-4-1; defaults to the sequential route
    #[arg(long, global = true)]
    route: Option<String>,

    /// Cap on the coefficient norm; raised to the fitted norm if smaller
    #[arg(long, global = true)]
    m1: Option<f64>,
    /// Cap on node feature norms; defaults to the largest one
    #[arg(long, global = true)]
    m2: Option<f64>,
    /// Cap on the traversal cost, required by `bound`
    #[arg(long, global = true)]
    cg: Option<f64>,
    /// Deviation between true and empirical risk
    #[arg(long, global = true, default_value_t = 0.05)]
    eps: f64,
    /// Training-set size for the bound; defaults to the rows in --train
    #[arg(long, global = true)]
    m: Option<u64>,

    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// LP file path for export-milp; defaults to <out-dir>/model.lp
    #[arg(long, global = true)]
    lp_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the logistic model and write model.json
    Train,
    /// Fit, then route by the fitted probabilities
    Route,
    /// Fit and route jointly; add --c1-grid for a sweep
    Simultaneous,
    /// Write the flow MILP as an LP file
    ExportMilp,
    /// Generate and solve a seeded illustration
    Demo {
        #[arg(value_enum)]
        which: DemoArg,
    },
    /// Monte Carlo check of both cost models on a route
    Simulate,
    /// Evaluate the generalization bound
    Bound,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostModelArg {
    Cost1,
    Cost2,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sequential,
    Nm,
    Am,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoArg {
    #[value(alias = "four_node")]
    FourNode,
    #[value(alias = "six_node")]
    SixNode,
}

fn parse_route(s: &str) -> Result<Route, CliError> {
    let bad = || CliError::Validation(format!("cannot parse route '{s}'; expected e.g. 1-3-2-1"));
    let mut ids = s
        .split('-')
        .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<Vec<_>, _>>()?;
    if ids.len() > 1 && ids.first() == ids.last() {
        ids.pop();
    }
    Ok(Route::from_one_based(&ids)?)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    let demo_c1 = match &cli.command {
        Command::Demo { which } => Some(demo_kind(*which).default_c1()),
        _ => None,
    };
    let mut cfg = RunConfig::new(&cli.out_dir);
    cfg.train = cli.train;
    cfg.test = cli.test;
    cfg.nodes = cli.nodes;
    cfg.distances = cli.distances;
    cfg.mltrp.c1 = cli.c1.or(demo_c1).unwrap_or(cfg.mltrp.c1);
    cfg.mltrp.train.c2 = cli.c2;
    cfg.mltrp.cost_model = match cli.cost_model {
        CostModelArg::Cost1 => CostModel::Cost1,
        CostModelArg::Cost2 => CostModel::Cost2Surrogate,
    };
    cfg.mltrp.method = match cli.method {
        Some(MethodArg::Sequential) => Method::Sequential,
        Some(MethodArg::Am) => Method::Alternating,
        Some(MethodArg::Nm) | None => Method::NelderMead,
    };
    cfg.c1_grid = cli.c1_grid;
    cfg.sim = SimConfig::new(cli.trials, cli.seed);
    cfg.bound.m1 = cli.m1;
    cfg.bound.m2 = cli.m2;
    cfg.bound.cg = cli.cg;
    cfg.bound.eps = cli.eps;
    cfg.bound.m = cli.m;
    cfg.route = cli.route.as_deref().map(parse_route).transpose()?;
    cfg.lp_out = cli.lp_out;

    match cli.command {
        Command::Train => commands::cmd_train(&cfg),
        Command::Route => commands::cmd_route(&cfg),
        Command::Simultaneous => commands::cmd_simultaneous(&cfg),
        Command::ExportMilp => commands::cmd_export_milp(&cfg),
        Command::Demo { which } => cmd_demo(demo_kind(which), cli.seed, &cfg),
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Bound => commands::cmd_bound(&cfg),
    }
}

fn demo_kind(d: DemoArg) -> DemoKind {
    match d {
        DemoArg::FourNode => DemoKind::FourNode,
        DemoArg::SixNode => DemoKind::SixNode,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
