use std::path::{Path, PathBuf};

use mltrp::bound::{generalization_bound, BoundInputs, BoundReport};
use mltrp::cost::{cost1, cost2_exact, latency, sigmoid_weights};
use mltrp::learn::{auc, fit_logistic, sigmoid_prob, LogisticFit};
use mltrp::milp::{build_milp, export_lp};
use mltrp::opt::{c1_sweep, node_weights, sequential_pipeline, solve, sweep_csv, CostModel, Method, MltrpConfig, MltrpSolution};
use mltrp::sim::{simulate_route_cost, SimConfig, SimModel, SimReport};
use mltrp::trp::naive_route;
use mltrp::{DistanceMatrix, LabeledDataset, ModelParams, NodeSet, Route};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{read_distances, read_labeled, read_nodes, write_atomic, write_json};

pub const MODEL_FILE: &str = "model.json";
pub const ROUTE_FILE: &str = "route.json";
pub const ROUTE_CSV: &str = "route.csv";
pub const SOLUTION_FILE: &str = "solution.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const LP_FILE: &str = "model.lp";
pub const SIM_FILE: &str = "simulation.json";
pub const BOUND_FILE: &str = "bound.json";

/// Optional overrides for the bound calculator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundOverrides {
    /// Lower limit for `M1`; the fitted `‖λ*‖₂` is used when larger.
    pub m1: Option<f64>,
    /// Defaults to the largest node feature norm.
    pub m2: Option<f64>,
    pub cg: Option<f64>,
    pub eps: f64,
    /// Defaults to the training-set size.
    pub m: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub nodes: Option<PathBuf>,
    pub distances: Option<PathBuf>,
    pub mltrp: MltrpConfig,
    pub c1_grid: Option<Vec<f64>>,
    pub sim: SimConfig,
    pub bound: BoundOverrides,
    /// Route to simulate; the sequential route when absent.
    pub route: Option<Route>,
    pub out_dir: PathBuf,
    pub lp_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            train: None,
            test: None,
            nodes: None,
            distances: None,
            mltrp: MltrpConfig::new(1.0, 0.1),
            c1_grid: None,
            sim: SimConfig::new(100_000, 0),
            bound: BoundOverrides {
                eps: 0.05,
                ..BoundOverrides::default()
            },
            route: None,
            out_dir: out_dir.into(),
            lp_out: None,
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str, command: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::Validation(format!("{command} needs --{flag}")))
}

struct Instance {
    train: LabeledDataset,
    nodes: NodeSet,
    dist: DistanceMatrix,
}

fn load_instance(cfg: &RunConfig, command: &str) -> Result<Instance> {
    let train = read_labeled(required(&cfg.train, "train", command)?)?;
    let nodes = read_nodes(required(&cfg.nodes, "nodes", command)?)?;
    let dist = read_distances(required(&cfg.distances, "distances", command)?)?;
    check_instance(&train, &nodes, &dist)?;
    Ok(Instance { train, nodes, dist })
}

fn check_instance(train: &LabeledDataset, nodes: &NodeSet, dist: &DistanceMatrix) -> Result<()> {
    if nodes.dim() != train.dim() {
        return Err(CliError::Validation(format!(
            "node features have {} columns but training features have {}",
            nodes.dim(),
            train.dim()
        )));
    }
    if nodes.len() != dist.len() {
        return Err(CliError::Validation(format!(
            "{} nodes but the distance matrix is {}x{}",
            nodes.len(),
            dist.len(),
            dist.len()
        )));
    }
    Ok(())
}

fn load_test(cfg: &RunConfig, dim: usize) -> Result<Option<LabeledDataset>> {
    let Some(path) = &cfg.test else { return Ok(None) };
    let test = read_labeled(path)?;
    if test.dim() != dim {
        return Err(CliError::Validation(format!(
            "test features have {} columns but training features have {dim}",
            test.dim()
        )));
    }
    Ok(Some(test))
}

fn scores(lambda: &ModelParams, data: &LabeledDataset) -> Result<Vec<f64>> {
    Ok(data.features().iter().map(|x| lambda.score(x)).collect::<mltrp::Result<_>>()?)
}

fn probabilities(lambda: &ModelParams, nodes: &NodeSet) -> Result<Vec<f64>> {
    Ok(sigmoid_weights(lambda, nodes)?.as_slice().to_vec())
}

/// AUC, or `None` when the data has a single class.
fn auc_of(lambda: &ModelParams, data: &LabeledDataset) -> Result<Option<f64>> {
    match auc(&scores(lambda, data)?, data.labels()) {
        Ok(v) => Ok(Some(v)),
        Err(mltrp::Error::SingleClass) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub dim: usize,
    pub c2: f64,
    pub lambda: ModelParams,
    pub training_error: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub train_probabilities: Vec<f64>,
    pub train_auc: Option<f64>,
    pub test_auc: Option<f64>,
}

pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.mltrp.validate()?;
    let train = read_labeled(required(&cfg.train, "train", "train")?)?;
    let test = load_test(cfg, train.dim())?;
    let fit: LogisticFit = fit_logistic(&train, &cfg.mltrp.train)?;
    let train_probabilities = train
        .features()
        .iter()
        .map(|x| sigmoid_prob(&fit.params, x))
        .collect::<mltrp::Result<_>>()?;
    let out = ModelOutput {
        dim: train.dim(),
        c2: cfg.mltrp.c2(),
        train_auc: auc_of(&fit.params, &train)?,
        test_auc: test.as_ref().map(|t| auc_of(&fit.params, t)).transpose()?.flatten(),
        lambda: fit.params,
        training_error: fit.objective,
        grad_norm: fit.grad_norm,
        iterations: fit.iterations,
        converged: fit.converged,
        train_probabilities,
    };
    let path = cfg.out(MODEL_FILE);
    write_json(&path, &out)?;
    Ok(vec![path])
}

/// Costs of one route under the fitted failure probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteCosts {
    /// Dash-joined, closing at the start.
    pub route: String,
    pub order: Route,
    pub cost1: f64,
    pub cost2_exact: f64,
}

fn route_costs(route: &Route, lambda: &ModelParams, nodes: &NodeSet, dist: &DistanceMatrix) -> Result<RouteCosts> {
    let w = sigmoid_weights(lambda, nodes)?;
    Ok(RouteCosts {
        route: route.to_string(),
        order: route.clone(),
        cost1: cost1(route, &w, dist)?,
        cost2_exact: cost2_exact(route, lambda, nodes, dist)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteOutput {
    pub cost_model: CostModel,
    pub c2: f64,
    pub lambda: ModelParams,
    pub training_error: f64,
    pub probabilities: Vec<f64>,
    /// Route weights under the cost model.
    pub weights: Vec<f64>,
    /// Per node, in input order.
    pub latencies: Vec<f64>,
    pub traversal_cost: f64,
    pub sequential: RouteCosts,
    /// Visits nodes by decreasing weight, ignoring distances.
    pub naive: RouteCosts,
}

pub fn cmd_route(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.mltrp.validate()?;
    let inst = load_instance(cfg, "route")?;
    let seq = sequential_pipeline(&inst.train, &inst.nodes, &inst.dist, &cfg.mltrp)?;
    let w = node_weights(&seq.lambda, &inst.nodes, cfg.mltrp.cost_model)?;
    let p = probabilities(&seq.lambda, &inst.nodes)?;
    let lat = latency(&seq.route, &inst.dist)?;
    let naive = naive_route(&w);
    let out = RouteOutput {
        cost_model: cfg.mltrp.cost_model,
        c2: cfg.mltrp.c2(),
        training_error: seq.training_error,
        weights: w.as_slice().to_vec(),
        latencies: lat.clone(),
        traversal_cost: seq.traversal_cost,
        sequential: route_costs(&seq.route, &seq.lambda, &inst.nodes, &inst.dist)?,
        naive: route_costs(&naive, &seq.lambda, &inst.nodes, &inst.dist)?,
        lambda: seq.lambda,
        probabilities: p.clone(),
    };
    let mut csv = String::from("position,node,latency,probability,weight\n");
    for (pos, &i) in seq.route.order().iter().enumerate() {
        csv.push_str(&format!("{},{},{},{},{}\n", pos + 1, i + 1, lat[i], p[i], w.as_slice()[i]));
    }
    let json = cfg.out(ROUTE_FILE);
    let table = cfg.out(ROUTE_CSV);
    write_json(&json, &out)?;
    write_atomic(&table, csv.as_bytes())?;
    Ok(vec![json, table])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionOutput {
    pub method: Method,
    pub cost_model: CostModel,
    pub c1: f64,
    pub c2: f64,
    pub solution: MltrpSolution,
    pub costs: RouteCosts,
    pub probabilities: Vec<f64>,
    pub train_auc: Option<f64>,
    pub test_auc: Option<f64>,
}

pub fn cmd_simultaneous(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.mltrp.validate()?;
    let inst = load_instance(cfg, "simultaneous")?;
    let test = load_test(cfg, inst.train.dim())?;
    let sol = solve(&inst.train, &inst.nodes, &inst.dist, &cfg.mltrp, None)?;
    let out = SolutionOutput {
        method: cfg.mltrp.method,
        cost_model: cfg.mltrp.cost_model,
        c1: cfg.mltrp.c1,
        c2: cfg.mltrp.c2(),
        costs: route_costs(&sol.route, &sol.lambda, &inst.nodes, &inst.dist)?,
        probabilities: probabilities(&sol.lambda, &inst.nodes)?,
        train_auc: auc_of(&sol.lambda, &inst.train)?,
        test_auc: test.as_ref().map(|t| auc_of(&sol.lambda, t)).transpose()?.flatten(),
        solution: sol,
    };
    let path = cfg.out(SOLUTION_FILE);
    write_json(&path, &out)?;
    let mut written = vec![path];
    if let Some(grid) = &cfg.c1_grid {
        let rows = c1_sweep(&inst.train, test.as_ref(), &inst.nodes, &inst.dist, &cfg.mltrp, grid, None)?;
        let path = cfg.out(SWEEP_FILE);
        write_atomic(&path, sweep_csv(&rows).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

/// LP text for the flow formulation at the sequentially fitted weights.
pub fn cmd_export_milp(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.mltrp.validate()?;
    let inst = load_instance(cfg, "export-milp")?;
    let fit = fit_logistic(&inst.train, &cfg.mltrp.train)?;
    let w = node_weights(&fit.params, &inst.nodes, cfg.mltrp.cost_model)?;
    let lp = export_lp(&build_milp(&w, &inst.dist)?);
    let path = cfg.lp_out.clone().unwrap_or_else(|| cfg.out(LP_FILE));
    write_atomic(&path, lp.as_bytes())?;
    Ok(vec![path])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub route: String,
    pub probabilities: Vec<f64>,
    pub cost1: SimReport,
    pub cost2: SimReport,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.mltrp.validate()?;
    cfg.sim.validate()?;
    let inst = load_instance(cfg, "simulate")?;
    let fit = fit_logistic(&inst.train, &cfg.mltrp.train)?;
    let route = match &cfg.route {
        Some(r) if r.len() != inst.dist.len() => {
            return Err(CliError::Validation(format!(
                "--route visits {} nodes but the instance has {}",
                r.len(),
                inst.dist.len()
            )))
        }
        Some(r) => r.clone(),
        None => sequential_pipeline(&inst.train, &inst.nodes, &inst.dist, &cfg.mltrp)?.route,
    };
    let p = probabilities(&fit.params, &inst.nodes)?;
    let out = SimulationOutput {
        route: route.to_string(),
        cost1: simulate_route_cost(&route, &p, &inst.dist, SimModel::Cost1, &cfg.sim)?,
        cost2: simulate_route_cost(&route, &p, &inst.dist, SimModel::Cost2, &cfg.sim)?,
        probabilities: p,
    };
    let path = cfg.out(SIM_FILE);
    write_json(&path, &out)?;
    Ok(vec![path])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOutput {
    /// `‖λ*‖₂` of the fitted model, when training data was given.
    pub lambda_norm: Option<f64>,
    pub report: BoundReport,
}

pub fn cmd_bound(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let nodes = read_nodes(required(&cfg.nodes, "nodes", "bound")?)?;
    let dist = read_distances(required(&cfg.distances, "distances", "bound")?)?;
    let train = cfg.train.as_deref().map(read_labeled).transpose()?;
    if let Some(t) = &train {
        check_instance(t, &nodes, &dist)?;
        cfg.mltrp.validate()?;
    }
    let lambda_norm = train
        .as_ref()
        .map(|t| fit_logistic(t, &cfg.mltrp.train).map(|f| f.params.norm()))
        .transpose()?;
    let m1 = match (lambda_norm, cfg.bound.m1) {
        (Some(n), Some(u)) => n.max(u),
        (Some(n), None) => n,
        (None, Some(u)) => u,
        (None, None) => return Err(CliError::Validation("bound needs --m1 or --train".into())),
    };
    let m2 = cfg
        .bound
        .m2
        .unwrap_or_else(|| nodes.nodes().iter().map(|x| x.norm()).fold(0.0, f64::max));
    let m = match (cfg.bound.m, &train) {
        (Some(m), _) => m,
        (None, Some(t)) => t.len() as u64,
        (None, None) => return Err(CliError::Validation("bound needs --m or --train".into())),
    };
    let cg = cfg.bound.cg.ok_or_else(|| CliError::Validation("bound needs --cg".into()))?;
    let inputs = BoundInputs {
        m1,
        m2,
        cg,
        eps: cfg.bound.eps,
        m,
        nodes,
        dist,
    };
    let out = BoundOutput {
        lambda_norm,
        report: generalization_bound(&inputs)?,
    };
    let path = cfg.out(BOUND_FILE);
    write_json(&path, &out)?;
    Ok(vec![path])
}
