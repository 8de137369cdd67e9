//! Sequential and simultaneous pipelines.
//!
//! The simultaneous objective is
//! `TrainingError(λ) + C1 · min_π GraphTraversalCost(π, λ)`, with the inner
//! minimum solved exactly by the subset DP. It is non-convex and has kinks
//! wherever the optimal route changes, so both iterative solvers return local
//! minimizers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{cost1, cost2_surrogate_weights, latency, node_scores, sigmoid_weights};
use crate::error::{Error, Result};
use crate::learn::{auc, fit_logistic, loss_and_grad, minimize_armijo, training_error, TrainConfig};
use crate::math::{dot, sigmoid, softplus};
use crate::trp::{solve_weighted_trp_dp, TrpSolution};
use crate::types::{DistanceMatrix, LabeledDataset, ModelParams, NodeSet, NodeWeights, Route};

/// How node scores become route weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostModel {
    /// Failure probabilities `σ(λ·x̃)`: expected failures before the visit.
    Cost1,
    /// Softplus weights `ln(1 + e^{λ·x̃})`: log-surrogate of first-failure cost.
    Cost2Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sequential,
    NelderMead,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex; `None` uses `0.1 · max(1, ‖λ0‖∞)`.
    pub initial_scale: Option<f64>,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    pub max_evals: usize,
    /// Stop once the largest vertex-to-vertex distance falls below this.
    pub diameter_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_scale: None,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_evals: 4000,
            diameter_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MltrpConfig {
    pub c1: f64,
    pub cost_model: CostModel,
    pub method: Method,
    /// Trainer settings; `train.c2` is the ℓ2 coefficient `C2`.
    pub train: TrainConfig,
    pub nm: NelderMeadOptions,
    /// Maximum number of alternating rounds `T`.
    pub am_iterations: usize,
}

impl MltrpConfig {
    pub fn new(c1: f64, c2: f64) -> Self {
        Self {
            c1,
            cost_model: CostModel::Cost1,
            method: Method::Sequential,
            train: TrainConfig::new(c2),
            nm: NelderMeadOptions::default(),
            am_iterations: 10,
        }
    }

    pub fn c2(&self) -> f64 {
        self.train.c2
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 >= 0.0 && self.c1.is_finite()) {
            return Err(Error::InvalidInput(format!("C1 must be >= 0, got {}", self.c1)));
        }
        if self.am_iterations == 0 {
            return Err(Error::InvalidInput("alternating minimization needs T >= 1".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MltrpSolution {
    pub lambda: ModelParams,
    pub route: Route,
    pub training_error: f64,
    /// Optimal traversal cost at `lambda` under the configured cost model.
    pub traversal_cost: f64,
    pub combined_objective: f64,
    /// Best objective per iteration (NM) or `Obj(λ_t, π_t)` per round (AM).
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub route_solves: usize,
    pub lambda_solves: usize,
}

/// Route weights induced by `lambda`.
pub fn node_weights(lambda: &ModelParams, nodes: &NodeSet, model: CostModel) -> Result<NodeWeights> {
    match model {
        CostModel::Cost1 => sigmoid_weights(lambda, nodes),
        CostModel::Cost2Surrogate => cost2_surrogate_weights(lambda, nodes),
    }
}

/// `GraphTraversalCost(π, λ)` under the given cost model.
pub fn traversal_cost(
    lambda: &ModelParams,
    route: &Route,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    model: CostModel,
) -> Result<f64> {
    cost1(route, &node_weights(lambda, nodes, model)?, dist)
}

/// `Obj(λ, π) = TrainingError(λ) + C1 · GraphTraversalCost(π, λ)`.
pub fn obj(
    lambda: &ModelParams,
    route: &Route,
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
) -> Result<f64> {
    let train = training_error(lambda, data, cfg.c2())?;
    if cfg.c1 == 0.0 {
        return Ok(train);
    }
    Ok(train + cfg.c1 * traversal_cost(lambda, route, nodes, dist, cfg.cost_model)?)
}

/// Gradient of `Obj(·, π)` for a fixed route.
pub fn obj_gradient(
    lambda: &ModelParams,
    route: &Route,
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
) -> Result<Vec<f64>> {
    check_dims(lambda, data, nodes)?;
    let lat = latency(route, dist)?;
    Ok(RouteObjective::new(data, nodes, &lat, cfg).eval(lambda.as_slice()).1)
}

/// Obj for a fixed route with precomputed latencies.
struct RouteObjective<'a> {
    data: &'a LabeledDataset,
    nodes: &'a NodeSet,
    latencies: &'a [f64],
    c1: f64,
    c2: f64,
    model: CostModel,
}

impl<'a> RouteObjective<'a> {
    fn new(data: &'a LabeledDataset, nodes: &'a NodeSet, latencies: &'a [f64], cfg: &MltrpConfig) -> Self {
        Self {
            data,
            nodes,
            latencies,
            c1: cfg.c1,
            c2: cfg.c2(),
            model: cfg.cost_model,
        }
    }

    fn eval(&self, lambda: &[f64]) -> (f64, Vec<f64>) {
        let (mut f, mut g) = loss_and_grad(lambda, self.data, self.c2, true);
        if self.c1 == 0.0 {
            return (f, g);
        }
        let mut travel = 0.0;
        for (x, &l) in self.nodes.nodes().iter().zip(self.latencies) {
            let s = dot(lambda, x.coords());
            let (w, dw) = match self.model {
                CostModel::Cost1 => {
                    let p = sigmoid(s);
                    (p, p * (1.0 - p))
                }
                CostModel::Cost2Surrogate => (softplus(s), sigmoid(s)),
            };
            travel += l * w;
            for (gi, xi) in g.iter_mut().zip(x.coords()) {
                *gi += self.c1 * l * dw * xi;
            }
        }
        f += self.c1 * travel;
        (f, g)
    }
}

fn check_dims(lambda: &ModelParams, data: &LabeledDataset, nodes: &NodeSet) -> Result<()> {
    for (context, found) in [("training features", data.dim()), ("node features", nodes.dim())] {
        if found != lambda.dim() {
            return Err(Error::DimensionMismatch {
                context,
                expected: lambda.dim(),
                found,
            });
        }
    }
    Ok(())
}

/// Objective with the route minimized out exactly.
pub fn simultaneous_objective(
    lambda: &ModelParams,
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
) -> Result<(f64, TrpSolution)> {
    let w = node_weights(lambda, nodes, cfg.cost_model)?;
    let sol = solve_weighted_trp_dp(&w, dist)?;
    let train = training_error(lambda, data, cfg.c2())?;
    Ok((train + cfg.c1 * sol.cost, sol))
}

fn finish(
    lambda: ModelParams,
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
    trace: Vec<f64>,
    counts: (usize, usize, usize),
) -> Result<MltrpSolution> {
    let (combined, sol) = simultaneous_objective(&lambda, data, nodes, dist, cfg)?;
    let train = training_error(&lambda, data, cfg.c2())?;
    Ok(MltrpSolution {
        lambda,
        route: sol.route,
        training_error: train,
        traversal_cost: sol.cost,
        combined_objective: combined,
        trace,
        iterations: counts.0,
        route_solves: counts.1 + 1,
        lambda_solves: counts.2,
    })
}

/// Train first, then route on the induced weights. `C1` only enters the
/// reported combined objective.
pub fn sequential_pipeline(
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
) -> Result<MltrpSolution> {
    cfg.validate()?;
    let fit = fit_logistic(data, &cfg.train)?;
    check_dims(&fit.params, data, nodes)?;
    finish(fit.params, data, nodes, dist, cfg, fit.trace, (fit.iterations, 0, 1))
}

/// Default starting point: the logistic optimum.
pub fn default_start(data: &LabeledDataset, cfg: &MltrpConfig) -> Result<ModelParams> {
    Ok(fit_logistic(data, &cfg.train)?.params)
}

/// Nelder–Mead over `λ` on the simultaneous objective.
pub fn nelder_mead(
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
    lambda0: &ModelParams,
) -> Result<MltrpSolution> {
    cfg.validate()?;
    check_dims(lambda0, data, nodes)?;
    let opts = &cfg.nm;
    let dim = lambda0.dim();
    let evals = std::cell::Cell::new(0usize);
    let f = |x: &[f64]| -> Result<f64> {
        evals.set(evals.get() + 1);
        let v = simultaneous_objective(&ModelParams::new(x.to_vec()), data, nodes, dist, cfg)?.0;
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("objective {v} at simplex vertex {x:?}")));
        }
        Ok(v)
    };

    let x0 = lambda0.as_slice().to_vec();
    let scale = opts
        .initial_scale
        .unwrap_or_else(|| 0.1 * x0.iter().fold(1.0f64, |m, v| m.max(v.abs())));
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = f(&x0)?;
    simplex.push((x0.clone(), f0));
    for i in 0..dim {
        let mut v = x0.clone();
        v[i] += scale;
        let fv = f(&v)?;
        simplex.push((v, fv));
    }

    let mut trace = Vec::new();
    let mut iterations = 0usize;
    loop {
        // stable: on ties the earlier (incumbent) vertex stays ahead
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].1);
        if diameter(&simplex) < opts.diameter_tol || evals.get() >= opts.max_evals {
            break;
        }
        iterations += 1;

        let worst = simplex.len() - 1;
        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..worst].iter().map(|(v, _)| v[k]).sum::<f64>() / worst as f64)
            .collect();
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect()
        };
        let (f_best, f_second, f_worst) = (simplex[0].1, simplex[worst - 1].1, simplex[worst].1);
        let worst_x = simplex[worst].0.clone();

        let xr = along(-opts.reflection, &worst_x);
        let fr = f(&xr)?;
        if fr < f_best {
            let xe = along(opts.expansion, &xr);
            let fe = f(&xe)?;
            simplex[worst] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < f_second {
            simplex[worst] = (xr, fr);
            continue;
        }
        let (xc, fc, accept) = if fr < f_worst {
            let xc = along(opts.contraction, &xr);
            let fc = f(&xc)?;
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = along(opts.contraction, &worst_x);
            let fc = f(&xc)?;
            let ok = fc < f_worst;
            (xc, fc, ok)
        };
        if accept {
            simplex[worst] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let v: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, x)| b + opts.shrink * (x - b)).collect();
            let fv = f(&v)?;
            *vertex = (v, fv);
        }
    }

    let best = ModelParams::new(simplex[0].0.clone());
    let solves = evals.get();
    finish(best, data, nodes, dist, cfg, trace, (iterations, solves, 0))
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let dist = a.0.iter().zip(&b.0).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            d = d.max(dist);
        }
    }
    d
}

/// Alternating minimization: route step by exact DP, then `λ` step by
/// gradient descent on `Obj(·, π_t)` warm-started at `λ_{t−1}`.
///
/// Stops after `T` rounds or as soon as the route repeats. The returned route
/// is re-solved at the final `λ`.
pub fn alternating_minimization(
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
    lambda0: &ModelParams,
) -> Result<MltrpSolution> {
    cfg.validate()?;
    check_dims(lambda0, data, nodes)?;
    let mut lambda = lambda0.clone();
    let mut prev_route: Option<Route> = None;
    let mut trace = Vec::with_capacity(cfg.am_iterations);
    let (mut route_solves, mut lambda_solves, mut rounds) = (0, 0, 0);

    for _ in 0..cfg.am_iterations {
        let w = node_weights(&lambda, nodes, cfg.cost_model)?;
        let route = solve_weighted_trp_dp(&w, dist)?.route;
        route_solves += 1;
        if prev_route.as_ref() == Some(&route) {
            break;
        }
        rounds += 1;

        let lat = latency(&route, dist)?;
        let objective = RouteObjective::new(data, nodes, &lat, cfg);
        let step = minimize_armijo(|l| objective.eval(l), lambda.as_slice().to_vec(), &cfg.train)
            .map_err(|e| Error::NonFinite(format!("alternating λ-step diverged: {e}")))?;
        lambda_solves += 1;
        lambda = ModelParams::new(step.x);
        trace.push(step.objective);
        prev_route = Some(route);
    }

    // the final re-solve is counted by `finish`
    finish(lambda, data, nodes, dist, cfg, trace, (rounds, route_solves, lambda_solves))
}

/// Runs the configured method; `lambda0` defaults to the logistic optimum.
pub fn solve(
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
    lambda0: Option<&ModelParams>,
) -> Result<MltrpSolution> {
    if cfg.method == Method::Sequential {
        return sequential_pipeline(data, nodes, dist, cfg);
    }
    let start = match lambda0 {
        Some(l) => l.clone(),
        None => default_start(data, cfg)?,
    };
    match cfg.method {
        Method::NelderMead => nelder_mead(data, nodes, dist, cfg, &start),
        Method::Alternating => alternating_minimization(data, nodes, dist, cfg, &start),
        Method::Sequential => unreachable!(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub c1: f64,
    pub train_auc: f64,
    pub test_auc: Option<f64>,
    pub traversal_cost: f64,
    pub train_loss: f64,
    pub route: Route,
    pub lambda: ModelParams,
}

fn scores(lambda: &ModelParams, data: &LabeledDataset) -> Result<Vec<f64>> {
    data.features().iter().map(|x| lambda.score(x)).collect()
}

/// Solves one instance per `C1` from a shared starting point.
pub fn c1_sweep(
    train: &LabeledDataset,
    test: Option<&LabeledDataset>,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    base: &MltrpConfig,
    c1_grid: &[f64],
    lambda0: Option<&ModelParams>,
) -> Result<Vec<SweepRow>> {
    if c1_grid.is_empty() {
        return Err(Error::InvalidInput("C1 grid must not be empty".into()));
    }
    let start = match lambda0 {
        Some(l) => l.clone(),
        None => default_start(train, base)?,
    };
    c1_grid
        .par_iter()
        .map(|&c1| {
            let cfg = MltrpConfig { c1, ..base.clone() };
            let sol = solve(train, nodes, dist, &cfg, Some(&start))?;
            let train_auc = auc(&scores(&sol.lambda, train)?, train.labels())?;
            let test_auc = test
                .map(|t| auc(&scores(&sol.lambda, t)?, t.labels()))
                .transpose()?;
            Ok(SweepRow {
                c1,
                train_auc,
                test_auc,
                traversal_cost: sol.traversal_cost,
                train_loss: sol.training_error,
                route: sol.route,
                lambda: sol.lambda,
            })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "C1,train_auc,test_auc,traversal_cost,train_loss,route";

/// Plot-ready CSV; a missing test AUC is an empty field.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let test = r.test_auc.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.c1, r.train_auc, test, r.traversal_cost, r.train_loss, r.route
        ));
    }
    out
}

/// Training error and optimal traversal cost tabulated on a regular grid.
///
/// Minimizing `error + C1 · cost` over the table is a global solve of the
/// discretized problem for every `C1` at once.
#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub points: Vec<ModelParams>,
    pub training_error: Vec<f64>,
    pub traversal_cost: Vec<f64>,
}

pub const GRID_MAX_POINTS: usize = 2_000_000;

/// Tabulates the objective terms on `axis^d`.
pub fn lambda_grid_table(
    data: &LabeledDataset,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    cfg: &MltrpConfig,
    axis: &[f64],
) -> Result<GridTable> {
    let dim = data.dim();
    let total = axis.len().checked_pow(dim as u32).filter(|&t| t <= GRID_MAX_POINTS);
    let Some(total) = total else {
        return Err(Error::InvalidInput(format!(
            "grid of {} points per axis in {dim} dimensions is too large",
            axis.len()
        )));
    };
    node_scores(&ModelParams::zeros(dim), nodes, dist.len())?;
    let rows: Vec<(ModelParams, f64, f64)> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut l = vec![0.0; dim];
            for slot in l.iter_mut().rev() {
                *slot = axis[idx % axis.len()];
                idx /= axis.len();
            }
            let lambda = ModelParams::new(l);
            let w = node_weights(&lambda, nodes, cfg.cost_model)?;
            let cost = solve_weighted_trp_dp(&w, dist)?.cost;
            let err = training_error(&lambda, data, cfg.c2())?;
            Ok((lambda, err, cost))
        })
        .collect::<Result<_>>()?;
    let mut table = GridTable {
        points: Vec::with_capacity(total),
        training_error: Vec::with_capacity(total),
        traversal_cost: Vec::with_capacity(total),
    };
    for (l, e, c) in rows {
        table.points.push(l);
        table.training_error.push(e);
        table.traversal_cost.push(c);
    }
    Ok(table)
}

impl GridTable {
    /// Index of the grid minimizer of `error + c1 · cost`; first index wins ties.
    pub fn argmin(&self, c1: f64) -> usize {
        let mut best = 0;
        let mut best_v = f64::INFINITY;
        for (i, (e, c)) in self.training_error.iter().zip(&self.traversal_cost).enumerate() {
            let v = e + c1 * c;
            if v < best_v {
                best_v = v;
                best = i;
            }
        }
        best
    }
}

/// Evenly spaced axis `start, start + step, ..., end` computed by index.
pub fn grid_axis(start: f64, end: f64, step: f64) -> Vec<f64> {
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| start + k as f64 * step).collect()
}
