//! Python bindings. Routes cross the boundary as 1-based node ids with the
//! depot first, the way the command line prints them; a closing repeat of
//! the depot is accepted on input.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use mltrp::bound::{generalization_bound as bound_report, BoundInputs};
use mltrp::learn::TrainConfig;
use mltrp::milp::{build_milp, export_lp as lp_text};
use mltrp::opt::{c1_sweep as sweep, solve, CostModel, Method, MltrpConfig};
use mltrp::sim::{simulate_route_cost, SimConfig, SimModel};
use mltrp::{cost, learn, trp};
use mltrp::{DistanceMatrix, Label, LabeledDataset, ModelParams, NodeSet, NodeWeights, Route};

create_exception!(mltrp_py, MltrpError, PyValueError);

fn err(e: mltrp::Error) -> PyErr {
    MltrpError::new_err(e.to_string())
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<f64>) -> PyResult<LabeledDataset> {
    LabeledDataset::from_rows(x, &y).map_err(err)
}

fn node_set(nodes: Vec<Vec<f64>>) -> PyResult<NodeSet> {
    NodeSet::from_rows(nodes).map_err(err)
}

fn distances(dist: Vec<Vec<f64>>) -> PyResult<DistanceMatrix> {
    DistanceMatrix::new(dist).map_err(err)
}

fn weights(w: Vec<f64>) -> PyResult<NodeWeights> {
    NodeWeights::new(w).map_err(err)
}

fn route_from(mut ids: Vec<usize>) -> PyResult<Route> {
    if ids.len() > 1 && ids.first() == ids.last() {
        ids.pop();
    }
    Route::from_one_based(&ids).map_err(err)
}

fn cost_model(name: &str) -> PyResult<CostModel> {
    match name {
        "cost1" => Ok(CostModel::Cost1),
        "cost2" => Ok(CostModel::Cost2Surrogate),
        _ => Err(PyValueError::new_err(format!("cost_model must be 'cost1' or 'cost2', got '{name}'"))),
    }
}

fn method(name: &str) -> PyResult<Method> {
    match name {
        "sequential" => Ok(Method::Sequential),
        "nm" => Ok(Method::NelderMead),
        "am" => Ok(Method::Alternating),
        _ => Err(PyValueError::new_err(format!("method must be 'sequential', 'nm' or 'am', got '{name}'"))),
    }
}

fn config(c1: f64, c2: f64, model: &str, how: &str) -> PyResult<MltrpConfig> {
    let mut cfg = MltrpConfig::new(c1, c2);
    cfg.cost_model = cost_model(model)?;
    cfg.method = method(how)?;
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

#[pyclass(frozen, get_all, module = "mltrp_py")]
#[derive(Clone)]
pub struct LogisticFit {
    lambda_: Vec<f64>,
    objective: f64,
    grad_norm: f64,
    iterations: usize,
    converged: bool,
}

#[pymethods]
impl LogisticFit {
    fn __repr__(&self) -> String {
        format!(
            "LogisticFit(lambda_={:?}, objective={}, converged={})",
            self.lambda_, self.objective, self.converged
        )
    }
}

#[pyclass(frozen, get_all, module = "mltrp_py")]
#[derive(Clone)]
pub struct TrpSolution {
    route: Vec<usize>,
    cost: f64,
    route_str: String,
}

impl TrpSolution {
    fn new(route: &Route, cost: f64) -> Self {
        Self {
            route: route.to_one_based(),
            cost,
            route_str: route.to_string(),
        }
    }
}

#[pymethods]
impl TrpSolution {
    fn __repr__(&self) -> String {
        format!("TrpSolution(route='{}', cost={})", self.route_str, self.cost)
    }
}

#[pyclass(frozen, get_all, module = "mltrp_py")]
#[derive(Clone)]
pub struct Solution {
    lambda_: Vec<f64>,
    route: Vec<usize>,
    route_str: String,
    training_error: f64,
    traversal_cost: f64,
    combined_objective: f64,
    trace: Vec<f64>,
    iterations: usize,
}

impl From<mltrp::opt::MltrpSolution> for Solution {
    fn from(s: mltrp::opt::MltrpSolution) -> Self {
        Self {
            lambda_: s.lambda.as_slice().to_vec(),
            route: s.route.to_one_based(),
            route_str: s.route.to_string(),
            training_error: s.training_error,
            traversal_cost: s.traversal_cost,
            combined_objective: s.combined_objective,
            trace: s.trace,
            iterations: s.iterations,
        }
    }
}

#[pymethods]
impl Solution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(route='{}', combined_objective={}, lambda_={:?})",
            self.route_str, self.combined_objective, self.lambda_
        )
    }
}

#[pyclass(frozen, get_all, module = "mltrp_py")]
#[derive(Clone)]
pub struct SweepRow {
    c1: f64,
    train_auc: f64,
    test_auc: Option<f64>,
    traversal_cost: f64,
    train_loss: f64,
    route: Vec<usize>,
    lambda_: Vec<f64>,
}

#[pymethods]
impl SweepRow {
    fn __repr__(&self) -> String {
        format!(
            "SweepRow(c1={}, train_auc={}, traversal_cost={})",
            self.c1, self.train_auc, self.traversal_cost
        )
    }
}

#[pyclass(frozen, get_all, module = "mltrp_py")]
#[derive(Clone)]
pub struct SimReport {
    estimate: f64,
    std_error: f64,
    analytic: f64,
    z_score: Option<f64>,
    analytic_unrounded: f64,
    discretization_gap: f64,
    trials: u64,
    seed: u64,
}

#[pymethods]
impl SimReport {
    fn __repr__(&self) -> String {
        format!(
            "SimReport(estimate={}, std_error={}, analytic={})",
            self.estimate, self.std_error, self.analytic
        )
    }
}

#[pyclass(frozen, get_all, module = "mltrp_py")]
#[derive(Clone)]
pub struct BoundReport {
    d_i: Vec<f64>,
    d_sum: f64,
    cg_above_distance_sum: bool,
    c_tilde0: f64,
    c: Vec<f64>,
    alpha: f64,
    covering_factor: f64,
    exp_factor: f64,
    ln_bound: f64,
    bound: f64,
}

#[pymethods]
impl BoundReport {
    fn __repr__(&self) -> String {
        format!("BoundReport(alpha={}, bound={})", self.alpha, self.bound)
    }
}

/// Fits the ℓ2-penalized logistic model; labels are -1 or +1.
#[pyfunction]
#[pyo3(signature = (x, y, c2=0.1))]
fn fit_logistic(x: Vec<Vec<f64>>, y: Vec<f64>, c2: f64) -> PyResult<LogisticFit> {
    let data = dataset(x, y)?;
    let fit = learn::fit_logistic(&data, &TrainConfig::new(c2)).map_err(err)?;
    Ok(LogisticFit {
        lambda_: fit.params.as_slice().to_vec(),
        objective: fit.objective,
        grad_norm: fit.grad_norm,
        iterations: fit.iterations,
        converged: fit.converged,
    })
}

#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<f64>) -> PyResult<f64> {
    let labels = labels
        .into_iter()
        .map(Label::from_value)
        .collect::<mltrp::Result<Vec<_>>>()
        .map_err(err)?;
    learn::auc(&scores, &labels).map_err(err)
}

/// Failure probabilities `σ(λ·x)` for every node.
#[pyfunction]
fn probabilities(lambda_: Vec<f64>, nodes: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let w = cost::sigmoid_weights(&ModelParams::new(lambda_), &node_set(nodes)?).map_err(err)?;
    Ok(w.as_slice().to_vec())
}

/// Arrival time at each node; the depot gets the full tour length.
#[pyfunction]
fn latency(route: Vec<usize>, dist: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    cost::latency(&route_from(route)?, &distances(dist)?).map_err(err)
}

#[pyfunction]
fn cost1(route: Vec<usize>, w: Vec<f64>, dist: Vec<Vec<f64>>) -> PyResult<f64> {
    cost::cost1(&route_from(route)?, &weights(w)?, &distances(dist)?).map_err(err)
}

#[pyfunction]
fn cost2(route: Vec<usize>, lambda_: Vec<f64>, nodes: Vec<Vec<f64>>, dist: Vec<Vec<f64>>) -> PyResult<f64> {
    let lambda = ModelParams::new(lambda_);
    cost::cost2_exact(&route_from(route)?, &lambda, &node_set(nodes)?, &distances(dist)?).map_err(err)
}

/// Exact weighted traveling repairman route by subset dynamic programming.
#[pyfunction]
fn solve_trp(w: Vec<f64>, dist: Vec<Vec<f64>>) -> PyResult<TrpSolution> {
    let sol = trp::solve_weighted_trp_dp(&weights(w)?, &distances(dist)?).map_err(err)?;
    Ok(TrpSolution::new(&sol.route, sol.cost))
}

/// Shortest closed tour; `cost` is the tour length.
#[pyfunction]
fn shortest_tour(dist: Vec<Vec<f64>>) -> PyResult<TrpSolution> {
    let (len, route) = trp::shortest_tour(&distances(dist)?).map_err(err)?;
    Ok(TrpSolution::new(&route, len))
}

#[pyfunction]
fn naive_route(w: Vec<f64>) -> PyResult<Vec<usize>> {
    Ok(trp::naive_route(&weights(w)?).to_one_based())
}

/// Solves the combined objective. `method` is "sequential", "nm" or "am";
/// `lambda0` defaults to the logistic optimum.
#[pyfunction]
#[pyo3(signature = (x, y, nodes, dist, c1=1.0, c2=0.1, method="nm", cost_model="cost1", lambda0=None))]
#[allow(clippy::too_many_arguments)]
fn simultaneous(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    c1: f64,
    c2: f64,
    method: &str,
    cost_model: &str,
    lambda0: Option<Vec<f64>>,
) -> PyResult<Solution> {
    let cfg = config(c1, c2, cost_model, method)?;
    let (data, nodes, dist) = (dataset(x, y)?, node_set(nodes)?, distances(dist)?);
    let start = lambda0.map(ModelParams::new);
    let sol = py
        .allow_threads(|| solve(&data, &nodes, &dist, &cfg, start.as_ref()))
        .map_err(err)?;
    Ok(sol.into())
}

/// One solve per value of `c1_grid`, all from the same starting point.
#[pyfunction]
#[pyo3(signature = (x, y, nodes, dist, c1_grid, c2=0.1, method="nm", cost_model="cost1", test=None))]
#[allow(clippy::too_many_arguments)]
fn c1_sweep(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    c1_grid: Vec<f64>,
    c2: f64,
    method: &str,
    cost_model: &str,
    test: Option<(Vec<Vec<f64>>, Vec<f64>)>,
) -> PyResult<Vec<SweepRow>> {
    let cfg = config(0.0, c2, cost_model, method)?;
    let (data, nodes, dist) = (dataset(x, y)?, node_set(nodes)?, distances(dist)?);
    let test = test.map(|(x, y)| dataset(x, y)).transpose()?;
    let rows = py
        .allow_threads(|| sweep(&data, test.as_ref(), &nodes, &dist, &cfg, &c1_grid, None))
        .map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| SweepRow {
            c1: r.c1,
            train_auc: r.train_auc,
            test_auc: r.test_auc,
            traversal_cost: r.traversal_cost,
            train_loss: r.train_loss,
            route: r.route.to_one_based(),
            lambda_: r.lambda.as_slice().to_vec(),
        })
        .collect())
}

/// The flow MILP for fixed weights, in LP file format.
#[pyfunction]
fn export_lp(w: Vec<f64>, dist: Vec<Vec<f64>>) -> PyResult<String> {
    let inst = build_milp(&weights(w)?, &distances(dist)?).map_err(err)?;
    Ok(lp_text(&inst))
}

/// Monte Carlo estimate of a route's cost; `p` holds per-step failure
/// probabilities and `model` is "cost1" or "cost2".
#[pyfunction]
#[pyo3(signature = (route, p, dist, model="cost1", trials=100_000, seed=0, steps_per_unit=1))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    route: Vec<usize>,
    p: Vec<f64>,
    dist: Vec<Vec<f64>>,
    model: &str,
    trials: u64,
    seed: u64,
    steps_per_unit: u32,
) -> PyResult<SimReport> {
    let model = match model {
        "cost1" => SimModel::Cost1,
        "cost2" => SimModel::Cost2,
        _ => return Err(PyValueError::new_err(format!("model must be 'cost1' or 'cost2', got '{model}'"))),
    };
    let (route, dist) = (route_from(route)?, distances(dist)?);
    let cfg = SimConfig {
        trials,
        seed,
        steps_per_unit,
    };
    let r = py
        .allow_threads(|| simulate_route_cost(&route, &p, &dist, model, &cfg))
        .map_err(err)?;
    Ok(SimReport {
        estimate: r.estimate,
        std_error: r.std_error,
        analytic: r.analytic,
        z_score: r.z_score,
        analytic_unrounded: r.analytic_unrounded,
        discretization_gap: r.discretization_gap,
        trials: r.trials,
        seed: r.seed,
    })
}

#[pyfunction]
#[pyo3(signature = (nodes, dist, m1, m2, cg, eps, m))]
fn generalization_bound(
    nodes: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    m1: f64,
    m2: f64,
    cg: f64,
    eps: f64,
    m: u64,
) -> PyResult<BoundReport> {
    let inputs = BoundInputs {
        m1,
        m2,
        cg,
        eps,
        m,
        nodes: node_set(nodes)?,
        dist: distances(dist)?,
    };
    let r = bound_report(&inputs).map_err(err)?;
    Ok(BoundReport {
        d_i: r.d_i,
        d_sum: r.d_sum,
        cg_above_distance_sum: r.cg_above_distance_sum,
        c_tilde0: r.c_tilde0,
        c: r.c,
        alpha: r.alpha,
        covering_factor: r.covering_factor,
        exp_factor: r.exp_factor,
        ln_bound: r.ln_bound,
        bound: r.bound,
    })
}

#[pymodule]
fn mltrp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MltrpError", m.py().get_type::<MltrpError>())?;
    m.add_class::<LogisticFit>()?;
    m.add_class::<TrpSolution>()?;
    m.add_class::<Solution>()?;
    m.add_class::<SweepRow>()?;
    m.add_class::<SimReport>()?;
    m.add_class::<BoundReport>()?;

    m.add_function(wrap_pyfunction!(fit_logistic, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(latency, m)?)?;
    m.add_function(wrap_pyfunction!(cost1, m)?)?;
    m.add_function(wrap_pyfunction!(cost2, m)?)?;
    m.add_function(wrap_pyfunction!(solve_trp, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_tour, m)?)?;
    m.add_function(wrap_pyfunction!(naive_route, m)?)?;
    m.add_function(wrap_pyfunction!(simultaneous, m)?)?;
    m.add_function(wrap_pyfunction!(c1_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(export_lp, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(generalization_bound, m)?)?;
    Ok(())
}
