//! Monte Carlo checks of the two cost models.
//!
//! A node with failure probability `p` is a Bernoulli process: at each time
//! step it fails with probability `p`, independently of earlier steps. Cost 1
//! counts failures that happen before the crew arrives; Cost 2 counts nodes
//! whose first failure happens before the crew arrives.
//!
//! Random numbers come from ChaCha8 seeded with `seed`, and node `i` draws
//! from stream `i` of that generator. Nodes are simulated independently and
//! summed in node order, so estimates do not depend on the thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::latency;
use crate::error::{Error, Result};
use crate::types::{DistanceMatrix, Route};

/// Name of the generator recorded in reports.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha), seed_from_u64(seed), stream = node index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    /// Time steps per distance unit; a latency `L` lasts `floor(L · steps)` steps.
    pub steps_per_unit: u32,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            steps_per_unit: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidInput("simulation needs at least one trial".into()));
        }
        if self.steps_per_unit == 0 {
            return Err(Error::InvalidInput("steps per distance unit must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `√trials`; zero for a single trial.
    pub std_error: f64,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Self { mean, std_error: 0.0 };
        }
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    /// Expected number of failures before each visit.
    Cost1,
    /// Probability that each node has failed before its visit.
    Cost2,
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange(p))
    }
}

fn node_rng(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

/// Per-trial outcome for one node over `steps` steps.
fn node_samples(p: f64, steps: u64, model: SimModel, trials: u64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..trials)
        .map(|_| match model {
            SimModel::Cost1 => (0..steps).filter(|_| rng.random::<f64>() < p).count() as f64,
            SimModel::Cost2 => {
                if (0..steps).any(|_| rng.random::<f64>() < p) {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .collect()
}

/// Mean number of failures in `steps` Bernoulli(`p`) steps.
pub fn simulate_expected_failures(p: f64, steps: u64, cfg: &SimConfig) -> Result<Estimate> {
    check_probability(p)?;
    cfg.validate()?;
    let samples = node_samples(p, steps, SimModel::Cost1, cfg.trials, &mut node_rng(cfg.seed, 0));
    Ok(Estimate::from_samples(&samples))
}

/// Fraction of trials whose first failure happens within `steps` steps.
pub fn simulate_first_failure_before(p: f64, steps: u64, cfg: &SimConfig) -> Result<Estimate> {
    check_probability(p)?;
    cfg.validate()?;
    let samples = node_samples(p, steps, SimModel::Cost2, cfg.trials, &mut node_rng(cfg.seed, 0));
    Ok(Estimate::from_samples(&samples))
}

/// Latencies of `route` in whole time steps, rounded down.
pub fn latency_steps(route: &Route, dist: &DistanceMatrix, steps_per_unit: u32) -> Result<Vec<u64>> {
    Ok(latency(route, dist)?
        .into_iter()
        .map(|l| (l * steps_per_unit as f64).floor() as u64)
        .collect())
}

/// Simulated route cost with its analytic reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub model: SimModel,
    pub trials: u64,
    pub seed: u64,
    pub estimate: f64,
    pub std_error: f64,
    /// Closed form at the simulated (whole-step) latencies.
    pub analytic: f64,
    /// `(estimate − analytic) / std_error`; `None` when the error is zero
    /// and the two differ.
    pub z_score: Option<f64>,
    pub steps_per_unit: u32,
    /// Closed form at the unrounded latencies.
    pub analytic_unrounded: f64,
    /// `analytic_unrounded − analytic`, the cost of flooring latencies.
    pub discretization_gap: f64,
    pub rng: String,
}

fn analytic(model: SimModel, p: &[f64], steps: impl Iterator<Item = f64>) -> f64 {
    p.iter()
        .zip(steps)
        .map(|(&p, n)| match model {
            SimModel::Cost1 => p * n,
            SimModel::Cost2 => -(n * (-p).ln_1p()).exp_m1(),
        })
        .sum()
}

/// Simulates every node's failure process up to its visit and sums the
/// per-node outcomes.
///
/// `p[i]` is node `i`'s per-step failure probability; the depot is charged
/// at the full tour length like every other node at its latency.
pub fn simulate_route_cost(
    route: &Route,
    p: &[f64],
    dist: &DistanceMatrix,
    model: SimModel,
    cfg: &SimConfig,
) -> Result<SimReport> {
    cfg.validate()?;
    if p.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            context: "node probabilities",
            expected: dist.len(),
            found: p.len(),
        });
    }
    for &pi in p {
        check_probability(pi)?;
    }
    let steps = latency_steps(route, dist, cfg.steps_per_unit)?;
    let per_node: Vec<Vec<f64>> = (0..p.len())
        .into_par_iter()
        .map(|i| node_samples(p[i], steps[i], model, cfg.trials, &mut node_rng(cfg.seed, i)))
        .collect();
    let mut totals = vec![0.0; cfg.trials as usize];
    for node in &per_node {
        for (t, v) in totals.iter_mut().zip(node) {
            *t += v;
        }
    }
    let est = Estimate::from_samples(&totals);

    let exact = analytic(model, p, steps.iter().map(|&s| s as f64));
    let scale = cfg.steps_per_unit as f64;
    let unrounded = analytic(model, p, latency(route, dist)?.into_iter().map(|l| l * scale));
    let diff = est.mean - exact;
    let z_score = if est.std_error > 0.0 {
        Some(diff / est.std_error)
    } else if diff == 0.0 {
        Some(0.0)
    } else {
        None
    };
    Ok(SimReport {
        model,
        trials: cfg.trials,
        seed: cfg.seed,
        estimate: est.mean,
        std_error: est.std_error,
        analytic: exact,
        z_score,
        steps_per_unit: cfg.steps_per_unit,
        analytic_unrounded: unrounded,
        discretization_gap: unrounded - exact,
        rng: RNG_NAME.to_string(),
    })
}
