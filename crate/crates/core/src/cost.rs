//! Latencies and route-cost formulas.
//!
//! The latency of a non-depot node is the distance travelled before it is
//! reached. The depot (node 0) is charged the full closed-tour length, so its
//! weight contributes to every route cost.

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};
use crate::types::{DistanceMatrix, ModelParams, NodeSet, NodeWeights, Route};

/// Latency of every node under `route`, indexed by node id (not position).
pub fn latency(route: &Route, dist: &DistanceMatrix) -> Result<Vec<f64>> {
    route.check_len(dist.len())?;
    let order = route.order();
    let mut lat = vec![0.0; order.len()];
    let mut elapsed = 0.0;
    for k in 1..order.len() {
        elapsed += dist.get(order[k - 1], order[k]);
        lat[order[k]] = elapsed;
    }
    elapsed += dist.get(order[order.len() - 1], order[0]);
    lat[order[0]] = elapsed;
    Ok(lat)
}

/// Expected number of pre-visit failures, `Σ_i w_i L(i)`.
pub fn cost1(route: &Route, w: &NodeWeights, dist: &DistanceMatrix) -> Result<f64> {
    w.check_len(dist.len())?;
    let lat = latency(route, dist)?;
    Ok(weighted_sum(w.as_slice(), &lat))
}

/// Cost 1 with post-visit failures charged at rate `beta`.
///
/// Node `i` costs `β (L(depot) − L(i)) w_i + L(i) w_i`; `beta = 0` is [`cost1`].
pub fn cost1_general(route: &Route, w: &NodeWeights, dist: &DistanceMatrix, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    w.check_len(dist.len())?;
    let lat = latency(route, dist)?;
    let tour = lat[route.order()[0]];
    Ok(w
        .as_slice()
        .iter()
        .zip(&lat)
        .map(|(wi, li)| beta * (tour - li) * wi + li * wi)
        .sum())
}

/// Probability that the first failure of a node with score `f` happens
/// within `latency` steps: `1 − (1 + e^f)^{−L}`.
pub fn first_failure_probability(score: f64, latency: f64) -> f64 {
    if latency == 0.0 {
        return 0.0;
    }
    -(-latency * softplus(score)).exp_m1()
}

/// Cost 2: summed probability that each node fails before it is visited.
pub fn cost2_exact(
    route: &Route,
    lambda: &ModelParams,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
) -> Result<f64> {
    let scores = node_scores(lambda, nodes, dist.len())?;
    let lat = latency(route, dist)?;
    Ok(scores
        .iter()
        .zip(&lat)
        .map(|(&f, &l)| first_failure_probability(f, l))
        .sum())
}

/// Cost 2 with the post-visit survival probability charged at rate `beta`.
pub fn cost2_general(
    route: &Route,
    lambda: &ModelParams,
    nodes: &NodeSet,
    dist: &DistanceMatrix,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    let scores = node_scores(lambda, nodes, dist.len())?;
    let lat = latency(route, dist)?;
    Ok(scores
        .iter()
        .zip(&lat)
        .map(|(&f, &l)| {
            let before = first_failure_probability(f, l);
            before + beta * (1.0 - before)
        })
        .sum())
}

/// Cost 2 evaluated from per-node failure probabilities instead of scores.
pub fn cost2_from_probabilities(route: &Route, p: &[f64], dist: &DistanceMatrix) -> Result<f64> {
    if p.len() != dist.len() {
        return Err(Error::DimensionMismatch {
            context: "node probabilities",
            expected: dist.len(),
            found: p.len(),
        });
    }
    if let Some(&bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::ProbabilityOutOfRange(bad));
    }
    let lat = latency(route, dist)?;
    Ok(p
        .iter()
        .zip(&lat)
        .map(|(&pi, &l)| {
            if l == 0.0 {
                0.0
            } else if pi == 1.0 {
                1.0
            } else {
                -(l * (-pi).ln_1p()).exp_m1()
            }
        })
        .sum())
}

/// Failure probabilities `σ(λ·x̃_i)`, the Cost 1 weights.
pub fn sigmoid_weights(lambda: &ModelParams, nodes: &NodeSet) -> Result<NodeWeights> {
    let scores = node_scores(lambda, nodes, nodes.len())?;
    NodeWeights::new(scores.into_iter().map(sigmoid).collect())
}

/// Softplus weights `ln(1 + e^{λ·x̃_i})` of the log-surrogate for Cost 2.
///
/// The surrogate route cost is [`cost1`] evaluated with these weights.
pub fn cost2_surrogate_weights(lambda: &ModelParams, nodes: &NodeSet) -> Result<NodeWeights> {
    let scores = node_scores(lambda, nodes, nodes.len())?;
    NodeWeights::new(scores.into_iter().map(softplus).collect())
}

/// Unweighted TRP objective `Σ_k d(π(k), π(k+1)) (M + 1 − k)`.
pub fn standard_trp_cost(route: &Route, dist: &DistanceMatrix) -> Result<f64> {
    route.check_len(dist.len())?;
    let n = route.len();
    Ok(route
        .edges()
        .enumerate()
        .map(|(k, (a, b))| dist.get(a, b) * (n - k) as f64)
        .sum())
}

pub(crate) fn weighted_sum(w: &[f64], lat: &[f64]) -> f64 {
    w.iter().zip(lat).map(|(a, b)| a * b).sum()
}

pub(crate) fn node_scores(lambda: &ModelParams, nodes: &NodeSet, expected: usize) -> Result<Vec<f64>> {
    if nodes.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "node count vs distance matrix",
            expected,
            found: nodes.len(),
        });
    }
    nodes.nodes().iter().map(|x| lambda.score(x)).collect()
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> DistanceMatrix {
        DistanceMatrix::from_fn(n, |_, _| 1.0).unwrap()
    }

    #[test]
    fn latency_two_nodes() {
        let d = DistanceMatrix::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let lat = latency(&Route::identity(2), &d).unwrap();
        assert_eq!(lat, vec![6.0, 3.0]);
    }

    #[test]
    fn latency_unit_three_nodes() {
        let lat = latency(&Route::identity(3), &unit(3)).unwrap();
        assert_eq!(lat, vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn latency_is_keyed_by_node() {
        let d = DistanceMatrix::new(vec![
            vec![0.0, 1.0, 4.0],
            vec![2.0, 0.0, 5.0],
            vec![3.0, 6.0, 0.0],
        ])
        .unwrap();
        let lat = latency(&Route::new(vec![0, 2, 1]).unwrap(), &d).unwrap();
        // 0 -> 2 (4), 2 -> 1 (6), 1 -> 0 (2)
        assert_eq!(lat, vec![12.0, 10.0, 4.0]);
    }

    #[test]
    fn latency_rejects_wrong_length() {
        assert!(matches!(
            latency(&Route::identity(3), &unit(4)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cost1_half_weights_unit_distances() {
        let w = NodeWeights::uniform(3, 0.5).unwrap();
        let c = cost1(&Route::identity(3), &w, &unit(3)).unwrap();
        assert_eq!(c, 3.0);
        assert_eq!(standard_trp_cost(&Route::identity(3), &unit(3)).unwrap(), 6.0);
    }

    #[test]
    fn zero_weights_cost_nothing() {
        let w = NodeWeights::uniform(4, 0.0).unwrap();
        let d = DistanceMatrix::from_fn(4, |i, j| (i * 4 + j) as f64).unwrap();
        for order in [vec![0, 1, 2, 3], vec![0, 3, 1, 2]] {
            assert_eq!(cost1(&Route::new(order).unwrap(), &w, &d).unwrap(), 0.0);
        }
    }

    #[test]
    fn beta_extremes() {
        let d = DistanceMatrix::from_fn(4, |i, j| 1.0 + ((i * 7 + j * 3) % 5) as f64).unwrap();
        let w = NodeWeights::new(vec![0.2, 0.7, 0.1, 0.4]).unwrap();
        let r = Route::new(vec![0, 2, 3, 1]).unwrap();
        assert_eq!(cost1_general(&r, &w, &d, 0.0).unwrap(), cost1(&r, &w, &d).unwrap());
        let tour = latency(&r, &d).unwrap()[0];
        let full = cost1_general(&r, &w, &d, 1.0).unwrap();
        assert!((full - tour * w.total()).abs() < 1e-12);
        assert!(matches!(cost1_general(&r, &w, &d, 1.5), Err(Error::BetaOutOfRange(_))));
        assert!(cost1_general(&r, &w, &d, -0.1).is_err());
    }

    #[test]
    fn cost2_two_nodes_even_odds() {
        let d = DistanceMatrix::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]]).unwrap();
        let nodes = NodeSet::from_rows(vec![vec![0.0], vec![0.0]]).unwrap();
        let lambda = ModelParams::new(vec![1.0]);
        let c = cost2_exact(&Route::identity(2), &lambda, &nodes, &d).unwrap();
        assert!((c - 1.859375).abs() < 1e-15);
    }

    #[test]
    fn cost2_zero_latency_is_free() {
        let d = DistanceMatrix::from_fn(3, |_, _| 0.0).unwrap();
        let nodes = NodeSet::from_rows(vec![vec![1.0], vec![2.0], vec![-1.0]]).unwrap();
        let c = cost2_exact(&Route::identity(3), &ModelParams::zeros(1), &nodes, &d).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn cost2_general_beta_one_counts_every_node() {
        let d = DistanceMatrix::from_fn(5, |i, j| 0.5 + ((i + 2 * j) % 4) as f64).unwrap();
        let nodes =
            NodeSet::from_rows((0..5).map(|i| vec![i as f64 - 2.0, 1.0]).collect()).unwrap();
        let lambda = ModelParams::new(vec![0.8, -0.3]);
        let r = Route::new(vec![0, 3, 1, 4, 2]).unwrap();
        let c = cost2_general(&r, &lambda, &nodes, &d, 1.0).unwrap();
        assert!((c - 5.0).abs() < 1e-12);
        assert_eq!(
            cost2_general(&r, &lambda, &nodes, &d, 0.0).unwrap(),
            cost2_exact(&r, &lambda, &nodes, &d).unwrap()
        );
    }

    #[test]
    fn saturated_probability_counts_as_one() {
        assert_eq!(first_failure_probability(f64::INFINITY, 2.0), 1.0);
        assert_eq!(first_failure_probability(f64::INFINITY, 0.0), 0.0);
        assert_eq!(first_failure_probability(800.0, 0.5), 1.0);
    }

    #[test]
    fn surrogate_weights_values() {
        let nodes = NodeSet::from_rows(vec![vec![0.0], vec![-40.0], vec![3.0]]).unwrap();
        let w = cost2_surrogate_weights(&ModelParams::new(vec![1.0]), &nodes).unwrap();
        let w = w.as_slice();
        assert!((w[0] - std::f64::consts::LN_2).abs() < 1e-16);
        assert!(w[1] > 0.0 && (w[1] / (-40.0f64).exp() - 1.0).abs() < 1e-15);
        // ln(1 + e^3) to 16 digits
        assert!((w[2] - 3.048_587_351_573_742).abs() < 1e-14);
    }

    #[test]
    fn probabilities_match_scores() {
        let d = DistanceMatrix::from_fn(4, |i, j| ((i + j) % 3 + 1) as f64).unwrap();
        let nodes = NodeSet::from_rows(vec![vec![0.3], vec![-1.2], vec![2.0], vec![0.0]]).unwrap();
        let lambda = ModelParams::new(vec![1.3]);
        let p = sigmoid_weights(&lambda, &nodes).unwrap();
        let r = Route::new(vec![0, 2, 3, 1]).unwrap();
        let a = cost2_exact(&r, &lambda, &nodes, &d).unwrap();
        let b = cost2_from_probabilities(&r, p.as_slice(), &d).unwrap();
        assert!((a - b).abs() < 1e-13);
    }
}
