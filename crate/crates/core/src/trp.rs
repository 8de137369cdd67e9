//! Exact solvers for the weighted traveling repairman subproblem
//! `min_π Σ_i w_i L(i)`.
//!
//! Among routes whose costs agree within [`TIE_TOLERANCE`] the
//! lexicographically smallest visit order is returned, so the DP and the
//! enumeration oracle agree on the route as well as on the cost.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::cost::cost1;
use crate::error::{Error, Result};
use crate::types::{DistanceMatrix, NodeWeights, Route};

/// Absolute tolerance under which two route costs are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub const DP_MAX_NODES: usize = 20;
pub const BRUTE_FORCE_MAX_NODES: usize = 10;
pub const TOUR_MAX_NODES: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Dp,
    BruteForce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrpSolution {
    pub route: Route,
    /// `cost1(route, w, D)` recomputed from the route.
    pub cost: f64,
    pub solver: SolverKind,
    /// DP states evaluated, or routes enumerated.
    pub nodes_expanded: u64,
}

fn check_inputs(w: &NodeWeights, dist: &DistanceMatrix, solver: &'static str, max: usize) -> Result<usize> {
    let n = dist.len();
    w.check_len(n)?;
    if !(2..=max).contains(&n) {
        return Err(Error::UnsupportedSize {
            solver,
            min: 2,
            max,
            found: n,
        });
    }
    Ok(n)
}

/// Subset dynamic program over visited sets.
///
/// `g(S, j)` is the cheapest completion from node `j` once the nodes in `S`
/// have been visited. The edge leaving `S` carries the undropped flow: the
/// weights of unvisited nodes plus the depot weight, which is only dropped
/// when the tour closes.
pub fn solve_weighted_trp_dp(w: &NodeWeights, dist: &DistanceMatrix) -> Result<TrpSolution> {
    let n = check_inputs(w, dist, "weighted TRP dynamic program", DP_MAX_NODES)?;
    let w = w.as_slice();
    let k = n - 1;
    let full: usize = (1 << k) - 1;
    let depot_w = w[0];

    // flow[mask] = depot weight + weights of non-depot nodes outside mask
    let rest: f64 = w[1..].iter().sum();
    let mut visited_w = vec![0.0; 1 << k];
    for mask in 1..=full {
        let low = mask.trailing_zeros() as usize;
        visited_w[mask] = visited_w[mask & (mask - 1)] + w[low + 1];
    }
    let flow = |mask: usize| depot_w + (rest - visited_w[mask]);

    let mut g = vec![f64::INFINITY; (1 << k) * k];
    let mut expanded: u64 = 0;
    for j in 0..k {
        g[full * k + j] = dist.get(j + 1, 0) * depot_w;
        expanded += 1;
    }
    for mask in (1..full).rev() {
        let carried = flow(mask);
        for j in (0..k).filter(|j| mask & (1 << j) != 0) {
            let mut best = f64::INFINITY;
            for next in (0..k).filter(|b| mask & (1 << b) == 0) {
                let v = dist.get(j + 1, next + 1) * carried + g[(mask | 1 << next) * k + next];
                if v < best {
                    best = v;
                }
            }
            g[mask * k + j] = best;
            expanded += 1;
        }
    }

    // Forward reconstruction, preferring the smallest next node among
    // choices within tolerance of the optimal cost-to-go.
    let mut order = Vec::with_capacity(n);
    order.push(0);
    let mut mask = 0usize;
    let mut current = 0usize;
    let mut target = (0..k)
        .map(|b| dist.get(0, b + 1) * flow(0) + g[(1 << b) * k + b])
        .fold(f64::INFINITY, f64::min);
    while mask != full {
        let carried = flow(mask);
        let (next, to_go) = (0..k)
            .filter(|b| mask & (1 << b) == 0)
            .map(|b| {
                let to_go = g[(mask | 1 << b) * k + b];
                (b, dist.get(current, b + 1) * carried + to_go, to_go)
            })
            .find(|&(_, v, _)| v <= target + TIE_TOLERANCE)
            .map(|(b, _, to_go)| (b, to_go))
            .expect("optimal cost-to-go is attained by some successor");
        order.push(next + 1);
        mask |= 1 << next;
        current = next + 1;
        target = to_go;
    }

    let route = Route::new(order)?;
    let cost = cost1(&route, &NodeWeights::new(w.to_vec())?, dist)?;
    Ok(TrpSolution {
        route,
        cost,
        solver: SolverKind::Dp,
        nodes_expanded: expanded,
    })
}

/// Enumerates all `(M − 1)!` routes starting at the depot.
pub fn solve_weighted_trp_bruteforce(w: &NodeWeights, dist: &DistanceMatrix) -> Result<TrpSolution> {
    let n = check_inputs(w, dist, "weighted TRP enumeration", BRUTE_FORCE_MAX_NODES)?;
    let routes = || {
        (1..n).permutations(n - 1).map(|tail| {
            let mut order = Vec::with_capacity(n);
            order.push(0);
            order.extend(tail);
            Route::new(order).expect("permutation of 0..n starting at 0")
        })
    };

    let mut best = f64::INFINITY;
    let mut count: u64 = 0;
    for r in routes() {
        best = best.min(cost1(&r, w, dist)?);
        count += 1;
    }
    // itertools yields permutations in lexicographic order
    for r in routes() {
        let c = cost1(&r, w, dist)?;
        if c <= best + TIE_TOLERANCE {
            return Ok(TrpSolution {
                route: r,
                cost: c,
                solver: SolverKind::BruteForce,
                nodes_expanded: count,
            });
        }
    }
    unreachable!("the minimum is attained by an enumerated route")
}

/// Depot first, then nodes by decreasing weight; ties go to the smaller id.
pub fn naive_route(w: &NodeWeights) -> Route {
    let w = w.as_slice();
    let mut rest: Vec<usize> = (1..w.len()).collect();
    rest.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
    let mut order = vec![0];
    order.extend(rest);
    Route::new(order).expect("sorted node ids form a permutation")
}

/// Shortest closed tour through all nodes (Held–Karp).
pub fn shortest_tour(dist: &DistanceMatrix) -> Result<(f64, Route)> {
    let n = dist.len();
    if !(2..=TOUR_MAX_NODES).contains(&n) {
        return Err(Error::UnsupportedSize {
            solver: "Held-Karp tour",
            min: 2,
            max: TOUR_MAX_NODES,
            found: n,
        });
    }
    let k = n - 1;
    let full: usize = (1 << k) - 1;
    // best[mask][j]: shortest path 0 -> ... -> j covering exactly mask
    let mut best = vec![f64::INFINITY; (1 << k) * k];
    let mut parent = vec![usize::MAX; (1 << k) * k];
    for j in 0..k {
        best[(1 << j) * k + j] = dist.get(0, j + 1);
    }
    for mask in 1..=full {
        for j in (0..k).filter(|j| mask & (1 << j) != 0) {
            let here = best[mask * k + j];
            if !here.is_finite() {
                continue;
            }
            for next in (0..k).filter(|b| mask & (1 << b) == 0) {
                let idx = (mask | 1 << next) * k + next;
                let v = here + dist.get(j + 1, next + 1);
                if v < best[idx] {
                    best[idx] = v;
                    parent[idx] = j;
                }
            }
        }
    }
    let (last, length) = (0..k)
        .map(|j| (j, best[full * k + j] + dist.get(j + 1, 0)))
        .fold((0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });

    let mut rev = Vec::with_capacity(n);
    let (mut mask, mut j) = (full, last);
    while j != usize::MAX {
        rev.push(j + 1);
        let p = parent[mask * k + j];
        mask &= !(1 << j);
        j = p;
    }
    rev.push(0);
    rev.reverse();
    Ok((length, Route::new(rev)?))
}
