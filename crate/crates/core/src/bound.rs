//! Generalization bound for models whose optimal route cost is capped.
//!
//! Restricting the hypothesis class to models whose traversal cost stays below
//! `C_g` cuts the ball `‖λ‖ ≤ M1` with a half-space `c·λ ≤ 1`. The covering
//! number shrinks by the volume fraction `α` of what remains, and the bound
//! is `4α (32 M1 M2 / ε + 1)^d exp(−m ε² / (512 (M1 M2)²))`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::math::sigmoid;
use crate::trp::shortest_tour;
use crate::types::{DistanceMatrix, NodeSet};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    /// Cap on `‖λ‖₂`.
    pub m1: f64,
    /// Cap on `‖x‖₂` over the graph nodes.
    pub m2: f64,
    pub cg: f64,
    pub eps: f64,
    /// Number of training examples.
    pub m: u64,
    pub nodes: NodeSet,
    pub dist: DistanceMatrix,
}

impl BoundInputs {
    pub fn dim(&self) -> usize {
        self.nodes.dim()
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("M1", self.m1), ("M2", self.m2), ("Cg", self.cg), ("eps", self.eps)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.m == 0 {
            return Err(Error::InvalidInput("training size m must be >= 1".into()));
        }
        if self.nodes.len() != self.dist.len() {
            return Err(Error::DimensionMismatch {
                context: "distance matrix",
                expected: self.nodes.len(),
                found: self.dist.len(),
            });
        }
        let tol = 1e-12 * self.m2.max(1.0);
        for (i, x) in self.nodes.nodes().iter().enumerate() {
            if x.norm() > self.m2 + tol {
                return Err(Error::InvalidInput(format!(
                    "node {} has feature norm {} above M2 = {}",
                    i + 1,
                    x.norm(),
                    self.m2
                )));
            }
        }
        Ok(())
    }
}

/// Lower bounds on every node's latency under any route.
///
/// Entry `i ≥ 1` is the shortest path from the depot (no triangle inequality
/// assumed); entry 0 is the shortest closed tour, since the depot waits for
/// the whole tour.
pub fn shortest_distances(dist: &DistanceMatrix) -> Result<Vec<f64>> {
    let (tour, _) = shortest_tour(dist)?;
    let n = dist.len();
    let mut best = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    best[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !done[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .expect("an unsettled node remains");
        done[u] = true;
        for v in 0..n {
            let via = best[u] + dist.get(u, v);
            if via < best[v] {
                best[v] = via;
            }
        }
    }
    best[0] = tour;
    Ok(best)
}

/// Slope and intercept of the line `m1·z + m0` that stays below the sigmoid
/// on `[−a, a]`: the tangent at `z = −a`.
pub fn sigmoid_line(a: f64) -> (f64, f64) {
    let slope = sigmoid(a) * sigmoid(-a);
    (slope, a * slope + sigmoid(-a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVector {
    pub slope: f64,
    pub intercept: f64,
    pub c_tilde: Vec<f64>,
    pub c_tilde0: f64,
    pub c: Vec<f64>,
}

/// Half-space normal `c` with `c·λ ≤ 1` implied by the cost cap.
pub fn c_vector(inputs: &BoundInputs, d_i: &[f64]) -> Result<CVector> {
    let (slope, intercept) = sigmoid_line(inputs.m1 * inputs.m2);
    let dim = inputs.dim();
    let mut c_tilde = vec![0.0; dim];
    for (x, &di) in inputs.nodes.nodes().iter().zip(d_i) {
        for (c, xj) in c_tilde.iter_mut().zip(x.coords()) {
            *c += di * xj;
        }
    }
    c_tilde.iter_mut().for_each(|c| *c *= slope);
    let c_tilde0 = intercept * d_i.iter().sum::<f64>();
    if inputs.cg <= c_tilde0 {
        return Err(Error::CapBelowIntercept {
            cg: inputs.cg,
            c_tilde0,
        });
    }
    let c = c_tilde.iter().map(|v| v / (inputs.cg - c_tilde0)).collect();
    Ok(CVector {
        slope,
        intercept,
        c_tilde,
        c_tilde0,
        c,
    })
}

const BETA_MAX_ITERS: usize = 500;
const BETA_EPS: f64 = 1e-16;
const BETA_TINY: f64 = 1e-300;

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Continued fraction by the modified Lentz method, applied to `I_x(a, b)`
/// when `x < (a+1)/(a+b+2)` and to `1 − I_{1−x}(b, a)` otherwise.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !((0.0..=1.0).contains(&x) && a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::BetaDomain { x, a, b });
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (-x).ln_1p();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a)? / b)
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let clamp = |v: f64| if v.abs() < BETA_TINY { BETA_TINY } else { v };
    let mut c = 1.0;
    let mut d = 1.0 / clamp(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=BETA_MAX_ITERS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / clamp(1.0 + even * d);
        c = clamp(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / clamp(1.0 + odd * d);
        c = clamp(1.0 + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < BETA_EPS {
            return Ok(h);
        }
    }
    Err(Error::NonFinite(format!(
        "incomplete beta continued fraction did not converge for x={x}, a={a}, b={b}"
    )))
}

/// Fraction of a `d`-ball of radius `r` lying on the center's side of a
/// hyperplane at distance `z` from the center.
pub fn cap_complement_fraction(dim: usize, z: f64, r: f64) -> Result<f64> {
    if z >= r {
        return Ok(1.0);
    }
    let t = z / r;
    let y = (1.0 - t * t).clamp(0.0, 1.0);
    Ok(1.0 - 0.5 * reg_inc_beta(y, (dim as f64 + 1.0) / 2.0, 0.5)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaParts {
    /// `‖c‖⁻¹ + ε/(32 M2)`; `None` when `c = 0`.
    pub z_prime: Option<f64>,
    pub r_prime: f64,
    pub alpha: f64,
}

/// Volume fraction `α(d, C_g, c)`; a zero `c` is a vacuous constraint.
pub fn alpha(inputs: &BoundInputs, c: &[f64]) -> Result<AlphaParts> {
    let shift = inputs.eps / (32.0 * inputs.m2);
    let r_prime = inputs.m1 + shift;
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(AlphaParts {
            z_prime: None,
            r_prime,
            alpha: 1.0,
        });
    }
    let z_prime = 1.0 / norm + shift;
    Ok(AlphaParts {
        z_prime: Some(z_prime),
        r_prime,
        alpha: cap_complement_fraction(inputs.dim(), z_prime, r_prime)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub dim: usize,
    pub m1: f64,
    pub m2: f64,
    pub cg: f64,
    pub eps: f64,
    pub m: u64,
    pub d_i: Vec<f64>,
    pub d_sum: f64,
    /// Set when `C_g` exceeds `Σ d_i`; the cap can then be loose.
    pub cg_above_distance_sum: bool,
    pub slope: f64,
    pub intercept: f64,
    pub c_tilde: Vec<f64>,
    pub c_tilde0: f64,
    pub c: Vec<f64>,
    /// `‖c‖₂⁻¹`; `None` when `c = 0`.
    pub c_norm_inv: Option<f64>,
    pub z_prime: Option<f64>,
    pub r_prime: f64,
    pub alpha: f64,
    /// `(32 M1 M2 / ε + 1)^d`.
    pub covering_factor: f64,
    /// `exp(−m ε² / (512 (M1 M2)²))`.
    pub exp_factor: f64,
    pub ln_bound: f64,
    pub bound: f64,
}

/// Evaluates every quantity of the bound.
pub fn generalization_bound(inputs: &BoundInputs) -> Result<BoundReport> {
    inputs.validate()?;
    let d_i = shortest_distances(&inputs.dist)?;
    let cv = c_vector(inputs, &d_i)?;
    let parts = alpha(inputs, &cv.c)?;
    let dim = inputs.dim();
    let mm = inputs.m1 * inputs.m2;
    let ln_cover = dim as f64 * (32.0 * mm / inputs.eps).ln_1p();
    let ln_exp = -(inputs.m as f64) * inputs.eps * inputs.eps / (512.0 * mm * mm);
    let ln_bound = 4f64.ln() + parts.alpha.ln() + ln_cover + ln_exp;
    let d_sum = d_i.iter().sum();
    let c_norm = cv.c.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(BoundReport {
        dim,
        m1: inputs.m1,
        m2: inputs.m2,
        cg: inputs.cg,
        eps: inputs.eps,
        m: inputs.m,
        cg_above_distance_sum: inputs.cg > d_sum,
        d_i,
        d_sum,
        slope: cv.slope,
        intercept: cv.intercept,
        c_tilde: cv.c_tilde,
        c_tilde0: cv.c_tilde0,
        c_norm_inv: (c_norm > 0.0).then(|| 1.0 / c_norm),
        c: cv.c,
        z_prime: parts.z_prime,
        r_prime: parts.r_prime,
        alpha: parts.alpha,
        covering_factor: ln_cover.exp(),
        exp_factor: ln_exp.exp(),
        ln_bound,
        bound: ln_bound.exp(),
    })
}
