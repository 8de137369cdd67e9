//! ℓ2-regularized logistic training and ranking evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{dot, sigmoid, softplus, CompensatedSum};
use crate::types::{FeatureVector, Label, LabeledDataset, ModelParams};

/// Settings for the batch gradient-descent trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// ℓ2 coefficient `C2`.
    pub c2: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step multiplier applied on each backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl TrainConfig {
    pub fn new(c2: f64) -> Self {
        Self {
            c2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c2 >= 0.0 && self.c2.is_finite()) {
            return Err(Error::InvalidInput(format!("C2 must be >= 0, got {}", self.c2)));
        }
        if self.grad_tol.is_nan() || self.grad_tol <= 0.0 {
            return Err(Error::InvalidInput(format!("grad_tol must be > 0, got {}", self.grad_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidInput("line-search constants must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c2: 0.0,
            max_iters: 10_000,
            grad_tol: 1e-8,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

/// Result of a descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Gradient descent with Armijo backtracking.
///
/// The trial step is the Barzilai–Borwein length from the previous accepted
/// step; only steps that do not increase the objective are accepted.
pub fn minimize_armijo<F>(mut eval: F, x0: Vec<f64>, cfg: &TrainConfig) -> Result<DescentResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0;
    let (mut f, mut g) = eval(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("objective {f} at the starting point")));
    }
    let mut gn = norm(&g);
    let mut trace = vec![f];
    let mut step = 1.0 / gn.max(1.0);
    let mut iterations = 0;

    while iterations < cfg.max_iters && gn > cfg.grad_tol {
        let mut t = step;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let xn: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let (fn_, gn_) = eval(&xn);
            if fn_.is_finite() && gn_.iter().all(|v| v.is_finite()) {
                let sufficient = fn_ <= f - cfg.armijo * t * gn * gn;
                let flat_but_better = fn_ <= f && norm(&gn_) < gn;
                if sufficient || flat_but_better {
                    accepted = Some((xn, fn_, gn_, t));
                    break;
                }
            }
            t *= cfg.backtrack;
        }
        let Some((xn, fn_, gn_, t)) = accepted else {
            break;
        };
        iterations += 1;

        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn_.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { t * 2.0 };
        step = step.clamp(1e-12, 1e12);

        x = xn;
        f = fn_;
        g = gn_;
        gn = norm(&g);
        trace.push(f);
    }

    Ok(DescentResult {
        x,
        objective: f,
        grad_norm: gn,
        iterations,
        converged: gn <= cfg.grad_tol,
        trace,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Estimated failure probability `1 / (1 + e^{−λ·x})`.
pub fn sigmoid_prob(lambda: &ModelParams, x: &FeatureVector) -> Result<f64> {
    Ok(sigmoid(lambda.score(x)?))
}

/// `Σ_i ln(1 + e^{−y_i λ·x_i}) + C2 ‖λ‖²`.
pub fn training_error(lambda: &ModelParams, data: &LabeledDataset, c2: f64) -> Result<f64> {
    check_dim(lambda, data)?;
    Ok(loss_and_grad(lambda.as_slice(), data, c2, false).0)
}

/// Gradient of [`training_error`] with respect to `λ`.
pub fn training_gradient(lambda: &ModelParams, data: &LabeledDataset, c2: f64) -> Result<Vec<f64>> {
    check_dim(lambda, data)?;
    Ok(loss_and_grad(lambda.as_slice(), data, c2, true).1)
}

/// Loss and gradient in one pass; summation order is the dataset order.
///
/// The loss is summed with compensation so that steps too small to change it
/// evaluate to the same value instead of rounding noise.
pub(crate) fn loss_and_grad(lambda: &[f64], data: &LabeledDataset, c2: f64, with_grad: bool) -> (f64, Vec<f64>) {
    let mut loss = CompensatedSum::default();
    let mut grad = if with_grad { vec![0.0; lambda.len()] } else { Vec::new() };
    for (x, y) in data.iter() {
        let margin = y.sign() * dot(lambda, x.coords());
        loss.add(softplus(-margin));
        if with_grad {
            let coef = -y.sign() * sigmoid(-margin);
            for (g, xi) in grad.iter_mut().zip(x.coords()) {
                *g += coef * xi;
            }
        }
    }
    loss.add(c2 * dot(lambda, lambda));
    if with_grad {
        for (g, l) in grad.iter_mut().zip(lambda) {
            *g += 2.0 * c2 * l;
        }
    }
    (loss.value(), grad)
}

fn check_dim(lambda: &ModelParams, data: &LabeledDataset) -> Result<()> {
    if lambda.dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            context: "model parameters vs training features",
            expected: data.dim(),
            found: lambda.dim(),
        });
    }
    Ok(())
}

/// Trained logistic model and solver diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticFit {
    pub params: ModelParams,
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

/// Minimizes [`training_error`] from `λ = 0`.
pub fn fit_logistic(data: &LabeledDataset, cfg: &TrainConfig) -> Result<LogisticFit> {
    fit_logistic_from(data, cfg, ModelParams::zeros(data.dim()))
}

/// Minimizes [`training_error`] from a given starting point.
pub fn fit_logistic_from(data: &LabeledDataset, cfg: &TrainConfig, start: ModelParams) -> Result<LogisticFit> {
    cfg.validate()?;
    check_dim(&start, data)?;
    let c2 = cfg.c2;
    let res = minimize_armijo(|l| loss_and_grad(l, data, c2, true), start.as_slice().to_vec(), cfg)?;
    Ok(LogisticFit {
        params: ModelParams::new(res.x),
        objective: res.objective,
        grad_norm: res.grad_norm,
        iterations: res.iterations,
        converged: res.converged,
        trace: res.trace,
    })
}

/// Area under the ROC curve in Mann–Whitney form; tied pairs count one half.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "auc labels",
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::NonFinite(format!("auc score {s}")));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let n_pos = labels.iter().filter(|l| **l == Label::Positive).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    // Twice the U statistic keeps every term an integer.
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let group = &idx[start..end];
        let pos = group.iter().filter(|&&i| labels[i] == Label::Positive).count() as u64;
        let neg = group.len() as u64 - pos;
        twice_u += pos * (2 * neg_below + neg);
        neg_below += neg;
        start = end;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}
