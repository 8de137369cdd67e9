//! Flow-based mixed-integer program for the weighted TRP.
//!
//! The crew leaves the depot carrying the total weight `Σ w_i` and drops
//! `w_k` on reaching node `k`; the depot's own weight rides along until the
//! tour closes. `z_{i,j}` is the flow on edge `(i, j)` and `y_{i,j}` marks the
//! edge as used. The objective `Σ d_{i,j} z_{i,j}` equals Cost 1 of the
//! encoded route, and flow conservation rules out subtours.

use std::fmt::Write as _;

use crate::cost::cost1;
use crate::error::Result;
use crate::types::{DistanceMatrix, NodeWeights, Route};

/// Absolute tolerance for equality residuals and inequality violations.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    /// Continuous flow on edge `(i, j)`, 0-based.
    Z(usize, usize),
    /// Binary edge indicator, 0-based.
    Y(usize, usize),
}

impl Var {
    /// LP-file name with 1-based indices, e.g. `z_1_2`.
    pub fn name(&self) -> String {
        match *self {
            Var::Z(i, j) => format!("z_{}_{}", i + 1, j + 1),
            Var::Y(i, j) => format!("y_{}_{}", i + 1, j + 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Eq,
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(Var, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpInstance {
    n: usize,
    weights: Vec<f64>,
    dist: DistanceMatrix,
    caps: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl MilpInstance {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Objective coefficient of `z_{i,j}`.
    pub fn objective_coef(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }

    /// Upper bound `r_{i,j}` linking `z_{i,j}` to `y_{i,j}`.
    pub fn cap(&self, i: usize, j: usize) -> f64 {
        self.caps[i * self.n + j]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn binary_count(&self) -> usize {
        self.n * self.n
    }

    pub fn continuous_count(&self) -> usize {
        self.n * self.n
    }
}

/// Builds the formulation for weights `w` on graph `dist`.
///
/// Rows, in order: `deg_in_j`, `deg_out_i`, `ret`, `flow_k`, `link_i_j`.
/// The diagonal fixings `z_{i,i} = y_{i,i} = 0` and `0 ≤ z_{i,j} ≤ r_{i,j}`
/// are variable bounds.
pub fn build_milp(w: &NodeWeights, dist: &DistanceMatrix) -> Result<MilpInstance> {
    let n = dist.len();
    w.check_len(n)?;
    let weights = w.as_slice().to_vec();
    let total: f64 = weights.iter().sum();

    // An edge leaving interior node i carries at most the total minus w_i;
    // the depot weight stays on board until the tour closes.
    let mut caps = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            caps[i * n + j] = if j == 0 {
                weights[0]
            } else if i == 0 {
                total
            } else {
                total - weights[i]
            };
        }
    }

    let mut constraints = Vec::with_capacity(2 * n + 1 + n + n * n);
    for j in 0..n {
        constraints.push(Constraint {
            name: format!("deg_in_{}", j + 1),
            terms: (0..n).map(|i| (Var::Y(i, j), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for i in 0..n {
        constraints.push(Constraint {
            name: format!("deg_out_{}", i + 1),
            terms: (0..n).map(|j| (Var::Y(i, j), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    constraints.push(Constraint {
        name: "ret".into(),
        terms: (0..n).map(|i| (Var::Z(i, 0), 1.0)).collect(),
        sense: Sense::Eq,
        rhs: weights[0],
    });
    for k in 0..n {
        // z_{k,k} enters with +1 and -1 and cancels
        let mut terms: Vec<(Var, f64)> = (0..n).filter(|&i| i != k).map(|i| (Var::Z(i, k), 1.0)).collect();
        terms.extend((0..n).filter(|&j| j != k).map(|j| (Var::Z(k, j), -1.0)));
        constraints.push(Constraint {
            name: format!("flow_{}", k + 1),
            terms,
            sense: Sense::Eq,
            rhs: if k == 0 { weights[0] - total } else { weights[k] },
        });
    }
    for i in 0..n {
        for j in 0..n {
            constraints.push(Constraint {
                name: format!("link_{}_{}", i + 1, j + 1),
                terms: vec![(Var::Z(i, j), 1.0), (Var::Y(i, j), -caps[i * n + j])],
                sense: Sense::Le,
                rhs: 0.0,
            });
        }
    }

    Ok(MilpInstance {
        n,
        weights,
        dist: dist.clone(),
        caps,
        constraints,
    })
}

/// Values for every `y` and `z` variable.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment {
    n: usize,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl FlowAssignment {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            y: vec![0.0; n * n],
            z: vec![0.0; n * n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn value(&self, v: Var) -> f64 {
        match v {
            Var::Z(i, j) => self.z[i * self.n + j],
            Var::Y(i, j) => self.y[i * self.n + j],
        }
    }

    pub fn set(&mut self, v: Var, value: f64) {
        match v {
            Var::Z(i, j) => self.z[i * self.n + j] = value,
            Var::Y(i, j) => self.y[i * self.n + j] = value,
        }
    }

    /// Replaces every `y` value with those of `other`.
    pub fn with_edges_of(mut self, other: &FlowAssignment) -> Self {
        self.y.clone_from(&other.y);
        self
    }
}

/// Flow induced by a route: `y = 1` on tour edges, and the edge leaving the
/// `t`-th visited node carries the total weight minus what was dropped so far.
pub fn route_to_flow(route: &Route, w: &NodeWeights, dist: &DistanceMatrix) -> Result<FlowAssignment> {
    let n = dist.len();
    route.check_len(n)?;
    w.check_len(n)?;
    let w = w.as_slice();
    let mut flow = FlowAssignment::zeros(n);
    let mut carried: f64 = w.iter().sum();
    for (t, (a, b)) in route.edges().enumerate() {
        if t > 0 {
            carried -= w[a];
        }
        flow.set(Var::Y(a, b), 1.0);
        flow.set(Var::Z(a, b), carried);
    }
    Ok(flow)
}

/// `Σ d_{i,j} z_{i,j}`.
pub fn objective(instance: &MilpInstance, flow: &FlowAssignment) -> f64 {
    let n = instance.n;
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| instance.objective_coef(i, j) * flow.value(Var::Z(i, j)))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowCheck {
    pub name: String,
    pub activity: f64,
    pub rhs: f64,
    /// `activity − rhs`.
    pub residual: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub rows: Vec<RowCheck>,
    /// Variable-bound and integrality violations, by variable name.
    pub bound_violations: Vec<String>,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn violated_rows(&self) -> impl Iterator<Item = &RowCheck> {
        self.rows.iter().filter(|r| r.violated)
    }
}

/// Evaluates every row and variable bound of `instance` at `flow`.
pub fn check_feasible(instance: &MilpInstance, flow: &FlowAssignment) -> FeasibilityReport {
    let tol = FEASIBILITY_TOLERANCE;
    let rows: Vec<RowCheck> = instance
        .constraints
        .iter()
        .map(|c| {
            let activity: f64 = c.terms.iter().map(|&(v, a)| a * flow.value(v)).sum();
            let residual = activity - c.rhs;
            let violated = match c.sense {
                Sense::Eq => residual.abs() > tol,
                Sense::Le => residual > tol,
            };
            RowCheck {
                name: c.name.clone(),
                activity,
                rhs: c.rhs,
                residual,
                violated,
            }
        })
        .collect();

    let n = instance.n;
    let mut bound_violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let z = flow.value(Var::Z(i, j));
            let y = flow.value(Var::Y(i, j));
            let z_hi = if i == j { 0.0 } else { instance.cap(i, j) };
            if z < -tol || z > z_hi + tol {
                bound_violations.push(Var::Z(i, j).name());
            }
            let binary = y.abs() <= tol || (y - 1.0).abs() <= tol;
            if !binary || (i == j && y.abs() > tol) {
                bound_violations.push(Var::Y(i, j).name());
            }
        }
    }

    let feasible = bound_violations.is_empty() && rows.iter().all(|r| !r.violated);
    FeasibilityReport {
        rows,
        bound_violations,
        feasible,
    }
}

/// Checks route-induced flow feasibility and returns the MILP objective.
pub fn route_objective(route: &Route, w: &NodeWeights, dist: &DistanceMatrix) -> Result<(bool, f64, f64)> {
    let inst = build_milp(w, dist)?;
    let flow = route_to_flow(route, w, dist)?;
    let report = check_feasible(&inst, &flow);
    Ok((report.feasible, objective(&inst, &flow), cost1(route, w, dist)?))
}

/// Formats like C's `%.17g`.
pub fn format_g17(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (16 - exp) as usize, v);
        trim_fraction(&fixed).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

const TERMS_PER_LINE: usize = 6;

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) {
    for (idx, (coef, name)) in terms.enumerate() {
        if idx > 0 && idx % TERMS_PER_LINE == 0 {
            out.push_str("\n  ");
        }
        let sign = if coef < 0.0 { '-' } else { '+' };
        let mag = format_g17(coef.abs());
        if idx == 0 {
            if coef < 0.0 {
                let _ = write!(out, " - {mag} {name}");
            } else {
                let _ = write!(out, " {mag} {name}");
            }
        } else {
            let _ = write!(out, " {sign} {mag} {name}");
        }
    }
}

/// Serializes the instance in CPLEX LP format.
///
/// Output is a pure function of the instance: sections, row order, variable
/// order and number formatting are all fixed.
pub fn export_lp(instance: &MilpInstance) -> String {
    let n = instance.n;
    let mut out = String::new();
    out.push_str("\\ Weighted traveling repairman, flow formulation\n");
    let _ = writeln!(out, "\\ nodes: {n}");
    out.push_str("Minimize\n obj:");
    write_terms(
        &mut out,
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| (instance.objective_coef(i, j), Var::Z(i, j).name())),
    );
    out.push_str("\nSubject To\n");
    for c in &instance.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, c.terms.iter().map(|&(v, a)| (a, v.name())));
        let op = match c.sense {
            Sense::Eq => "=",
            Sense::Le => "<=",
        };
        let _ = writeln!(out, " {op} {}", format_g17(c.rhs));
    }
    out.push_str("Bounds\n");
    for i in 0..n {
        for j in 0..n {
            if i == j {
                let _ = writeln!(out, " {} = 0", Var::Z(i, j).name());
            } else {
                let _ = writeln!(out, " 0 <= {} <= {}", Var::Z(i, j).name(), format_g17(instance.cap(i, j)));
            }
        }
    }
    for i in 0..n {
        let _ = writeln!(out, " {} = 0", Var::Y(i, i).name());
    }
    out.push_str("Binaries\n");
    for i in 0..n {
        out.push(' ');
        let names: Vec<String> = (0..n).map(|j| Var::Y(i, j).name()).collect();
        out.push_str(&names.join(" "));
        out.push('\n');
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> (NodeWeights, DistanceMatrix) {
        (
            NodeWeights::uniform(n, 1.0).unwrap(),
            DistanceMatrix::from_fn(n, |_, _| 1.0).unwrap(),
        )
    }

    #[test]
    fn row_counts() {
        let (w, d) = unit(4);
        let inst = build_milp(&w, &d).unwrap();
        assert_eq!(inst.binary_count(), 16);
        assert_eq!(inst.constraints().len(), 2 * 4 + 1 + 4 + 16);
    }

    #[test]
    fn depot_flow_balance_rhs() {
        let (w, d) = unit(3);
        let inst = build_milp(&w, &d).unwrap();
        let row = inst.constraints().iter().find(|c| c.name == "flow_1").unwrap();
        assert_eq!(row.rhs, -2.0);
        let row = inst.constraints().iter().find(|c| c.name == "flow_3").unwrap();
        assert_eq!(row.rhs, 1.0);
    }

    #[test]
    fn caps_follow_case_table() {
        let w = NodeWeights::new(vec![0.5, 1.0, 2.0]).unwrap();
        let d = DistanceMatrix::from_fn(3, |_, _| 1.0).unwrap();
        let inst = build_milp(&w, &d).unwrap();
        assert_eq!(inst.cap(2, 0), 0.5);
        assert_eq!(inst.cap(0, 0), 0.5);
        assert_eq!(inst.cap(0, 2), 3.5);
        assert_eq!(inst.cap(1, 2), 2.5);
        assert_eq!(inst.cap(2, 1), 1.5);
    }

    #[test]
    fn light_first_stop_stays_feasible() {
        // heavy depot, light first stop: the edge 2 -> 3 carries 0.9 + 0.5
        let w = NodeWeights::new(vec![0.9, 0.1, 0.5]).unwrap();
        let d = DistanceMatrix::from_fn(3, |_, _| 1.0).unwrap();
        let inst = build_milp(&w, &d).unwrap();
        let flow = route_to_flow(&Route::identity(3), &w, &d).unwrap();
        assert!((flow.value(Var::Z(1, 2)) - 1.4).abs() < 1e-15);
        assert!(flow.value(Var::Z(1, 2)) > w.as_slice()[1..].iter().sum::<f64>());
        assert!(check_feasible(&inst, &flow).feasible);
    }

    #[test]
    fn unit_flow_bookkeeping() {
        let (w, d) = unit(3);
        let r = Route::identity(3);
        let flow = route_to_flow(&r, &w, &d).unwrap();
        assert_eq!(flow.value(Var::Z(0, 1)), 3.0);
        assert_eq!(flow.value(Var::Z(1, 2)), 2.0);
        assert_eq!(flow.value(Var::Z(2, 0)), 1.0);
        let inst = build_milp(&w, &d).unwrap();
        assert!(check_feasible(&inst, &flow).feasible);
        assert_eq!(objective(&inst, &flow), 6.0);
    }

    #[test]
    fn zero_weights_zero_flow() {
        let w = NodeWeights::uniform(4, 0.0).unwrap();
        let d = DistanceMatrix::from_fn(4, |i, j| (i + j) as f64).unwrap();
        let r = Route::new(vec![0, 2, 3, 1]).unwrap();
        let (feasible, obj, c1) = route_objective(&r, &w, &d).unwrap();
        assert!(feasible);
        assert_eq!(obj, 0.0);
        assert_eq!(c1, 0.0);
    }

    #[test]
    fn perturbed_flow_is_flagged() {
        let (w, d) = unit(4);
        let r = Route::identity(4);
        let inst = build_milp(&w, &d).unwrap();
        let mut flow = route_to_flow(&r, &w, &d).unwrap();
        flow.set(Var::Z(1, 2), flow.value(Var::Z(1, 2)) + 1.0);
        let report = check_feasible(&inst, &flow);
        assert!(!report.feasible);
        let names: Vec<_> = report.violated_rows().map(|r| r.name.as_str()).collect();
        assert!(names.contains(&"flow_2"));
        assert!(names.contains(&"flow_3"));
    }

    #[test]
    fn mismatched_edges_violate_linking() {
        let (w, d) = unit(4);
        let inst = build_milp(&w, &d).unwrap();
        let a = route_to_flow(&Route::new(vec![0, 1, 2, 3]).unwrap(), &w, &d).unwrap();
        let b = route_to_flow(&Route::new(vec![0, 3, 2, 1]).unwrap(), &w, &d).unwrap();
        let mixed = a.with_edges_of(&b);
        let report = check_feasible(&inst, &mixed);
        assert!(report.violated_rows().any(|r| r.name.starts_with("link_")));
    }

    #[test]
    fn g17_formatting() {
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(-2.0), "-2");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(1.5e20), "1.5e+20");
        assert_eq!(format_g17(2.5e-7), "2.4999999999999999e-07");
        assert_eq!(format_g17(123.25), "123.25");
    }

    #[test]
    fn empty_weights_fix_flow_bounds() {
        let w = NodeWeights::uniform(3, 0.0).unwrap();
        let d = DistanceMatrix::from_fn(3, |_, _| 2.0).unwrap();
        let lp = export_lp(&build_milp(&w, &d).unwrap());
        let bounds = lp.split("Bounds\n").nth(1).unwrap().split("Binaries").next().unwrap();
        for line in bounds.lines().filter(|l| l.contains("z_")) {
            assert!(line.ends_with("<= 0") || line.ends_with("= 0"), "{line}");
        }
    }

    #[test]
    fn export_is_deterministic() {
        let w = NodeWeights::new(vec![0.2, 0.7, 0.4, 0.9]).unwrap();
        let d = DistanceMatrix::from_fn(4, |i, j| 0.3 * (i + 2 * j) as f64 + 0.1).unwrap();
        let a = export_lp(&build_milp(&w, &d).unwrap());
        let b = export_lp(&build_milp(&w, &d).unwrap());
        assert_eq!(a, b);
    }
}
