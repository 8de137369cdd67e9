//! Domain types shared by every module.
//!
//! Node indices are 0-based inside the library; node 0 is the depot where
//! every route starts and ends. Conversions to the 1-based ids used in files
//! and route strings (`1-3-2-1`) live on [`Route`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in feature space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("feature vector must have dimension >= 1".into()));
        }
        if let Some(v) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature coordinate {v}")));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

/// Class label, `+1` for a failure event and `-1` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    /// Parses `+1`/`1`/`-1` (integers or floats equal to them).
    pub fn from_value(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Label::Positive)
        } else if v == -1.0 {
            Ok(Label::Negative)
        } else {
            Err(Error::InvalidInput(format!("label must be -1 or +1, got {v}")))
        }
    }
}

/// Training examples `(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Vec<FeatureVector>,
    labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<Label>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidInput("dataset must contain at least one example".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels",
                expected: features.len(),
                found: labels.len(),
            });
        }
        let dim = features[0].dim();
        if let Some(f) = features.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                context: "dataset features",
                expected: dim,
                found: f.dim(),
            });
        }
        Ok(Self { features, labels })
    }

    /// Convenience constructor from raw rows and `±1` label values.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: &[f64]) -> Result<Self> {
        let features = rows.into_iter().map(FeatureVector::new).collect::<Result<Vec<_>>>()?;
        let labels = labels.iter().map(|&v| Label::from_value(v)).collect::<Result<Vec<_>>>()?;
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].dim()
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FeatureVector, Label)> {
        self.features.iter().zip(self.labels.iter().copied())
    }
}

/// Unlabeled node features `x̃_i`; node 0 is the depot.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    nodes: Vec<FeatureVector>,
}

impl NodeSet {
    pub fn new(nodes: Vec<FeatureVector>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a node set needs at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        let dim = nodes[0].dim();
        if let Some(f) = nodes.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                context: "node features",
                expected: dim,
                found: f.dim(),
            });
        }
        Ok(Self { nodes })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows.into_iter().map(FeatureVector::new).collect::<Result<Vec<_>>>()?)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    pub fn nodes(&self) -> &[FeatureVector] {
        &self.nodes
    }
}

/// Complete directed graph of travel distances. Symmetry is not required.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "distance matrix needs at least 2 nodes, got {n}"
            )));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "distance matrix row",
                    expected: n,
                    found: row.len(),
                });
            }
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("distance d[{}][{}]", i + 1, j + 1)));
                }
                if v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "distance d[{}][{}] = {v} is negative",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "diagonal distance d[{}][{}] = {v} must be 0",
                        i + 1,
                        j + 1
                    )));
                }
                data.push(v);
            }
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from a function of `(from, to)`; the diagonal is forced to 0.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { f(i, j) }).collect())
            .collect();
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.n + to]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n)
    }

    /// Returns a copy with `delta` added to every off-diagonal entry.
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        Self::from_fn(self.n, |i, j| self.get(i, j) + delta)
    }
}

/// Visit order of a closed tour starting (and ending) at node 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Route(Vec<usize>);

impl Route {
    /// Validates a 0-based visit order.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n < 2 {
            return Err(Error::InvalidRoute(format!("route must visit at least 2 nodes, got {n}")));
        }
        if order[0] != 0 {
            return Err(Error::InvalidRoute(format!(
                "route must start at node 1, starts at {}",
                order[0] + 1
            )));
        }
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidRoute(format!(
                    "{:?} is not a permutation of 1..={n}",
                    order.iter().map(|v| v + 1).collect::<Vec<_>>()
                )));
            }
        }
        Ok(Self(order))
    }

    /// Validates a 1-based visit order such as `[1, 3, 2]`.
    pub fn from_one_based(order: &[usize]) -> Result<Self> {
        if order.contains(&0) {
            return Err(Error::InvalidRoute("1-based node ids must be >= 1".into()));
        }
        Self::new(order.iter().map(|v| v - 1).collect())
    }

    /// The identity route `0, 1, ..., n-1`.
    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|v| v + 1).collect()
    }

    /// Consecutive edges of the closed tour, including the return to node 0.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.0.len();
        (0..n).map(move |k| (self.0[k], self.0[(k + 1) % n]))
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                context: "route length",
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }
}

// Serialized as the 1-based visit order.
impl Serialize for Route {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Route {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<usize>::deserialize(d)?;
        Route::from_one_based(&ids).map_err(serde::de::Error::custom)
    }
}

/// Dash-joined 1-based ids closing at the start, e.g. `1-5-3-4-2-1`.
impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.0 {
            write!(f, "{}-", v + 1)?;
        }
        write!(f, "{}", self.0[0] + 1)
    }
}

/// Weight vector `λ` of the linear scoring function `f(x) = λ·x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelParams(Vec<f64>);

impl ModelParams {
    pub fn new(lambda: Vec<f64>) -> Self {
        Self(lambda)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Score `λ·x`.
    pub fn score(&self, x: &FeatureVector) -> Result<f64> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "model parameters vs features",
                expected: self.dim(),
                found: x.dim(),
            });
        }
        Ok(crate::math::dot(&self.0, x.coords()))
    }
}

impl From<Vec<f64>> for ModelParams {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Non-negative per-node weights `p̄(x̃_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeWeights(Vec<f64>);

impl NodeWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(v) = w.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "node weights must be finite and non-negative, got {v}"
            )));
        }
        Ok(Self(w))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                context: "node weights",
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }
}
