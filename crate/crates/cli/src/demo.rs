//! Small seeded illustrations: two training clusters and a handful of graph
//! nodes. In the six-node layout nodes 1 to 5 lie on the cluster axis and
//! node 6 sits off it, where no training data constrains its score, at the
//! end of a dead-end spur.

use std::path::PathBuf;

use mltrp::cost::sigmoid_weights;
use mltrp::opt::{sequential_pipeline, solve, Method, MltrpConfig, MltrpSolution};
use mltrp::{DistanceMatrix, LabeledDataset, ModelParams, NodeSet, Route};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::commands::RunConfig;
use crate::error::Result;
use crate::io::{distances_csv, labeled_csv, nodes_csv, write_atomic, write_json};

pub const DEMO_FILE: &str = "demo.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemoKind {
    FourNode,
    SixNode,
}

const POSITIVE_CENTER: [f64; 2] = [1.0, 1.0];
const NEGATIVE_CENTER: [f64; 2] = [-1.0, -1.0];
const CLUSTER_SPREAD: f64 = 0.6;
const TRAIN_PER_CLASS: usize = 20;
const TEST_PER_CLASS: usize = 20;

/// Node features `(x1, x2)` and planar positions for Manhattan distances.
struct Layout {
    features: &'static [[f64; 2]],
    positions: &'static [[i32; 2]],
}

const FOUR_NODE: Layout = Layout {
    features: &[[-0.8, -0.6], [0.9, 1.2], [0.2, 0.3], [-1.1, -0.9]],
    positions: &[[0, 0], [3, 1], [1, 2], [-2, 1]],
};

const SIX_NODE: Layout = Layout {
    features: &[[-0.1, -0.1], [0.3, 0.3], [-0.2, -0.2], [0.1, 0.1], [-0.3, -0.3], [2.0, -0.8]],
    positions: &[[0, 0], [2, 0], [2, 2], [0, 2], [-2, 1], [2, -3]],
};

impl DemoKind {
    fn layout(self) -> &'static Layout {
        match self {
            DemoKind::FourNode => &FOUR_NODE,
            DemoKind::SixNode => &SIX_NODE,
        }
    }

    pub fn default_c1(self) -> f64 {
        match self {
            DemoKind::FourNode => 0.5,
            DemoKind::SixNode => 2.0,
        }
    }
}

pub struct DemoInstance {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub nodes: NodeSet,
    pub dist: DistanceMatrix,
}

fn clusters(rng: &mut ChaCha8Rng, per_class: usize) -> LabeledDataset {
    let noise = Normal::new(0.0, CLUSTER_SPREAD).expect("positive spread");
    let mut rows = Vec::with_capacity(2 * per_class);
    let mut labels = Vec::with_capacity(2 * per_class);
    for k in 0..2 * per_class {
        let (center, label) = if k % 2 == 0 {
            (POSITIVE_CENTER, 1.0)
        } else {
            (NEGATIVE_CENTER, -1.0)
        };
        rows.push(vec![center[0] + noise.sample(rng), center[1] + noise.sample(rng)]);
        labels.push(label);
    }
    LabeledDataset::from_rows(rows, &labels).expect("finite synthetic rows")
}

/// The clusters are symmetric about the origin, so no intercept column.
pub fn demo_instance(kind: DemoKind, seed: u64) -> DemoInstance {
    let layout = kind.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = clusters(&mut rng, TRAIN_PER_CLASS);
    rng.set_stream(1);
    let test = clusters(&mut rng, TEST_PER_CLASS);
    let nodes = NodeSet::from_rows(layout.features.iter().map(|f| f.to_vec()).collect())
        .expect("finite node features");
    let pos = layout.positions;
    let dist = DistanceMatrix::from_fn(pos.len(), |i, j| {
        ((pos[i][0] - pos[j][0]).abs() + (pos[i][1] - pos[j][1]).abs()) as f64
    })
    .expect("valid distances");
    DemoInstance {
        train,
        test,
        nodes,
        dist,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSide {
    pub route: String,
    pub order: Route,
    pub lambda: ModelParams,
    pub probabilities: Vec<f64>,
    pub training_error: f64,
    pub cost1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoOutput {
    pub demo: DemoKind,
    pub seed: u64,
    pub c1: f64,
    pub c2: f64,
    pub method: Method,
    pub sequential: DemoSide,
    pub simultaneous: DemoSide,
    pub routes_differ: bool,
    /// `100 (simultaneous − sequential) / sequential` in Cost 1.
    pub cost1_change_percent: f64,
    /// Simultaneous minus sequential probability, per node.
    pub probability_shift: Vec<f64>,
    /// 1-based node with the largest absolute shift.
    pub largest_shift_node: usize,
}

fn side(sol: &MltrpSolution, nodes: &NodeSet) -> Result<DemoSide> {
    Ok(DemoSide {
        route: sol.route.to_string(),
        order: sol.route.clone(),
        lambda: sol.lambda.clone(),
        probabilities: sigmoid_weights(&sol.lambda, nodes)?.as_slice().to_vec(),
        training_error: sol.training_error,
        cost1: sol.traversal_cost,
    })
}

/// Writes the instance files and both solutions. Cost 1 is reported for
/// each side at its own probabilities, which is what the Cost 1 model of
/// the configuration optimizes.
pub fn cmd_demo(kind: DemoKind, seed: u64, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mltrp = MltrpConfig {
        cost_model: mltrp::opt::CostModel::Cost1,
        ..cfg.mltrp.clone()
    };
    mltrp.validate()?;
    let inst = demo_instance(kind, seed);
    let seq = sequential_pipeline(&inst.train, &inst.nodes, &inst.dist, &mltrp)?;
    let sim = match mltrp.method {
        Method::Sequential => seq.clone(),
        _ => solve(&inst.train, &inst.nodes, &inst.dist, &mltrp, Some(&seq.lambda))?,
    };
    let sequential = side(&seq, &inst.nodes)?;
    let simultaneous = side(&sim, &inst.nodes)?;
    let probability_shift: Vec<f64> = simultaneous
        .probabilities
        .iter()
        .zip(&sequential.probabilities)
        .map(|(a, b)| a - b)
        .collect();
    let largest_shift_node = probability_shift
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map_or(1, |(i, _)| i + 1);
    let out = DemoOutput {
        demo: kind,
        seed,
        c1: mltrp.c1,
        c2: mltrp.c2(),
        method: mltrp.method,
        routes_differ: seq.route != sim.route,
        cost1_change_percent: 100.0 * (simultaneous.cost1 - sequential.cost1) / sequential.cost1,
        probability_shift,
        largest_shift_node,
        sequential,
        simultaneous,
    };

    let files = [
        ("train.csv", labeled_csv(&inst.train)),
        ("test.csv", labeled_csv(&inst.test)),
        ("nodes.csv", nodes_csv(&inst.nodes)),
        ("distances.csv", distances_csv(&inst.dist)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = cfg.out_dir.join(name);
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }
    let path = cfg.out_dir.join(DEMO_FILE);
    write_json(&path, &out)?;
    written.push(path);
    Ok(written)
}
