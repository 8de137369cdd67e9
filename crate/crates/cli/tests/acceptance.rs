//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use itertools::Itertools;
use mltrp::bound::{alpha, c_vector, cap_complement_fraction, shortest_distances, sigmoid_line, BoundInputs};
use mltrp::cost::{cost1, cost2_exact, sigmoid_weights, standard_trp_cost};
use mltrp::learn::{training_error, training_gradient};
use mltrp::math::sigmoid;
use mltrp::milp::route_objective;
use mltrp::opt::{
    alternating_minimization, grid_axis, lambda_grid_table, nelder_mead, obj, obj_gradient, sequential_pipeline,
    CostModel, MltrpConfig,
};
use mltrp::sim::{simulate_route_cost, SimConfig, SimModel};
use mltrp::trp::{solve_weighted_trp_bruteforce, solve_weighted_trp_dp};
use mltrp::{DistanceMatrix, LabeledDataset, ModelParams, NodeSet, NodeWeights, Route};
use mltrp_cli::demo::DemoOutput;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn asym_dist(r: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    DistanceMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { r.random_range(f64::EPSILON..10.0) }).unwrap()
}

fn metric_dist(r: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (r.random_range(0.0..10.0), r.random_range(0.0..10.0))).collect();
    DistanceMatrix::from_fn(n, |i, j| (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1)).unwrap()
}

fn weights(r: &mut ChaCha8Rng, n: usize) -> NodeWeights {
    NodeWeights::new((0..n).map(|_| r.random_range(f64::EPSILON..1.0)).collect()).unwrap()
}

fn routes(n: usize) -> Vec<Route> {
    (1..n)
        .permutations(n - 1)
        .map(|tail| {
            let mut o = vec![0];
            o.extend(tail);
            Route::new(o).unwrap()
        })
        .collect()
}

/// Two noisy classes along the diagonal, with a trailing bias column when `bias`.
fn blobs(r: &mut ChaCha8Rng, m: usize, bias: bool) -> LabeledDataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for k in 0..m {
        let y = if k % 2 == 0 { 1.0 } else { -1.0 };
        let mut x = vec![y + r.random_range(-1.2..1.2), 0.6 * y + r.random_range(-1.2..1.2)];
        if bias {
            x.push(1.0);
        }
        rows.push(x);
        labels.push(y);
    }
    LabeledDataset::from_rows(rows, &labels).unwrap()
}

fn nodes(r: &mut ChaCha8Rng, n: usize, bias: bool) -> NodeSet {
    NodeSet::from_rows(
        (0..n)
            .map(|_| {
                let mut x = vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
                if bias {
                    x.push(1.0);
                }
                x
            })
            .collect(),
    )
    .unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn c1_solver_exactness() -> String {
    let start = Instant::now();
    let mut r = rng(1);
    for case in 0..200 {
        let n = r.random_range(4..=8);
        let d = asym_dist(&mut r, n);
        let w = weights(&mut r, n);
        let dp = solve_weighted_trp_dp(&w, &d).unwrap();
        let bf = solve_weighted_trp_bruteforce(&w, &d).unwrap();
        assert_eq!(dp.cost, bf.cost, "instance {case}");
        assert_eq!(dp.route, bf.route, "instance {case}");
    }
    let t = start.elapsed();
    assert!(t < Duration::from_secs(5), "took {t:?}");
    format!("200 instances identical, {:.2} s", t.as_secs_f64())
}

fn c2_standard_reduction() -> String {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = r.random_range(2..=7);
        let d = asym_dist(&mut r, n);
        let p = r.random_range(0.01..1.0);
        let w = NodeWeights::uniform(n, p).unwrap();
        for route in routes(n) {
            let e = rel(cost1(&route, &w, &d).unwrap(), p * standard_trp_cost(&route, &d).unwrap());
            worst = worst.max(e);
        }
    }
    assert!(worst <= 1e-12, "worst relative error {worst:e}");
    format!("worst relative error {worst:.1e}")
}

fn c3_milp_soundness() -> String {
    let mut r = rng(3);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for n in 2..=6 {
        for _ in 0..20 {
            let d = asym_dist(&mut r, n);
            let w = weights(&mut r, n);
            let mut best = f64::INFINITY;
            for route in routes(n) {
                let (feasible, objective, c) = route_objective(&route, &w, &d).unwrap();
                assert!(feasible, "route {route} infeasible");
                worst = worst.max((objective - c).abs());
                best = best.min(objective);
                checked += 1;
            }
            let dp = solve_weighted_trp_dp(&w, &d).unwrap().cost;
            assert!((best - dp).abs() <= 1e-9, "min {best} vs DP {dp}");
        }
    }
    assert!(worst <= 1e-9, "objective gap {worst:e}");
    format!("{checked} routes feasible, max |MILP - Cost 1| = {worst:.1e}")
}

fn c4_gradients() -> String {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    let fd = |f: &dyn Fn(&[f64]) -> f64, x: &[f64], i: usize| {
        let h = 1e-5;
        let mut up = x.to_vec();
        up[i] += h;
        let mut dn = x.to_vec();
        dn[i] -= h;
        (f(&up) - f(&dn)) / (2.0 * h)
    };
    for k in 0..50 {
        let data = blobs(&mut r, 30, true);
        let n = r.random_range(3..7);
        let ns = nodes(&mut r, n, true);
        let d = metric_dist(&mut r, ns.len());
        let lam: Vec<f64> = (0..3).map(|_| r.random_range(-1.5..1.5)).collect();
        let c2 = r.random_range(0.0..1.0);
        let model = if k % 2 == 0 { CostModel::Cost1 } else { CostModel::Cost2Surrogate };
        let cfg = MltrpConfig {
            cost_model: model,
            ..MltrpConfig::new(r.random_range(0.1..3.0), c2)
        };
        let route = solve_weighted_trp_dp(&sigmoid_weights(&ModelParams::new(lam.clone()), &ns).unwrap(), &d)
            .unwrap()
            .route;
        let g_train = training_gradient(&ModelParams::new(lam.clone()), &data, c2).unwrap();
        let g_obj = obj_gradient(&ModelParams::new(lam.clone()), &route, &data, &ns, &d, &cfg).unwrap();
        let f_train = |l: &[f64]| training_error(&ModelParams::new(l.to_vec()), &data, c2).unwrap();
        let f_obj = |l: &[f64]| obj(&ModelParams::new(l.to_vec()), &route, &data, &ns, &d, &cfg).unwrap();
        for i in 0..3 {
            for (g, f) in [(g_train[i], &f_train as &dyn Fn(&[f64]) -> f64), (g_obj[i], &f_obj)] {
                let num = fd(f, &lam, i);
                worst = worst.max((g - num).abs() / num.abs().max(1.0));
            }
        }
    }
    assert!(worst < 1e-5, "worst relative error {worst:e}");
    format!("50 configurations, worst relative error {worst:.1e}")
}

fn c5_am_monotone() -> String {
    let mut worst_rise = f64::NEG_INFINITY;
    for seed in 0..20 {
        let mut r = rng(500 + seed);
        let data = blobs(&mut r, 40, true);
        let ns = nodes(&mut r, 6, true);
        let d = metric_dist(&mut r, 6);
        let cfg = MltrpConfig {
            am_iterations: 10,
            ..MltrpConfig::new(r.random_range(0.5..3.0), 0.1)
        };
        let seq = sequential_pipeline(&data, &ns, &d, &cfg).unwrap();
        let s = alternating_minimization(&data, &ns, &d, &cfg, &seq.lambda).unwrap();
        for w in s.trace.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
            assert!(w[1] <= w[0] + 1e-7, "seed {seed}: {:?}", s.trace);
        }
    }
    format!("20 runs, largest step change {worst_rise:.1e}")
}

fn c6_decoupling() -> String {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut r = rng(600 + seed);
        let data = blobs(&mut r, 40, true);
        let ns = nodes(&mut r, 6, true);
        let d = metric_dist(&mut r, 6);
        let cfg = MltrpConfig::new(0.0, 0.1);
        let seq = sequential_pipeline(&data, &ns, &d, &cfg).unwrap();
        let start = ModelParams::zeros(3);
        for s in [
            nelder_mead(&data, &ns, &d, &cfg, &start).unwrap(),
            alternating_minimization(&data, &ns, &d, &cfg, &start).unwrap(),
        ] {
            worst = worst.max((s.training_error - seq.training_error).abs());
            assert_eq!(s.route, seq.route, "seed {seed}");
        }
    }
    assert!(worst < 1e-4, "training error gap {worst:e}");
    format!("NM and AM match on 5 instances, max gap {worst:.1e}")
}

fn c7_regularization_path() -> String {
    let start = Instant::now();
    let axis = grid_axis(-3.0, 3.0, 0.05);
    assert_eq!(axis.len(), 121);
    let c1_grid: Vec<f64> = (0..10).map(|k| 0.25 * k as f64).collect();
    for seed in 0..3 {
        let mut r = rng(700 + seed);
        let data = blobs(&mut r, 40, false);
        let ns = nodes(&mut r, 6, false);
        let d = metric_dist(&mut r, 6);
        let table = lambda_grid_table(&data, &ns, &d, &MltrpConfig::new(0.0, 0.05), &axis).unwrap();
        let picks: Vec<usize> = c1_grid.iter().map(|&c| table.argmin(c)).collect();
        for w in picks.windows(2) {
            assert!(table.traversal_cost[w[1]] <= table.traversal_cost[w[0]], "seed {seed}");
            assert!(table.training_error[w[1]] >= table.training_error[w[0]], "seed {seed}");
        }
    }
    let t = start.elapsed();
    assert!(t < Duration::from_secs(60), "took {t:?}");
    format!("3 instances on a 121x121 grid, {:.2} s", t.as_secs_f64())
}

fn c8_monte_carlo() -> String {
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let mut r = rng(800 + seed);
        let n = r.random_range(3..=6);
        let d = DistanceMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { r.random_range(1..=4) as f64 }).unwrap();
        let ns = nodes(&mut r, n, true);
        let lam = ModelParams::new((0..3).map(|_| r.random_range(-1.0..1.0)).collect());
        let p = sigmoid_weights(&lam, &ns).unwrap();
        let all = routes(n);
        let route = &all[r.random_range(0..all.len())];
        let cfg = SimConfig::new(100_000, seed);
        for (model, exact) in [
            (SimModel::Cost1, cost1(route, &p, &d).unwrap()),
            (SimModel::Cost2, cost2_exact(route, &lam, &ns, &d).unwrap()),
        ] {
            let rep = simulate_route_cost(route, p.as_slice(), &d, model, &cfg).unwrap();
            assert!(rel(rep.analytic, exact) < 1e-12);
            let z = (rep.estimate - exact).abs() / rep.std_error;
            worst = worst.max(z);
            assert!(z <= 3.0, "seed {seed} {model:?}: {} vs {exact} ({z:.2} SE)", rep.estimate);
        }
    }
    format!("10 instances x 2 models, largest deviation {worst:.2} SE")
}

/// `Γ(k/2)` for a positive integer `k`.
fn gamma_half(k: usize) -> f64 {
    match k {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Series form of the ball fraction below a cut at normalized offset `t`.
fn hypergeometric_fraction(d: usize, t: f64) -> f64 {
    let (a, b, c) = (0.5, (1.0 - d as f64) / 2.0, 1.5);
    let (mut term, mut sum) = (1.0, 1.0);
    for n in 0..10_000 {
        let n = n as f64;
        term *= (a + n) * (b + n) / ((c + n) * (n + 1.0)) * t * t;
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    0.5 + t * gamma_half(d + 2) / (std::f64::consts::PI.sqrt() * gamma_half(d + 1)) * sum
}

fn c9_bound_numerics() -> String {
    let mut worst: f64 = 0.0;
    for d in [1, 2, 3, 5] {
        for t in [0.1, 0.5, 0.9] {
            let a = cap_complement_fraction(d, t * 3.0, 3.0).unwrap();
            worst = worst.max((a - hypergeometric_fraction(d, t)).abs());
        }
    }
    assert!(worst <= 1e-8, "beta vs series {worst:e}");
    for d in 1..=10 {
        assert_eq!(cap_complement_fraction(d, 0.0, 1.0).unwrap(), 0.5);
    }
    for seed in 0..100 {
        let mut r = rng(900 + seed);
        let n = r.random_range(3..7);
        let dim = r.random_range(1..5);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-0.5..0.5)).collect()).collect();
        let mut inputs = BoundInputs {
            m1: r.random_range(0.5..3.0),
            m2: 0.5 * (dim as f64).sqrt(),
            cg: 0.0,
            eps: r.random_range(0.01..0.5),
            m: 1000,
            nodes: NodeSet::from_rows(rows).unwrap(),
            dist: metric_dist(&mut r, n),
        };
        let di = shortest_distances(&inputs.dist).unwrap();
        let (_, intercept) = sigmoid_line(inputs.m1 * inputs.m2);
        let c0 = intercept * di.iter().sum::<f64>();
        let mut last = 0.0;
        for k in 1..=40 {
            inputs.cg = c0 + 0.2 * k as f64;
            let a = alpha(&inputs, &c_vector(&inputs, &di).unwrap().c).unwrap().alpha;
            assert!(a >= last, "seed {seed}");
            last = a;
        }
    }
    for a in [0.25, 1.0, 2.5, 6.0, 15.0] {
        let (m1, m0) = sigmoid_line(a);
        for k in 0..10_000 {
            let z = -a + 2.0 * a * k as f64 / 9_999.0;
            assert!(m1 * z + m0 <= sigmoid(z) + 1e-15, "a={a} z={z}");
        }
    }
    format!("beta vs series max gap {worst:.1e}; alpha monotone on 100 sets; line below sigmoid")
}

fn mltrp_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mltrp"))
}

fn run_ok(args: &[&str], dir: &Path) {
    let out = mltrp_bin().args(args).current_dir(dir).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn c10_six_node_demo() -> String {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["demo", "six_node", "--out-dir", "."], dir.path());
    let text = std::fs::read_to_string(dir.path().join("demo.json")).unwrap();
    let d: DemoOutput = serde_json::from_str(&text).unwrap();
    assert!(d.routes_differ, "routes agree: {}", d.sequential.route);
    assert!(d.simultaneous.cost1 < d.sequential.cost1);
    assert_eq!(d.largest_shift_node, 6, "shifts {:?}", d.probability_shift);
    format!(
        "{} -> {}, Cost 1 {:+.1}%, node 6 probability {:+.3}",
        d.sequential.route, d.simultaneous.route, d.cost1_change_percent, d.probability_shift[5]
    )
}

fn c11_determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    run_ok(&["demo", "six-node", "--seed", "3", "--out-dir", "inst"], root);
    let inst = ["--train", "inst/train.csv", "--nodes", "inst/nodes.csv", "--distances", "inst/distances.csv"];
    let commands: Vec<Vec<&str>> = vec![
        vec!["train", "--train", "inst/train.csv", "--test", "inst/test.csv"],
        [&["route"][..], &inst].concat(),
        [&["simultaneous", "--method", "nm", "--c1", "1", "--c1-grid", "0,0.5,1,2", "--test", "inst/test.csv"][..], &inst].concat(),
        [&["simultaneous", "--method", "am", "--c1", "1"][..], &inst].concat(),
        [&["export-milp"][..], &inst].concat(),
        [&["simulate", "--trials", "20000", "--seed", "9"][..], &inst].concat(),
        [&["bound", "--cg", "60", "--m1", "1"][..], &inst].concat(),
        vec!["demo", "four-node", "--seed", "4"],
        vec!["demo", "six-node", "--seed", "4"],
    ];
    let mut files = 0;
    for (k, cmd) in commands.iter().enumerate() {
        let outs: Vec<String> = (0..2).map(|rep| format!("out{k}_{rep}")).collect();
        for o in &outs {
            let mut args = cmd.clone();
            args.extend(["--out-dir", o.as_str()]);
            run_ok(&args, root);
        }
        let list = |o: &str| {
            let mut v: Vec<_> = std::fs::read_dir(root.join(o))
                .unwrap()
                .map(|e| e.unwrap().file_name())
                .collect();
            v.sort();
            v
        };
        let names = list(&outs[0]);
        assert!(!names.is_empty());
        assert_eq!(names, list(&outs[1]), "{cmd:?}");
        for name in names {
            let a = std::fs::read(root.join(&outs[0]).join(&name)).unwrap();
            let b = std::fs::read(root.join(&outs[1]).join(&name)).unwrap();
            assert_eq!(a, b, "{cmd:?} {name:?}");
            files += 1;
        }
    }
    format!("{} commands, {files} output files byte-identical", commands.len())
}

type Criterion = (&'static str, fn() -> String);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("solver exactness", c1_solver_exactness),
        ("weighted to standard reduction", c2_standard_reduction),
        ("MILP encoding soundness", c3_milp_soundness),
        ("gradient correctness", c4_gradients),
        ("AM monotonicity", c5_am_monotone),
        ("decoupling limit", c6_decoupling),
        ("regularization path", c7_regularization_path),
        ("cost-model stochastic validation", c8_monte_carlo),
        ("bound numerics", c9_bound_numerics),
        ("six-node illustration", c10_six_node_demo),
        ("determinism", c11_determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", k + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {:>2} {name}: FAIL ({msg})", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
