//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails. Artifacts are kept under the cargo
//! test tmpdir for inspection.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rcuc_cli::commands::{
    cmd_datagen, cmd_solve, cmd_train, cmd_verify, model_dir, read_pool, read_schedule, PoolRecord, SCHEDULE_TOL,
};
use rcuc_cli::config::SolverConfig;
use rcuc_cli::RunConfig;
use rcuc_core::dnn_embed::{encode_disturbance, encode_network, feature_box, propagate_bounds};
use rcuc_core::freq_dynamics::{
    eigendecompose, kron_decompose, kron_reduce, measure_rocof, rocof_closed_form_max, simulate_swing, ReducedNetwork,
    SwingEvent,
};
use rcuc_core::rocof_net::{load_weights, Mlp};
use rcuc_core::uc_milp::{check_schedule, ModelVariant, Schedule};
use rcuc_milp::{LinExpr, MilpProblem, SolveOptions, Solver, VarId, VarKind, DEFAULT_GAP};

// Pinned tolerances.
const RELU_TOL: f64 = 1e-6;
const ARGMAX_TOL_MW: f64 = 1e-6;
const CLOSED_FORM_REL: f64 = 0.05;
const RK4_RATIO: (f64, f64) = (12.0, 20.0);
const KRON_TOL: f64 = 1e-9;
const GRAD_REL: f64 = 1e-5;
const MIN_SAMPLES: usize = 1000;
const ACC_10: f64 = 0.90;
const ACC_5: f64 = 0.75;
const DNN_SLACK: f64 = 1.05;
/// An objective found at relative gap g lies within 1/(1 − g) of the optimum.
const COST_SLACK: f64 = 1.0 / (1.0 - DEFAULT_GAP);

type Outcome = Result<String, String>;

struct Suite {
    passed: usize,
    failed: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, budget_s: f64, f: impl FnOnce() -> Outcome) {
        let t0 = Instant::now();
        let out = f();
        let secs = t0.elapsed().as_secs_f64();
        let out = match out {
            Ok(d) if secs > budget_s => Err(format!("{d}; took {secs:.0} s, budget {budget_s:.0} s")),
            o => o,
        };
        match out {
            Ok(d) => {
                self.passed += 1;
                println!("PASS {id:>2} {name}: {d} [{secs:.1} s]");
            }
            Err(d) => {
                self.failed += 1;
                println!("FAIL {id:>2} {name}: {d} [{secs:.1} s]");
            }
        }
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    format!("{e:#}")
}

fn highs() -> SolverConfig {
    SolverConfig { backend: "highs".into(), ..SolverConfig::default() }
}

fn tight_solver() -> Solver {
    let opts = SolveOptions { feasibility_tol: 1e-9, ..SolveOptions::default() };
    Solver::new(rcuc_milp::default_backend()).with_options(opts)
}

// ---------------------------------------------------------------- criterion 4

fn random_laplacian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    let mut add = |i: usize, j: usize, w: f64| {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        add(i, j, rng.random_range(1.0..20.0));
    }
    for _ in 0..n {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        if i != j {
            add(i, j, rng.random_range(1.0..20.0));
        }
    }
    l
}

fn eliminate(l: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let idx: Vec<usize> = (0..l.nrows()).filter(|&i| i != k).collect();
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| {
        let (i, j) = (idx[a], idx[b]);
        l[(i, j)] - l[(i, k)] * l[(k, j)] / l[(k, k)]
    })
}

fn grounded_angles(l: &DMatrix<f64>, p: &[f64], ground: usize) -> Vec<f64> {
    let a = l.clone().remove_row(ground).remove_column(ground);
    let rhs: Vec<f64> = p.iter().enumerate().filter(|&(i, _)| i != ground).map(|(_, &x)| x).collect();
    let x = a.lu().solve(&nalgebra::DVector::from_vec(rhs)).expect("grounded Laplacian is regular");
    let mut out = x.iter().copied().collect::<Vec<_>>();
    out.insert(ground, 0.0);
    out
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_l, mut worst_theta) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = 10;
        let l = random_laplacian(&mut rng, n);
        let keep = rng.random_range(2..=7);
        let mut retained: Vec<usize> = Vec::new();
        while retained.len() < keep {
            let b = rng.random_range(0..n);
            if !retained.contains(&b) {
                retained.push(b);
            }
        }
        retained.sort_unstable();
        let mut seq = l.clone();
        for k in (0..n).rev().filter(|k| !retained.contains(k)) {
            seq = eliminate(&seq, k);
        }
        let red = kron_reduce(&l, &retained).map_err(err)?;
        worst_l = worst_l.max((&red - &seq).amax());

        let mut p: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = p.iter().sum::<f64>() / n as f64;
        p.iter_mut().for_each(|x| *x -= mean);
        let full = grounded_angles(&l, &p, retained[0]);
        let kr = kron_decompose(&l, &retained).map_err(err)?;
        let reduced = grounded_angles(&kr.reduced, &kr.reduce_injections(&p), 0);
        for (i, &b) in retained.iter().enumerate() {
            worst_theta = worst_theta.max((reduced[i] - full[b]).abs());
        }
    }
    let detail = format!("max |L_kron - L_seq| {worst_l:.1e}, max angle error {worst_theta:.1e} rad");
    if worst_l <= KRON_TOL && worst_theta <= KRON_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut net = Mlp::new(&[6, 4, 4, 1], 5).map_err(err)?;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let params: Vec<f64> = (0..net.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        net.set_params(&params).map_err(err)?;
        let xs: Vec<Vec<f64>> = (0..8).map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let ys: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
        let (_, grad) = net.loss_and_gradient(&xs, &ys);
        let mut fd = vec![0.0; params.len()];
        let mut probe = net.clone();
        for i in 0..params.len() {
            let mut q = params.clone();
            q[i] = params[i] + h;
            probe.set_params(&q).map_err(err)?;
            let up = probe.mse(&xs, &ys);
            q[i] = params[i] - h;
            probe.set_params(&q).map_err(err)?;
            let dn = probe.mse(&xs, &ys);
            fd[i] = (up - dn) / (2.0 * h);
        }
        let diff: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(diff / norm);
    }
    let detail = format!("worst relative gradient error {worst:.1e} over 50 points");
    if worst <= GRAD_REL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 3

fn triangle(m: f64, gamma: f64) -> ReducedNetwork {
    let mut l = DMatrix::zeros(3, 3);
    for &(i, j, w) in &[(0, 1, 8.0), (1, 2, 12.0), (0, 2, 5.0)] {
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    ReducedNetwork { gen_buses: vec![1, 2, 3], inertia_m: vec![m; 3], damping_ratio_gamma: gamma, laplacian: l }
}

fn event(node: usize, delta_p: f64) -> SwingEvent {
    SwingEvent { node, delta_p, delta_m: 0.0, time: 0.0, gen_id: None, mw: delta_p * 100.0 }
}

fn criterion_3() -> Outcome {
    // H = 4 s, 300 MVA on a 100 MVA base at 60 Hz.
    let m = 2.0 * 4.0 * 300.0 / (100.0 * 2.0 * std::f64::consts::PI * 60.0);
    let gamma = 0.5;
    let net = triangle(m, gamma);
    let inj = [0.3, -0.1, -0.2];
    let eig = eigendecompose(&net.laplacian).map_err(err)?;
    let mut worst = 0.0f64;
    for node in 0..3 {
        for frac in [0.01, 0.025, 0.05] {
            let dp = frac * 0.3;
            let traj = simulate_swing(&net, &inj, &event(node, dp), 5.0, 1e-3).map_err(err)?;
            let sim = measure_rocof(&traj, 0.5, 60.0).map_err(err)?;
            let cf = rocof_closed_form_max(&eig, m, gamma, dp, node, 0.5, 5.0, 1e-3).map_err(err)?;
            for (s, c) in sim.per_bus_rocof.iter().zip(&cf) {
                worst = worst.max((s - c).abs() / c);
            }
        }
    }

    let theta_at = |h: f64| -> Result<Vec<f64>, String> {
        let traj = simulate_swing(&net, &inj, &event(0, 0.1), 1.0, h).map_err(err)?;
        let k = traj
            .time_grid
            .iter()
            .rposition(|t| (t - 1.0).abs() < 1e-9)
            .ok_or("t = 1 s not on the grid")?;
        Ok(traj.theta[k].clone())
    };
    let reference = theta_at(0.02 / 32.0)?;
    let error = |h: f64| -> Result<f64, String> {
        Ok(theta_at(h)?.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    };
    let ratio = error(0.02)? / error(0.01)?;
    let detail = format!("worst closed-form deviation {:.2}%, RK4 error ratio {ratio:.2}", 100.0 * worst);
    if worst <= CLOSED_FORM_REL && (RK4_RATIO.0..=RK4_RATIO.1).contains(&ratio) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2(cfg: &RunConfig) -> Outcome {
    let case = cfg.load_case().map_err(err)?;
    let p_ub: Vec<f64> = case.generators.iter().map(|g| g.p_max).collect();
    let n = p_ub.len();
    let solver = tight_solver();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for k in 0..200 {
        let mut p: Vec<f64> = p_ub.iter().map(|&ub| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..=ub) }).collect();
        if k % 10 == 0 {
            // Force a tie at the maximum.
            let hi = (0..n).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            if let Some(other) = (0..n).find(|&g| g != hi && p_ub[g] >= p[hi]) {
                p[other] = p[hi];
            }
        }
        let mut pb = MilpProblem::new("gadget");
        let vars: Vec<VarId> = p
            .iter()
            .enumerate()
            .map(|(g, &x)| pb.add_var(format!("p_{}", g + 1), x, x, VarKind::Continuous))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let (lam, xi) = encode_disturbance(&mut pb, &vars, &p_ub, 0).map_err(err)?;
        let res = solver.solve(&pb).map_err(err)?;
        let values = res.values.as_ref().ok_or_else(|| format!("vector {k}: {}", res.status))?;
        let chosen: Vec<usize> = (0..n).filter(|&g| values[lam[g].0] > 0.5).collect();
        let truth = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let [g] = chosen.as_slice() else {
            return Err(format!("vector {k}: {} units selected", chosen.len()));
        };
        if p[*g] < truth {
            return Err(format!("vector {k}: selected unit {} at {} MW, max is {truth}", g + 1, p[*g]));
        }
        let total: f64 = xi.iter().map(|v| values[v.0]).sum();
        let off: f64 = (0..n).filter(|h| h != g).map(|h| values[xi[h].0].abs()).fold(0.0, f64::max);
        worst = worst.max((total - truth).abs()).max(off);
    }
    let detail = format!("200 vectors, every selection a true argmax, max disturbance error {worst:.1e} MW");
    if worst <= ARGMAX_TOL_MW {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 6

struct Accuracy {
    samples: usize,
    val10: f64,
    val5: f64,
}

fn criterion_6(cfg: &RunConfig) -> Result<Accuracy, String> {
    let d = cmd_datagen(cfg).map_err(err)?;
    let t = cmd_train(cfg).map_err(err)?;
    Ok(Accuracy {
        samples: d.samples,
        val10: t.val_accuracy(0.10).ok_or("no 10% row")?,
        val5: t.val_accuracy(0.05).ok_or("no 5% row")?,
    })
}

// ---------------------------------------------------------------- criterion 9

const ARTIFACTS: [&str; 9] = [
    "dataset.csv",
    "train.csv",
    "val.csv",
    "rejections.txt",
    "pool.csv",
    "pool.json",
    "weights.txt",
    "accuracy.csv",
    "history.csv",
];

fn criterion_9(root: &Path) -> Outcome {
    let mut dirs = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = RunConfig { out_dir: root.join(run), solver: highs(), ..RunConfig::default() };
        cfg.datagen.n_scenarios = 2;
        cfg.train.max_epochs = 150;
        cmd_datagen(&cfg).map_err(err)?;
        cmd_train(&cfg).map_err(err)?;
        dirs.push(cfg.out_dir);
    }
    for f in ARTIFACTS {
        let a = fs::read(dirs[0].join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = fs::read(dirs[1].join(f)).map_err(|e| format!("{f}: {e}"))?;
        if a != b {
            return Err(format!("{f} differs between reruns"));
        }
    }
    Ok(format!("{} artifacts byte-identical across two runs", ARTIFACTS.len()))
}

// ---------------------------------------------------------------- criterion 1

fn criterion_1(cfg: &RunConfig) -> Outcome {
    let case = cfg.load_case().map_err(err)?;
    let mlp = load_weights(&cfg.out_dir.join("weights.txt")).map_err(err)?;
    if mlp.dims() != [99, 10, 10, 1] {
        return Err(format!("trained net is {:?}", mlp.dims()));
    }
    let fbox = feature_box(&case);
    let bounds = propagate_bounds(&mlp, &fbox).map_err(err)?;
    let solver = tight_solver();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let x: Vec<f64> = fbox.iter().map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect();
        let mut pb = MilpProblem::new("relu");
        let inputs: Vec<LinExpr> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| pb.add_var(format!("x_{}", i + 1), v, v, VarKind::Continuous).map(LinExpr::var))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        let h = encode_network(&mut pb, &mlp, &inputs, &bounds, 0).map_err(err)?;
        let res = solver.solve(&pb).map_err(err)?;
        let rhat = res.value(h.rhat).ok_or_else(|| format!("point {k}: {}", res.status))?;
        worst = worst.max((rhat - mlp.forward(&x).map_err(err)?).abs());
    }
    let detail = format!("100 fixed inputs, max |R_milp - R_forward| {worst:.1e}");
    if worst <= RELU_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 7

struct BaseRun {
    objectives: BTreeMap<ModelVariant, f64>,
    rocof: BTreeMap<ModelVariant, (f64, f64)>,
}

fn solve_base(cfg: &RunConfig, base: &mut BaseRun) -> Result<(), String> {
    for v in [ModelVariant::T, ModelVariant::Erc, ModelVariant::Lrc, ModelVariant::Dnn] {
        let s = cmd_solve(cfg, v, None).map_err(|e| format!("{v}: {e:#}"))?;
        base.objectives.insert(v, s.outcome.objective.ok_or(format!("{v}: no objective"))?);
        let r = cmd_verify(cfg, v, None).map_err(|e| format!("{v} verify: {e:#}"))?;
        let low = r.lowest_netload();
        let rocof = low.highest_rocof.ok_or(format!("{v}: simulation diverged"))?;
        base.rocof.insert(v, (rocof, low.gap_pct.unwrap_or(f64::NAN)));
    }
    Ok(())
}

fn criterion_7(cfg: &RunConfig, base: &mut BaseRun) -> Outcome {
    solve_base(cfg, base)?;
    let (erc, _) = base.rocof[&ModelVariant::Erc];
    let (lrc, lrc_gap) = base.rocof[&ModelVariant::Lrc];
    let (dnn, dnn_gap) = base.rocof[&ModelVariant::Dnn];
    let detail = format!(
        "R_h ERC {erc:.4} LRC {lrc:.4} ({lrc_gap:+.2}%) DNN {dnn:.4} ({dnn_gap:+.2}%)"
    );
    if erc > dnn && dnn <= cfg.rocof_limit * DNN_SLACK && dnn_gap.abs() < lrc_gap.abs() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8(pool: &[PoolRecord], base: &BaseRun) -> Outcome {
    let mut by: BTreeMap<usize, BTreeMap<ModelVariant, f64>> = BTreeMap::new();
    for r in pool {
        if let Some(o) = r.objective {
            by.entry(r.scenario).or_default().insert(r.variant, o);
        }
    }
    let mut cases: Vec<(String, BTreeMap<ModelVariant, f64>)> =
        by.into_iter().filter(|(_, m)| m.len() == 3).take(5).map(|(s, m)| (format!("scenario {s}"), m)).collect();
    if cases.len() < 5 {
        return Err(format!("only {} scenarios solved under all three variants", cases.len()));
    }
    cases.push(("base case".into(), base.objectives.clone()));
    for (name, m) in &cases {
        let (t, e, l) = (
            *m.get(&ModelVariant::T).ok_or(format!("{name}: no T"))?,
            *m.get(&ModelVariant::Erc).ok_or(format!("{name}: no ERC"))?,
            *m.get(&ModelVariant::Lrc).ok_or(format!("{name}: no LRC"))?,
        );
        if t > e * COST_SLACK || e > l * COST_SLACK {
            return Err(format!("{name}: T {t:.0} ERC {e:.0} LRC {l:.0}"));
        }
    }
    let b = &base.objectives;
    Ok(format!(
        "T <= ERC <= LRC on 5 scenarios and the base case (base {:.0} / {:.0} / {:.0})",
        b[&ModelVariant::T],
        b[&ModelVariant::Erc],
        b[&ModelVariant::Lrc]
    ))
}

// --------------------------------------------------------------- criterion 10

fn criterion_10(cfg: &RunConfig, pool: &[PoolRecord]) -> Outcome {
    let case = cfg.load_case().map_err(err)?;
    let scenarios = rcuc_core::data_gen::sample_scenarios(&case, &cfg.scenario_config()).map_err(err)?;
    let mut checked = 0;
    let mut check = |name: String, s: &Schedule, c: &rcuc_core::grid_model::GridCase| -> Result<(), String> {
        checked += 1;
        match check_schedule(s, c, SCHEDULE_TOL).first() {
            Some(v) => Err(format!("{name}: {v}")),
            None => Ok(()),
        }
    };
    for r in pool {
        let Some(s) = &r.schedule else { continue };
        let sc = scenarios.iter().find(|x| x.id == r.scenario).ok_or("scenario missing")?;
        check(format!("scenario {} {}", r.scenario, r.variant), s, &sc.apply(&case))?;
    }
    for v in [ModelVariant::T, ModelVariant::Erc, ModelVariant::Lrc, ModelVariant::Dnn] {
        let path: PathBuf = model_dir(cfg, v).join("schedule.json");
        if path.exists() {
            check(format!("base {v}"), &read_schedule(&path).map_err(err)?, &case)?;
        }
    }
    Ok(format!("{checked} schedules pass the residual check at {SCHEDULE_TOL:e} MW"))
}

fn main() {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = fs::remove_dir_all(&root);
    fs::create_dir_all(&root).expect("tmpdir");
    let mut suite = Suite { passed: 0, failed: 0 };

    let external = SolverConfig {
        backend: "external".into(),
        command: env!("CARGO_BIN_EXE_rcuc").into(),
        args: ["solve-lp", "{lp}", "{sol}", "--gap", "{gap}", "--backend", "highs"].map(String::from).to_vec(),
        ..SolverConfig::default()
    };
    let main_cfg = RunConfig { out_dir: root.join("main"), solver: external, ..RunConfig::default() };
    // Base-case solves of criterion 7 run in-process.
    let base_cfg = RunConfig { solver: highs(), ..main_cfg.clone() };

    suite.run(4, "Kron reduction oracle", 30.0, criterion_4);
    suite.run(5, "gradient check", 30.0, criterion_5);
    suite.run(3, "dynamics cross-validation", 60.0, criterion_3);
    suite.run(2, "disturbance gadget exactness", 60.0, || criterion_2(&main_cfg));

    suite.run(6, "predictor quality", 1800.0, || {
        let a = criterion_6(&main_cfg)?;
        let detail = format!(
            "{} samples, validation accuracy {:.1}% at 10%, {:.1}% at 5%",
            a.samples,
            100.0 * a.val10,
            100.0 * a.val5
        );
        if a.samples >= MIN_SAMPLES && a.val10 >= ACC_10 && a.val5 >= ACC_5 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
    suite.run(9, "determinism", 600.0, || criterion_9(&root.join("determinism")));
    suite.run(1, "ReLU embedding exactness", 120.0, || criterion_1(&main_cfg));

    let mut base = BaseRun { objectives: BTreeMap::new(), rocof: BTreeMap::new() };
    suite.run(7, "closed-loop RoCoF ordering", 1200.0, || criterion_7(&base_cfg, &mut base));
    let pool = read_pool(&main_cfg).unwrap_or_default();
    suite.run(8, "cost monotonicity", 900.0, || criterion_8(&pool, &base));
    suite.run(10, "UC feasibility", 120.0, || criterion_10(&main_cfg, &pool));

    println!("{} of {} criteria passed", suite.passed, suite.passed + suite.failed);
    if suite.failed > 0 {
        std::process::exit(1);
    }
}
