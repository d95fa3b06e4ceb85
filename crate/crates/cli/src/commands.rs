//! Pipeline stages. Each command reads and writes files under `out_dir` only,
//! so reruns with the same configuration overwrite with identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rcuc_core::data_gen::{
    generate_dispatch_pool, label_pool, largest_unit, read_dataset, sample_scenarios, split, to_dataset,
    write_dataset, RejectionReport,
};
use rcuc_core::dnn_embed::{build_dnn_rcuc_with, dnn_period_bounds, predict_schedule, solve_dnn_rcuc, DnnModel};
use rcuc_core::freq_dynamics::{contingency_rocof, contingency_rocof_sized, DynamicsError, RocofReport, SwingTrajectory};
use rcuc_core::grid_model::GridCase;
use rcuc_core::rocof_net::{evaluate, load_weights, save_weights, train, Mlp};
use rcuc_core::uc_milp::{
    build_variant, check_schedule, compute_locational_factors, cost_breakdown, solve_model, CostBreakdown,
    LocationalFactors, ModelVariant, Schedule, UcModel, UcOutcome,
};
use rcuc_milp::{SolveStatus, Solver};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::Failure;

pub const ACCURACY_TOLERANCES: [f64; 6] = [0.10, 0.09, 0.08, 0.07, 0.06, 0.05];

/// Residual tolerance, MW, for the independent schedule check.
pub const SCHEDULE_TOL: f64 = 1e-4;

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn model_dir(cfg: &RunConfig, variant: ModelVariant) -> PathBuf {
    cfg.out_dir.join(variant.as_str().to_ascii_lowercase())
}

pub fn locational_factors(cfg: &RunConfig, case: &GridCase) -> Result<LocationalFactors> {
    let all_on = vec![true; case.n_gens()];
    compute_locational_factors(case, &all_on, &cfg.dynamics()).context("locational factors")
}

/// One solved pool entry as stored in `pool.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub scenario: usize,
    pub variant: ModelVariant,
    pub status: String,
    pub objective: Option<f64>,
    pub schedule: Option<Schedule>,
}

#[derive(Debug, Clone)]
pub struct DatagenSummary {
    pub scenarios: usize,
    pub solved: usize,
    pub samples: usize,
    pub train: usize,
    pub val: usize,
    pub rejections: RejectionReport,
}

pub fn cmd_datagen(cfg: &RunConfig) -> Result<DatagenSummary> {
    let case = cfg.load_case()?;
    let solver = cfg.solver.build()?;
    let scenarios = sample_scenarios(&case, &cfg.scenario_config())?;
    let factors = locational_factors(cfg, &case)?;
    log::info!("solving {} scenarios x 3 variants", scenarios.len());
    let pool = generate_dispatch_pool(&case, &scenarios, &factors, &solver)?;
    let (samples, rejections) = label_pool(&case, &scenarios, &pool, &cfg.dynamics())?;
    let data = to_dataset(case.n_gens(), &samples);
    if data.len() < 2 {
        bail!("only {} usable samples; increase datagen.n_scenarios", data.len());
    }
    let (tr, va) = split(&data, cfg.datagen.train_fraction, cfg.seed)?;

    ensure_dir(&cfg.out_dir)?;
    write_dataset(&data, &cfg.out_dir.join("dataset.csv"))?;
    write_dataset(&tr, &cfg.out_dir.join("train.csv"))?;
    write_dataset(&va, &cfg.out_dir.join("val.csv"))?;
    write(&cfg.out_dir.join("rejections.txt"), &rejections.to_string())?;

    let mut csv = String::from("scenario,variant,status,objective\n");
    let records: Vec<PoolRecord> = pool
        .iter()
        .map(|e| {
            let obj = e.objective.map_or(String::new(), |o| format!("{o:.6}"));
            let _ = writeln!(csv, "{},{},{},{obj}", e.scenario, e.variant, e.status);
            PoolRecord {
                scenario: e.scenario,
                variant: e.variant,
                status: e.status.to_string(),
                objective: e.objective,
                schedule: e.schedule.clone(),
            }
        })
        .collect();
    write(&cfg.out_dir.join("pool.csv"), &csv)?;
    write(&cfg.out_dir.join("pool.json"), &serde_json::to_string(&records)?)?;

    Ok(DatagenSummary {
        scenarios: scenarios.len(),
        solved: pool.iter().filter(|e| e.schedule.is_some()).count(),
        samples: data.len(),
        train: tr.len(),
        val: va.len(),
        rejections,
    })
}

pub fn read_pool(cfg: &RunConfig) -> Result<Vec<PoolRecord>> {
    let path = cfg.out_dir.join("pool.json");
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub epochs: usize,
    pub best_val_mse: f64,
    /// (tolerance, train accuracy, validation accuracy).
    pub accuracy: Vec<(f64, f64, f64)>,
}

impl TrainSummary {
    pub fn val_accuracy(&self, tol: f64) -> Option<f64> {
        self.accuracy.iter().find(|a| (a.0 - tol).abs() < 1e-12).map(|a| a.2)
    }
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    let tr = read_dataset(&cfg.out_dir.join("train.csv")).context("train.csv (run datagen first)")?;
    let va = read_dataset(&cfg.out_dir.join("val.csv")).context("val.csv (run datagen first)")?;
    let (mlp, history) = train(&tr, &va, &cfg.train_config())?;
    save_weights(&mlp, &cfg.out_dir.join("weights.txt"))?;

    let acc_tr = evaluate(&mlp, &tr, &ACCURACY_TOLERANCES)?;
    let acc_va = evaluate(&mlp, &va, &ACCURACY_TOLERANCES)?;
    let accuracy: Vec<(f64, f64, f64)> = acc_tr.iter().zip(&acc_va).map(|(a, b)| (a.0, a.1, b.1)).collect();
    let mut csv = String::from("tolerance_pct,train_accuracy,val_accuracy\n");
    for (tol, a, b) in &accuracy {
        let _ = writeln!(csv, "{:.0},{a:.6},{b:.6}", tol * 100.0);
    }
    write(&cfg.out_dir.join("accuracy.csv"), &csv)?;

    let mut hist = String::from("epoch,train_mse,val_mse,best_val_mse,lr\n");
    for h in &history {
        let _ = writeln!(hist, "{},{:e},{:e},{:e},{:e}", h.epoch, h.train_mse, h.val_mse, h.best_val_mse, h.lr);
    }
    write(&cfg.out_dir.join("history.csv"), &hist)?;

    let last = history.last().ok_or_else(|| anyhow!("training ran no epochs"))?;
    Ok(TrainSummary { epochs: history.len(), best_val_mse: last.best_val_mse, accuracy })
}

pub fn weights_path(cfg: &RunConfig, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| cfg.out_dir.join("weights.txt"), Path::to_path_buf)
}

#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub variant: ModelVariant,
    pub outcome: UcOutcome,
    pub costs: CostBreakdown,
    /// Predicted RoCoF per period, DNN variant only.
    pub predicted: Vec<f64>,
}

/// Loads the predictor for the DNN variant.
pub fn load_predictor(cfg: &RunConfig, weights: Option<&Path>) -> Result<Mlp> {
    let path = weights_path(cfg, weights);
    load_weights(&path).with_context(|| format!("{} (run train first)", path.display()))
}

/// Builds one of the T, ERC and LRC variants.
pub fn build_model(cfg: &RunConfig, case: &GridCase, variant: ModelVariant) -> Result<UcModel> {
    Ok(match variant {
        ModelVariant::Dnn => bail!("the DNN variant is built by build_dnn_model"),
        ModelVariant::Lrc => build_variant(case, variant, Some(&locational_factors(cfg, case)?))?,
        _ => build_variant(case, variant, None)?,
    })
}

pub fn build_dnn_model(cfg: &RunConfig, case: &GridCase, mlp: &Mlp, solver: &Solver) -> Result<DnnModel> {
    let bounds = dnn_period_bounds(case, mlp, cfg.dnn.tighten_bounds.then_some(solver)).context("neuron bounds")?;
    Ok(build_dnn_rcuc_with(case, mlp, cfg.rocof_limit, bounds)?)
}

fn solve_variant(cfg: &RunConfig, case: &GridCase, variant: ModelVariant, solver: &Solver) -> Result<UcOutcome> {
    let model = build_model(cfg, case, variant)?;
    log::info!(
        "{variant}: {} variables ({} integral), {} rows",
        model.problem.num_vars(),
        model.problem.num_integral(),
        model.problem.num_constraints()
    );
    Ok(solve_model(&model, case, solver)?)
}

/// The DNN variant, seeded with the T, ERC and LRC schedules.
fn solve_dnn(cfg: &RunConfig, case: &GridCase, mlp: &Mlp, solver: &Solver) -> Result<UcOutcome> {
    let model = build_dnn_model(cfg, case, mlp, solver)?;
    log::info!(
        "DNN: {} variables ({} integral), {} rows",
        model.uc.problem.num_vars(),
        model.uc.problem.num_integral(),
        model.uc.problem.num_constraints()
    );
    let mut seeds = Vec::new();
    for v in [ModelVariant::T, ModelVariant::Erc, ModelVariant::Lrc] {
        if let Some(s) = solve_variant(cfg, case, v, solver)?.schedule {
            seeds.push(s);
        }
    }
    Ok(solve_dnn_rcuc(&model, mlp, case, solver, &seeds, &cfg.dnn.search())?)
}

pub fn cmd_solve(cfg: &RunConfig, variant: ModelVariant, weights: Option<&Path>) -> Result<SolveSummary> {
    let case = cfg.load_case()?;
    let solver = cfg.solver.build()?;
    let (outcome, mlp) = if variant == ModelVariant::Dnn {
        let mlp = load_predictor(cfg, weights)?;
        (solve_dnn(cfg, &case, &mlp, &solver)?, Some(mlp))
    } else {
        (solve_variant(cfg, &case, variant, &solver)?, None)
    };
    let Some(schedule) = &outcome.schedule else {
        let mut msg = format!("{variant}-SCUC returned {}", outcome.status);
        if outcome.status == SolveStatus::Infeasible && variant != ModelVariant::T {
            let base = solve_model(&build_variant(&case, ModelVariant::T, None)?, &case, &solver)?;
            let _ = write!(
                msg,
                "; the base SCUC without RoCoF rows is {}",
                if base.schedule.is_some() { "feasible, so the RoCoF rows are binding" } else { "also infeasible" }
            );
        }
        for d in &outcome.diagnostics {
            let _ = write!(msg, "\n  {d}");
        }
        return Err(Failure::Infeasible(msg).into());
    };
    let costs = cost_breakdown(schedule, &case);
    let predicted = match &mlp {
        Some(m) => predict_schedule(m, &case, schedule)?,
        None => Vec::new(),
    };

    let dir = model_dir(cfg, variant);
    ensure_dir(&dir)?;
    write(&dir.join("schedule.json"), &serde_json::to_string_pretty(schedule)?)?;
    write(
        &dir.join("costs.csv"),
        &format!(
            "Total,Start-up,Operation,Reserves\n{:.2},{:.2},{:.2},{:.2}\n",
            costs.total, costs.startup, costs.operation, costs.reserves
        ),
    )?;
    write(
        &dir.join("solve.txt"),
        &(format!(
            "model {variant}\nstatus {}\nobjective {:.6}\nmip_gap {:.6}\n",
            outcome.status,
            outcome.objective.unwrap_or(f64::NAN),
            outcome.mip_gap
        ) + &outcome.diagnostics.iter().map(|d| format!("# {d}\n")).collect::<String>()),
    )?;
    if !predicted.is_empty() {
        let mut csv = String::from("period,predicted_rocof\n");
        for (t, r) in predicted.iter().enumerate() {
            let _ = writeln!(csv, "{},{r:.6}", t + 1);
        }
        write(&dir.join("predicted.csv"), &csv)?;
    }
    Ok(SolveSummary { variant, outcome, costs, predicted })
}

pub fn read_schedule(path: &Path) -> Result<Schedule> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {} (run solve first)", path.display()))?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

pub fn check_schedule_shape(s: &Schedule, case: &GridCase) -> Result<()> {
    if s.u.len() != case.n_gens() || s.n_periods() != case.n_periods() || s.theta.len() != case.n_buses() {
        bail!(
            "schedule is {} units x {} periods, the case has {} x {}",
            s.u.len(),
            s.n_periods(),
            case.n_gens(),
            case.n_periods()
        );
    }
    Ok(())
}

/// The largest committed machine of period `t`; with `aggregate_bus` the
/// committed units of that bus count as one machine.
pub fn contingency_units(s: &Schedule, t: usize, case: &GridCase, aggregate_bus: Option<usize>) -> Option<Vec<usize>> {
    let u = s.commitment(t);
    let mut p = s.dispatch(t);
    let group: Vec<usize> = match aggregate_bus {
        Some(b) => (0..u.len()).filter(|&g| u[g] && case.generators[g].bus == b).collect(),
        None => Vec::new(),
    };
    if let Some(&lead) = group.first() {
        let total: f64 = group.iter().map(|&g| p[g]).sum();
        for &g in &group[1..] {
            p[g] = 0.0;
        }
        p[lead] = total;
    }
    let g = largest_unit(&u, &p)?;
    Some(if group.contains(&g) { group } else { vec![g] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodCheck {
    pub period: usize,
    pub net_load_mw: f64,
    pub tripped: Vec<usize>,
    pub event_mw: f64,
    /// None when the simulation diverged.
    pub highest_rocof: Option<f64>,
    pub highest_bus: Option<usize>,
    /// (R_h − limit) / limit, percent.
    pub gap_pct: Option<f64>,
    pub violation: bool,
    pub divergent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub model: String,
    pub limit: f64,
    pub lowest_netload_period: usize,
    pub aggregate_bus: Option<usize>,
    pub periods: Vec<PeriodCheck>,
}

impl VerificationReport {
    pub fn lowest_netload(&self) -> &PeriodCheck {
        &self.periods[self.lowest_netload_period - 1]
    }

    pub fn has_violation(&self) -> bool {
        self.periods.iter().any(|p| p.violation || p.divergent)
    }

    pub fn max_rocof(&self) -> Option<f64> {
        self.periods.iter().filter_map(|p| p.highest_rocof).reduce(f64::max)
    }
}

/// Percent gap of a RoCoF value against the limit.
pub fn violation_gap(rocof: f64, limit: f64) -> f64 {
    (rocof - limit) / limit * 100.0
}

pub fn verify_schedule(
    cfg: &RunConfig,
    case: &GridCase,
    s: &Schedule,
    model: &str,
    aggregate_bus: Option<usize>,
) -> Result<VerificationReport> {
    check_schedule_shape(s, case)?;
    if let Some(b) = aggregate_bus {
        if b == 0 || b > case.n_buses() {
            bail!("aggregate bus {b} is not in the case");
        }
    }
    let limit = cfg.rocof_limit;
    let opts = cfg.dynamics();
    let mut periods = Vec::with_capacity(case.n_periods());
    for t in 0..case.n_periods() {
        let tripped = contingency_units(s, t, case, aggregate_bus).ok_or_else(|| anyhow!("period {} has no committed unit", t + 1))?;
        let p = s.dispatch(t);
        let event_mw = tripped.iter().map(|&g| p[g]).sum();
        let (rocof, bus, divergent) = match contingency_rocof(case, &s.commitment(t), &p, t, &tripped, &opts) {
            Ok((r, _)) => (Some(r.highest_rocof), Some(r.highest_bus), false),
            Err(DynamicsError::Divergent(_) | DynamicsError::NoEquilibrium(_)) => (None, None, true),
            Err(e) => return Err(anyhow!(e).context(format!("period {}", t + 1))),
        };
        periods.push(PeriodCheck {
            period: t + 1,
            net_load_mw: case.net_load(t),
            tripped: tripped.iter().map(|g| g + 1).collect(),
            event_mw,
            highest_rocof: rocof,
            highest_bus: bus,
            gap_pct: rocof.map(|r| violation_gap(r, limit)),
            violation: rocof.is_some_and(|r| r > limit),
            divergent,
        });
    }
    Ok(VerificationReport {
        model: model.to_string(),
        limit,
        lowest_netload_period: case.lowest_netload_period() + 1,
        aggregate_bus,
        periods,
    })
}

pub fn format_verification(r: &VerificationReport) -> String {
    let mut out = format!("model {}  limit {} Hz/s  lowest-netload period {}\n", r.model, r.limit, r.lowest_netload_period);
    if let Some(b) = r.aggregate_bus {
        let _ = writeln!(out, "units at bus {b} aggregated");
    }
    let _ = writeln!(out, "{:>6} {:>10} {:>12} {:>10} {:>10} {:>6} {:>9}  flag", "period", "netload", "tripped", "event_mw", "rocof", "bus", "gap_pct");
    for p in &r.periods {
        let tripped = p.tripped.iter().map(|g| g.to_string()).collect::<Vec<_>>().join("+");
        let rocof = p.highest_rocof.map_or("-".to_string(), |x| format!("{x:.4}"));
        let bus = p.highest_bus.map_or("-".to_string(), |x| x.to_string());
        let gap = p.gap_pct.map_or("-".to_string(), |x| format!("{x:+.2}"));
        let flag = if p.divergent {
            "DIVERGED"
        } else if p.violation {
            "VIOLATION"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "{:>6} {:>10.1} {:>12} {:>10.1} {:>10} {:>6} {:>9}  {flag}",
            p.period, p.net_load_mw, tripped, p.event_mw, rocof, bus, gap
        );
    }
    out
}

pub fn cmd_verify(cfg: &RunConfig, variant: ModelVariant, aggregate_bus: Option<usize>) -> Result<VerificationReport> {
    let case = cfg.load_case()?;
    let dir = model_dir(cfg, variant);
    let s = read_schedule(&dir.join("schedule.json"))?;
    let bad = check_schedule(&s, &case, SCHEDULE_TOL);
    if let Some(worst) = bad.first() {
        bail!("schedule fails the residual check at {} rows, worst {worst}", bad.len());
    }
    let report = verify_schedule(cfg, &case, &s, variant.as_str(), aggregate_bus.or(cfg.verify.aggregate_bus))?;
    let suffix = report.aggregate_bus.map_or(String::new(), |b| format!("_agg{b}"));
    let mut csv = String::from("period,net_load_mw,tripped,event_mw,highest_rocof,highest_bus,gap_pct,violation,divergent\n");
    for p in &report.periods {
        let tripped = p.tripped.iter().map(|g| g.to_string()).collect::<Vec<_>>().join("+");
        let _ = writeln!(
            csv,
            "{},{:.4},{tripped},{:.4},{},{},{},{},{}",
            p.period,
            p.net_load_mw,
            p.event_mw,
            p.highest_rocof.map_or(String::new(), |x| format!("{x:.6}")),
            p.highest_bus.map_or(String::new(), |x| x.to_string()),
            p.gap_pct.map_or(String::new(), |x| format!("{x:.4}")),
            p.violation as u8,
            p.divergent as u8
        );
    }
    write(&dir.join(format!("verification{suffix}.csv")), &csv)?;
    write(&dir.join(format!("verification{suffix}.json")), &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct EventSpec {
    pub variant: ModelVariant,
    /// 1-based.
    pub period: usize,
    /// 1-based; the largest committed unit when absent.
    pub gen: Option<usize>,
    pub delta_mw: Option<f64>,
}

pub fn simulate_event(cfg: &RunConfig, case: &GridCase, s: &Schedule, ev: &EventSpec) -> Result<(RocofReport, SwingTrajectory)> {
    check_schedule_shape(s, case)?;
    if ev.period == 0 || ev.period > case.n_periods() {
        bail!("period {} outside 1..={}", ev.period, case.n_periods());
    }
    let t = ev.period - 1;
    let u = s.commitment(t);
    let g = match ev.gen {
        Some(g) if g == 0 || g > case.n_gens() => bail!("generator {g} is not in the case"),
        Some(g) if !u[g - 1] => bail!("generator {g} is not committed in period {}", ev.period),
        Some(g) => g - 1,
        None => largest_unit(&u, &s.dispatch(t)).ok_or_else(|| anyhow!("no committed unit"))?,
    };
    Ok(contingency_rocof_sized(case, &u, &s.dispatch(t), t, &[g], ev.delta_mw, &cfg.dynamics())?)
}

pub fn trajectory_csv(traj: &SwingTrajectory, nominal_freq: f64) -> String {
    let mut out = String::from("t");
    for b in &traj.gen_buses {
        let _ = write!(out, ",theta_{b}");
    }
    for b in &traj.gen_buses {
        let _ = write!(out, ",freq_{b}");
    }
    out.push('\n');
    for (k, t) in traj.time_grid.iter().enumerate() {
        let _ = write!(out, "{t:.6}");
        for th in &traj.theta[k] {
            let _ = write!(out, ",{th:.9}");
        }
        for w in &traj.omega_dev[k] {
            let _ = write!(out, ",{:.9}", nominal_freq + w / (2.0 * std::f64::consts::PI));
        }
        out.push('\n');
    }
    out
}

pub fn format_rocof_report(r: &RocofReport, ev: &EventSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {}", ev.variant);
    let _ = writeln!(out, "period {}", ev.period);
    let _ = writeln!(out, "event_gen {}", r.event_gen.map_or("-".into(), |g| g.to_string()));
    let _ = writeln!(out, "event_mw {:.6}", r.event_mw);
    let _ = writeln!(out, "highest_rocof {:.6}", r.highest_rocof);
    let _ = writeln!(out, "highest_bus {}", r.highest_bus);
    out.push_str("bus,rocof\n");
    for (b, x) in r.bus_ids.iter().zip(&r.per_bus_rocof) {
        let _ = writeln!(out, "{b},{x:.6}");
    }
    out
}

pub fn cmd_simulate(cfg: &RunConfig, ev: &EventSpec) -> Result<RocofReport> {
    let case = cfg.load_case()?;
    let dir = model_dir(cfg, ev.variant);
    let s = read_schedule(&dir.join("schedule.json"))?;
    let (report, traj) = simulate_event(cfg, &case, &s, ev)?;
    let stem = format!("sim_t{}", ev.period);
    write(&dir.join(format!("{stem}.csv")), &trajectory_csv(&traj, case.system.nominal_freq))?;
    write(&dir.join(format!("{stem}.txt")), &format_rocof_report(&report, ev))?;
    Ok(report)
}
