//! Unit-commitment MILP builders: the base SCUC and its RoCoF-constrained
//! variants, plus schedule extraction, residual checking and costing.
//!
//! Variables are named `u_g_t`, `v_g_t`, `p_g_t`, `r_g_t`, `theta_n_t`,
//! `f_k_t` with 1-based generator, bus, branch and period numbers.
//! Energy, no-load and reserve costs are charged per period over
//! `period_hours`; ramp limits are `ramp_hr · period_hours` per period.

use std::fmt;

use rcuc_milp::{MilpProblem, ProblemError, Sense, SolveResult, SolveStatus, VarId, VarKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freq_dynamics::{
    build_laplacian, eigendecompose, equivalent_rocof, kron_reduce, rocof_closed_form_max,
    DynamicsError, DynamicsOptions,
};
use crate::grid_model::GridCase;

#[derive(Debug, Error)]
pub enum UcError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("solve finished with status {0}; no schedule to extract")]
    NoSolution(SolveStatus),
    #[error("variable `{name}` = {value} is not binary")]
    NonIntegral { name: String, value: f64 },
    #[error("schedule violates {0} constraint(s); worst: {1}")]
    Residual(usize, String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    T,
    Erc,
    Lrc,
    Dnn,
}

impl ModelVariant {
    pub const FREQUENCY_FREE: [ModelVariant; 3] = [ModelVariant::T, ModelVariant::Erc, ModelVariant::Lrc];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::T => "T",
            ModelVariant::Erc => "ERC",
            ModelVariant::Lrc => "LRC",
            ModelVariant::Dnn => "DNN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "t" | "t-scuc" => Some(ModelVariant::T),
            "erc" | "erc-scuc" => Some(ModelVariant::Erc),
            "lrc" | "lrc-scuc" => Some(ModelVariant::Lrc),
            "dnn" | "dnn-rcuc" => Some(ModelVariant::Dnn),
            _ => None,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Handles of the UC decision variables, indexed `[item][period]`.
#[derive(Debug, Clone)]
pub struct UcVars {
    pub u: Vec<Vec<VarId>>,
    pub v: Vec<Vec<VarId>>,
    pub p: Vec<Vec<VarId>>,
    pub r: Vec<Vec<VarId>>,
    pub theta: Vec<Vec<VarId>>,
    pub flow: Vec<Vec<VarId>>,
}

#[derive(Debug, Clone)]
pub struct UcModel {
    pub problem: MilpProblem,
    pub vars: UcVars,
    pub reference_bus: usize,
}

/// Base SCUC: cost objective, nodal balance, DC flows, unit limits,
/// G-1 reserve, ramps and start-up logic.
pub fn build_uc(case: &GridCase) -> Result<UcModel, UcError> {
    let ng = case.n_gens();
    let nb = case.n_buses();
    let nk = case.branches.len();
    let nt = case.n_periods();
    let h = case.system.period_hours;
    let base = case.system.system_base;
    let mut pb = MilpProblem::new("scuc");

    let grid = |pb: &mut MilpProblem, prefix: &str, n: usize, lo: &dyn Fn(usize) -> f64, hi: &dyn Fn(usize) -> f64, kind: VarKind| -> Result<Vec<Vec<VarId>>, ProblemError> {
        (0..n)
            .map(|i| {
                (0..nt)
                    .map(|t| pb.add_var(format!("{prefix}_{}_{}", i + 1, t + 1), lo(i), hi(i), kind))
                    .collect()
            })
            .collect()
    };
    let gens = &case.generators;
    let u = grid(&mut pb, "u", ng, &|_| 0.0, &|_| 1.0, VarKind::Binary)?;
    let v = grid(&mut pb, "v", ng, &|_| 0.0, &|_| 1.0, VarKind::Binary)?;
    let p = grid(&mut pb, "p", ng, &|_| 0.0, &|g| gens[g].p_max, VarKind::Continuous)?;
    let r = grid(&mut pb, "r", ng, &|_| 0.0, &|g| gens[g].reserve_cap, VarKind::Continuous)?;
    let theta = grid(&mut pb, "theta", nb, &|_| f64::NEG_INFINITY, &|_| f64::INFINITY, VarKind::Continuous)?;
    let flow = grid(
        &mut pb,
        "f",
        nk,
        &|k| -case.branches[k].flow_limit,
        &|k| case.branches[k].flow_limit,
        VarKind::Continuous,
    )?;

    let reference_bus = case.generators.iter().map(|g| g.bus).min().unwrap_or(1) - 1;
    for t in 0..nt {
        pb.fix(theta[reference_bus][t], 0.0)?;
    }

    let mut obj = Vec::with_capacity(4 * ng * nt);
    for (g, gen) in gens.iter().enumerate() {
        for t in 0..nt {
            obj.push((p[g][t], gen.cost_var * h));
            obj.push((u[g][t], gen.cost_noload * h));
            obj.push((v[g][t], gen.cost_startup));
            obj.push((r[g][t], gen.cost_reserve * h));
        }
    }
    pb.set_objective(&obj)?;

    for t in 0..nt {
        for n in 0..nb {
            let mut terms: Vec<(VarId, f64)> = case.gens_at_bus(n).iter().map(|&g| (p[g][t], 1.0)).collect();
            for (k, br) in case.branches.iter().enumerate() {
                if br.from_bus == n + 1 {
                    terms.push((flow[k][t], -1.0));
                } else if br.to_bus == n + 1 {
                    terms.push((flow[k][t], 1.0));
                }
            }
            let rhs = case.bus_load(n, t) - case.bus_res(n, t);
            if terms.is_empty() {
                if rhs.abs() > 0.0 {
                    return Err(UcError::Invalid(format!("bus {} has demand but no connection", n + 1)));
                }
                continue;
            }
            pb.add_constraint(format!("bal_{}_{}", n + 1, t + 1), &terms, Sense::Eq, rhs)?;
        }
        for (k, br) in case.branches.iter().enumerate() {
            let w = br.susceptance_b * base;
            pb.add_constraint(
                format!("flow_{}_{}", k + 1, t + 1),
                &[(flow[k][t], 1.0), (theta[br.from_bus - 1][t], -w), (theta[br.to_bus - 1][t], w)],
                Sense::Eq,
                0.0,
            )?;
        }
    }

    for (g, gen) in gens.iter().enumerate() {
        let ramp = gen.ramp_hr * h;
        let u0 = if gen.initial_on { 1.0 } else { 0.0 };
        for t in 0..nt {
            let tag = |s: &str| format!("{s}_{}_{}", g + 1, t + 1);
            pb.add_constraint(tag("pmin"), &[(p[g][t], 1.0), (u[g][t], -gen.p_min)], Sense::Ge, 0.0)?;
            pb.add_constraint(tag("pmax"), &[(p[g][t], 1.0), (r[g][t], 1.0), (u[g][t], -gen.p_max)], Sense::Le, 0.0)?;
            pb.add_constraint(tag("rcap"), &[(r[g][t], 1.0), (u[g][t], -gen.reserve_cap)], Sense::Le, 0.0)?;
            if t == 0 {
                pb.add_constraint(tag("rup"), &[(p[g][0], 1.0)], Sense::Le, gen.initial_output + ramp)?;
                pb.add_constraint(tag("rdn"), &[(p[g][0], -1.0)], Sense::Le, ramp - gen.initial_output)?;
                pb.add_constraint(tag("su"), &[(v[g][0], 1.0), (u[g][0], -1.0)], Sense::Ge, -u0)?;
                pb.add_constraint(tag("sd"), &[(v[g][0], 1.0)], Sense::Le, 1.0 - u0)?;
            } else {
                pb.add_constraint(tag("rup"), &[(p[g][t], 1.0), (p[g][t - 1], -1.0)], Sense::Le, ramp)?;
                pb.add_constraint(tag("rdn"), &[(p[g][t - 1], 1.0), (p[g][t], -1.0)], Sense::Le, ramp)?;
                pb.add_constraint(tag("su"), &[(v[g][t], 1.0), (u[g][t], -1.0), (u[g][t - 1], 1.0)], Sense::Ge, 0.0)?;
                pb.add_constraint(tag("sd"), &[(v[g][t], 1.0), (u[g][t - 1], 1.0)], Sense::Le, 1.0)?;
            }
            pb.add_constraint(tag("vu"), &[(v[g][t], 1.0), (u[g][t], -1.0)], Sense::Le, 0.0)?;
        }
    }

    // Reserve covering the loss of any single unit.
    for t in 0..nt {
        for g in 0..ng {
            let mut terms: Vec<(VarId, f64)> = (0..ng).map(|j| (r[j][t], 1.0)).collect();
            terms.push((p[g][t], -1.0));
            terms.push((r[g][t], -1.0));
            pb.add_constraint(format!("res_{}_{}", g + 1, t + 1), &terms, Sense::Ge, 0.0)?;
        }
    }

    Ok(UcModel {
        problem: pb,
        vars: UcVars { u, v, p, r, theta, flow },
        reference_bus,
    })
}

/// `κ·P_g,t ≤ (2·lim/f_n)·Σ_{i≠g} H_i·S_i·u_i,t`, the centre-of-inertia limit with the
/// tripped unit's inertia removed.
fn add_rocof_rows(
    model: &mut UcModel,
    case: &GridCase,
    prefix: &str,
    kappa: &dyn Fn(usize) -> f64,
) -> Result<(), UcError> {
    let lim = case.system.rocof_limit;
    let fnom = case.system.nominal_freq;
    let c = 2.0 * lim / fnom;
    for t in 0..case.n_periods() {
        for (g, gen) in case.generators.iter().enumerate() {
            if gen.p_max <= 0.0 {
                continue;
            }
            let mut terms = vec![(model.vars.p[g][t], kappa(g))];
            for (i, other) in case.generators.iter().enumerate() {
                if i != g {
                    terms.push((model.vars.u[i][t], -c * other.kinetic_energy()));
                }
            }
            model
                .problem
                .add_constraint(format!("{prefix}_{}_{}", g + 1, t + 1), &terms, Sense::Le, 0.0)?;
        }
    }
    Ok(())
}

pub fn add_erc(model: &mut UcModel, case: &GridCase) -> Result<(), UcError> {
    add_rocof_rows(model, case, "coi", &|_| 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationalFactors {
    /// Bus ids of the observation buses.
    pub buses: Vec<usize>,
    /// `kappa[n][g]` for observation bus n and contingency generator g.
    pub kappa: Vec<Vec<f64>>,
}

impl LocationalFactors {
    pub fn uniform(case: &GridCase, value: f64) -> Self {
        let buses: Vec<usize> = case.generator_buses().iter().map(|b| b + 1).collect();
        let kappa = vec![vec![value; case.n_gens()]; buses.len()];
        Self { buses, kappa }
    }

    pub fn max_for_gen(&self, g: usize) -> f64 {
        self.kappa.iter().map(|row| row[g]).fold(1.0, f64::max)
    }
}

/// Amplification of the windowed locational RoCoF over the centre-of-inertia
/// value, from the homogeneous-inertia modal expression on the network
/// reduced to all generator buses. `nominal_commitment` sets the inertia
/// level; the contingency unit is always counted as committed.
pub fn compute_locational_factors(
    case: &GridCase,
    nominal_commitment: &[bool],
    options: &DynamicsOptions,
) -> Result<LocationalFactors, UcError> {
    let ng = case.n_gens();
    if nominal_commitment.len() != ng {
        return Err(UcError::Invalid("nominal commitment length".into()));
    }
    let gen_buses = case.generator_buses();
    let l = build_laplacian(case, &vec![1.0; case.n_buses()])?;
    let reduced = kron_reduce(&l, &gen_buses)?;
    let eig = eigendecompose(&reduced)?;
    let nn = gen_buses.len();
    let mut kappa = vec![vec![1.0; ng]; nn];
    for (g, gen) in case.generators.iter().enumerate() {
        if gen.p_max <= 0.0 {
            continue;
        }
        let mut on = nominal_commitment.to_vec();
        on[g] = true;
        let committed = on.iter().filter(|&&x| x).count();
        if committed < 2 {
            return Err(UcError::Invalid("nominal commitment needs at least two units".into()));
        }
        let surviving: f64 = (0..ng).filter(|&i| on[i] && i != g).map(|i| case.generators[i].kinetic_energy()).sum();
        let m_total: f64 = (0..ng).filter(|&i| on[i] && i != g).map(|i| case.inertia_coefficient(i)).sum();
        let m_mean = m_total / nn as f64;
        let node = gen_buses.iter().position(|&b| b == gen.bus - 1).expect("generator bus retained");
        let dp = 1.0;
        let local = rocof_closed_form_max(&eig, m_mean, case.system.gamma, dp, node, options.window, options.horizon, options.step)?;
        let uniform = equivalent_rocof(dp * case.system.system_base, surviving, case.system.nominal_freq)?;
        for (n, &rn) in local.iter().enumerate() {
            kappa[n][g] = (rn / uniform).max(1.0);
        }
    }
    Ok(LocationalFactors {
        buses: gen_buses.iter().map(|b| b + 1).collect(),
        kappa,
    })
}

/// Adds the locational rows. For a given generator and period every
/// observation bus yields the same right-hand side, so only the row with the
/// largest κ is kept; the others are implied by it.
pub fn add_lrc(model: &mut UcModel, case: &GridCase, factors: &LocationalFactors) -> Result<(), UcError> {
    if factors.kappa.iter().any(|row| row.len() != case.n_gens()) {
        return Err(UcError::Invalid("locational factors do not match the case".into()));
    }
    if factors.kappa.iter().flatten().any(|k| !k.is_finite() || *k < 1.0) {
        return Err(UcError::Invalid("locational factors must be finite and at least 1".into()));
    }
    add_rocof_rows(model, case, "lrc", &|g| factors.max_for_gen(g))
}

/// T, ERC or LRC model. The DNN variant is assembled by `dnn_embed`.
pub fn build_variant(
    case: &GridCase,
    variant: ModelVariant,
    factors: Option<&LocationalFactors>,
) -> Result<UcModel, UcError> {
    let mut model = build_uc(case)?;
    match variant {
        ModelVariant::T => {}
        ModelVariant::Erc => add_erc(&mut model, case)?,
        ModelVariant::Lrc => {
            let f = factors.ok_or_else(|| UcError::Invalid("LRC needs locational factors".into()))?;
            add_lrc(&mut model, case, f)?;
        }
        ModelVariant::Dnn => {
            return Err(UcError::Invalid("the DNN variant needs a trained predictor".into()));
        }
    }
    model.problem.name = format!("scuc_{}", variant.as_str().to_ascii_lowercase());
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    /// `[generator][period]`.
    pub u: Vec<Vec<bool>>,
    pub v: Vec<Vec<bool>>,
    pub p: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    /// `[bus][period]`, radians.
    pub theta: Vec<Vec<f64>>,
    /// `[branch][period]`, MW.
    pub flows: Vec<Vec<f64>>,
}

impl Schedule {
    pub fn commitment(&self, t: usize) -> Vec<bool> {
        self.u.iter().map(|row| row[t]).collect()
    }

    pub fn dispatch(&self, t: usize) -> Vec<f64> {
        self.p.iter().map(|row| row[t]).collect()
    }

    pub fn n_periods(&self) -> usize {
        self.u.first().map_or(0, |r| r.len())
    }
}

fn read_binary(problem: &MilpProblem, values: &[f64], id: VarId) -> Result<bool, UcError> {
    let x = values[id.0];
    if (x - 1.0).abs() <= 1e-6 {
        Ok(true)
    } else if x.abs() <= 1e-6 {
        Ok(false)
    } else {
        Err(UcError::NonIntegral {
            name: problem.variable(id).name.clone(),
            value: x,
        })
    }
}

/// Variable vector of `model` holding `s`, zero outside the UC variables.
/// Angles are shifted back to the model's reference bus.
pub fn schedule_point(model: &UcModel, s: &Schedule) -> Vec<f64> {
    let mut x = vec![0.0; model.problem.num_vars()];
    let shift: Vec<f64> = (0..s.n_periods()).map(|t| s.theta[model.reference_bus][t]).collect();
    for t in 0..s.n_periods() {
        for g in 0..s.u.len() {
            x[model.vars.u[g][t].0] = s.u[g][t] as u8 as f64;
            x[model.vars.v[g][t].0] = s.v[g][t] as u8 as f64;
            x[model.vars.p[g][t].0] = s.p[g][t];
            x[model.vars.r[g][t].0] = s.r[g][t];
        }
        for (n, row) in model.vars.theta.iter().enumerate() {
            x[row[t].0] = s.theta[n][t] - shift[t];
        }
        for (k, row) in model.vars.flow.iter().enumerate() {
            x[row[t].0] = s.flows[k][t];
        }
    }
    x
}

/// Reads a schedule from a solved model and re-checks it against the case.
pub fn extract_schedule(result: &SolveResult, model: &UcModel, case: &GridCase) -> Result<Schedule, UcError> {
    let values = match (&result.values, result.status.may_have_point()) {
        (Some(v), true) => v,
        _ => return Err(UcError::NoSolution(result.status)),
    };
    let pb = &model.problem;
    let bin = |ids: &Vec<Vec<VarId>>| -> Result<Vec<Vec<bool>>, UcError> {
        ids.iter()
            .map(|row| row.iter().map(|&id| read_binary(pb, values, id)).collect())
            .collect()
    };
    let cont = |ids: &Vec<Vec<VarId>>| -> Vec<Vec<f64>> {
        ids.iter().map(|row| row.iter().map(|&id| values[id.0]).collect()).collect()
    };
    let u = bin(&model.vars.u)?;
    let v = bin(&model.vars.v)?;
    // Snap dispatch of offline units and tiny negatives introduced by tolerances.
    let mut p = cont(&model.vars.p);
    let mut r = cont(&model.vars.r);
    for g in 0..p.len() {
        for t in 0..p[g].len() {
            if !u[g][t] {
                p[g][t] = 0.0;
                r[g][t] = 0.0;
            }
            p[g][t] = p[g][t].max(0.0);
            r[g][t] = r[g][t].max(0.0);
        }
    }
    let mut theta = cont(&model.vars.theta);
    // Angles referenced to the lowest-numbered bus with a unit committed in period 1.
    if let Some(refbus) = case
        .generators
        .iter()
        .enumerate()
        .filter(|(g, _)| u[*g].first().copied().unwrap_or(false))
        .map(|(_, gen)| gen.bus - 1)
        .min()
    {
        for t in 0..case.n_periods() {
            let shift = theta[refbus][t];
            for row in theta.iter_mut() {
                row[t] -= shift;
            }
        }
    }
    let flows = cont(&model.vars.flow);
    let schedule = Schedule { u, v, p, r, theta, flows };
    let violations = check_schedule(&schedule, case, 1e-4);
    if let Some(worst) = violations.first() {
        return Err(UcError::Residual(violations.len(), worst.to_string()));
    }
    Ok(schedule)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleViolation {
    pub constraint: String,
    pub residual: f64,
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} off by {:.3e}", self.constraint, self.residual)
    }
}

/// Independent residual check of every base SCUC constraint, largest first.
pub fn check_schedule(s: &Schedule, case: &GridCase, tol: f64) -> Vec<ScheduleViolation> {
    let mut out = Vec::new();
    let mut need = |ok_gap: f64, name: String| {
        if ok_gap > tol {
            out.push(ScheduleViolation { constraint: name, residual: ok_gap });
        }
    };
    let nt = case.n_periods();
    let ng = case.n_gens();
    let h = case.system.period_hours;
    let shape_ok = s.u.len() == ng
        && s.p.len() == ng
        && s.theta.len() == case.n_buses()
        && s.flows.len() == case.branches.len()
        && s.u.iter().chain(&s.v).all(|r| r.len() == nt);
    if !shape_ok {
        return vec![ScheduleViolation { constraint: "shape".into(), residual: f64::INFINITY }];
    }
    let b01 = |b: bool| if b { 1.0 } else { 0.0 };
    for t in 0..nt {
        for n in 0..case.n_buses() {
            let mut net: f64 = case.gens_at_bus(n).iter().map(|&g| s.p[g][t]).sum();
            for (k, br) in case.branches.iter().enumerate() {
                if br.from_bus == n + 1 {
                    net -= s.flows[k][t];
                }
                if br.to_bus == n + 1 {
                    net += s.flows[k][t];
                }
            }
            net -= case.bus_load(n, t) - case.bus_res(n, t);
            need(net.abs(), format!("balance bus {} t{}", n + 1, t + 1));
        }
        for (k, br) in case.branches.iter().enumerate() {
            let dc = br.susceptance_b * case.system.system_base * (s.theta[br.from_bus - 1][t] - s.theta[br.to_bus - 1][t]);
            need((s.flows[k][t] - dc).abs(), format!("flow definition branch {} t{}", br.id, t + 1));
            need(s.flows[k][t].abs() - br.flow_limit, format!("flow limit branch {} t{}", br.id, t + 1));
        }
        let rsum: f64 = (0..ng).map(|g| s.r[g][t]).sum();
        for (g, gen) in case.generators.iter().enumerate() {
            let (u, v, p, r) = (b01(s.u[g][t]), b01(s.v[g][t]), s.p[g][t], s.r[g][t]);
            let id = gen.id;
            need(gen.p_min * u - p, format!("p_min gen {id} t{}", t + 1));
            need(p + r - gen.p_max * u, format!("p_max gen {id} t{}", t + 1));
            need(-r, format!("reserve sign gen {id} t{}", t + 1));
            need(-p, format!("dispatch sign gen {id} t{}", t + 1));
            need(r - gen.reserve_cap * u, format!("reserve cap gen {id} t{}", t + 1));
            need(p + r - rsum, format!("G-1 reserve gen {id} t{}", t + 1));
            let (p_prev, u_prev) = if t == 0 {
                (gen.initial_output, b01(gen.initial_on))
            } else {
                (s.p[g][t - 1], b01(s.u[g][t - 1]))
            };
            need(p - p_prev - gen.ramp_hr * h, format!("ramp up gen {id} t{}", t + 1));
            need(p_prev - p - gen.ramp_hr * h, format!("ramp down gen {id} t{}", t + 1));
            need(u - u_prev - v, format!("start-up gen {id} t{}", t + 1));
            need(v - (1.0 - u_prev), format!("start-up after off gen {id} t{}", t + 1));
            need(v - u, format!("start-up implies on gen {id} t{}", t + 1));
        }
    }
    out.sort_by(|a, b| b.residual.total_cmp(&a.residual));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub startup: f64,
    pub operation: f64,
    pub reserves: f64,
}

pub fn cost_breakdown(s: &Schedule, case: &GridCase) -> CostBreakdown {
    let h = case.system.period_hours;
    let mut c = CostBreakdown::default();
    for (g, gen) in case.generators.iter().enumerate() {
        for t in 0..s.n_periods() {
            if s.v[g][t] {
                c.startup += gen.cost_startup;
            }
            if s.u[g][t] {
                c.operation += (gen.cost_var * s.p[g][t] + gen.cost_noload) * h;
            }
            c.reserves += gen.cost_reserve * s.r[g][t] * h;
        }
    }
    c.total = c.startup + c.operation + c.reserves;
    c
}

/// Solved UC variant with its verified schedule.
#[derive(Debug, Clone)]
pub struct UcOutcome {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub mip_gap: f64,
    pub schedule: Option<Schedule>,
    pub diagnostics: Vec<String>,
}

pub fn solve_model(model: &UcModel, case: &GridCase, solver: &rcuc_milp::Solver) -> Result<UcOutcome, UcError> {
    outcome(solver.solve(&model.problem), model, case)
}

/// [`solve_model`] with a full variable vector offered as the first incumbent.
pub fn solve_model_from(
    model: &UcModel,
    case: &GridCase,
    solver: &rcuc_milp::Solver,
    start: &[f64],
) -> Result<UcOutcome, UcError> {
    outcome(solver.solve_from(&model.problem, start), model, case)
}

/// [`solve_model`] under explicit solver options.
pub fn solve_model_with(
    model: &UcModel,
    case: &GridCase,
    solver: &rcuc_milp::Solver,
    options: &rcuc_milp::SolveOptions,
) -> Result<UcOutcome, UcError> {
    outcome(solver.solve_with(&model.problem, options), model, case)
}

fn outcome(
    result: Result<SolveResult, rcuc_milp::SolverError>,
    model: &UcModel,
    case: &GridCase,
) -> Result<UcOutcome, UcError> {
    let result = result.map_err(|e| UcError::Invalid(format!("solver: {e}")))?;
    let schedule = if result.status.may_have_point() && result.values.is_some() {
        Some(extract_schedule(&result, model, case)?)
    } else {
        None
    };
    Ok(UcOutcome {
        status: result.status,
        objective: result.objective,
        mip_gap: result.mip_gap,
        schedule,
        diagnostics: result.diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_cases::{one_bus, two_unit};

    #[test]
    fn cost_arithmetic() {
        let case = one_bus(1, 50.0);
        let s = Schedule {
            u: vec![vec![true]],
            v: vec![vec![true]],
            p: vec![vec![50.0]],
            r: vec![vec![0.0]],
            theta: vec![vec![0.0]],
            flows: vec![],
        };
        let c = cost_breakdown(&s, &case);
        assert_eq!(c.operation, 1100.0);
        assert_eq!(c.startup, 500.0);
        assert_eq!(c.total, 1600.0);
        let off = Schedule { u: vec![vec![false]], v: vec![vec![false]], p: vec![vec![0.0]], ..s };
        let z = cost_breakdown(&off, &case);
        assert_eq!(z.total, 0.0);
        assert_eq!(z.operation, 0.0);
    }

    #[test]
    fn variable_names_and_counts() {
        let case = two_unit(50.0);
        let m = build_uc(&case).unwrap();
        assert!(m.problem.var_by_name("u_2_1").is_some());
        assert!(m.problem.var_by_name("theta_1_1").is_some());
        assert_eq!(m.problem.num_binaries(), 4);
        let mut erc = m.clone();
        add_erc(&mut erc, &case).unwrap();
        assert_eq!(erc.problem.num_constraints(), m.problem.num_constraints() + 2);
    }

    #[test]
    fn uniform_factors_reproduce_erc_rows() {
        let case = two_unit(50.0);
        let mut erc = build_uc(&case).unwrap();
        add_erc(&mut erc, &case).unwrap();
        let mut lrc = build_uc(&case).unwrap();
        let f = LocationalFactors { buses: vec![1], kappa: vec![vec![1.0, 1.0]] };
        add_lrc(&mut lrc, &case, &f).unwrap();
        let rows = |m: &UcModel, pre: &str| -> Vec<(Vec<(VarId, f64)>, f64)> {
            m.problem
                .constraints()
                .iter()
                .filter(|c| c.name.starts_with(pre))
                .map(|c| (c.terms.clone(), c.rhs))
                .collect()
        };
        assert_eq!(rows(&erc, "coi_"), rows(&lrc, "lrc_"));
    }

    #[test]
    fn non_binary_commitment_named() {
        let case = one_bus(1, 50.0);
        let model = build_uc(&case).unwrap();
        let mut values = vec![0.0; model.problem.num_vars()];
        values[model.vars.u[0][0].0] = 0.4;
        let res = SolveResult {
            status: SolveStatus::Optimal,
            objective: Some(0.0),
            values: Some(values.clone()),
            mip_gap: 0.0,
            backend: "test".into(),
            diagnostics: vec![],
        };
        match extract_schedule(&res, &model, &case) {
            Err(UcError::NonIntegral { name, .. }) => assert_eq!(name, "u_1_1"),
            other => panic!("{other:?}"),
        }
        values[model.vars.u[0][0].0] = 0.9999997;
        values[model.vars.v[0][0].0] = 1.0;
        values[model.vars.p[0][0].0] = 50.0;
        let res = SolveResult { values: Some(values), ..res };
        // Single unit: G-1 reserve cannot hold with P > 0.
        assert!(matches!(extract_schedule(&res, &model, &case), Err(UcError::Residual(..))));
    }
}
