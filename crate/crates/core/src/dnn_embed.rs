//! Mixed-integer encoding of a trained RoCoF predictor inside the UC model.
//!
//! Per period `t` the block adds `lam_t_g`, `xi_t_g` (disturbance argmax
//! gadget), `zh_t_l_j` / `z_t_l_j` / `a_t_l_j` (pre-activation,
//! post-activation and indicator of hidden neuron j in layer l) and
//! `rhat_t`, the predicted highest RoCoF.

use rcuc_milp::{check_feasible, LinExpr, MilpProblem, ProblemError, Sense, SolveOptions, SolveStatus, Solver, SolverError, VarId, VarKind};
use thiserror::Error;

use crate::grid_model::GridCase;
use crate::data_gen::largest_unit;
use crate::rocof_net::{build_features, Mlp, NetError};
use crate::uc_milp::{build_uc, cost_breakdown, schedule_point, solve_model_with, Schedule, UcError, UcModel, UcOutcome};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("variable `{0}` has no finite upper bound")]
    Unbounded(String),
    #[error("input interval {index} is [{lo}, {hi}]")]
    BadBox { index: usize, lo: f64, hi: f64 },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Uc(#[from] UcError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Pre-activation interval of every neuron, layer by layer (output last).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub pre: Vec<Vec<(f64, f64)>>,
}

impl LayerBounds {
    pub fn big_m(&self, layer: usize, neuron: usize) -> f64 {
        let (lb, ub) = self.pre[layer][neuron];
        lb.abs().max(ub)
    }
}

/// Interval arithmetic through each affine map and ReLU.
pub fn propagate_bounds(mlp: &Mlp, input_box: &[(f64, f64)]) -> Result<LayerBounds, EmbedError> {
    mlp.validate()?;
    if input_box.len() != mlp.input_dim() {
        return Err(EmbedError::Dimension { expected: mlp.input_dim(), got: input_box.len() });
    }
    for (index, &(lo, hi)) in input_box.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(EmbedError::BadBox { index, lo, hi });
        }
    }
    Ok(LayerBounds { pre: interval_layers(mlp, 0, input_box.to_vec()) })
}

/// Pre-activation intervals of layers `first..`, given the input interval of
/// layer `first`.
fn interval_layers(mlp: &Mlp, first: usize, input: Vec<(f64, f64)>) -> Vec<Vec<(f64, f64)>> {
    let mut cur = input;
    let mut pre = Vec::with_capacity(mlp.layers.len() - first);
    let last = mlp.layers.len() - 1;
    for (k, l) in mlp.layers.iter().enumerate().skip(first) {
        let mut out: Vec<(f64, f64)> = l.b.iter().map(|&b| (b, b)).collect();
        for (i, &(lo, hi)) in cur.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate() {
                let w = l.weight(i, j);
                let (a, b) = (w * lo, w * hi);
                o.0 += a.min(b);
                o.1 += a.max(b);
            }
        }
        pre.push(out.clone());
        if k < last {
            cur = out.iter().map(|&(lo, hi)| (lo.max(0.0), hi.max(0.0))).collect();
        }
    }
    pre
}

/// Largest value of Σ_g (wu_g·u_g + wp_g·p_g) over 0 ≤ p_g ≤ ub_g·u_g,
/// u_g ∈ [0, 1], Σ p_g = demand. Fractional knapsack on the per-unit value
/// of each unit once its cheapest feasible commitment is paid for.
fn knapsack_max(wu: &[f64], wp: &[f64], ub: &[f64], demand: f64) -> f64 {
    let mut total: f64 = wu.iter().map(|w| w.max(0.0)).sum();
    let mut items: Vec<(f64, f64)> = (0..ub.len())
        .filter(|&g| ub[g] > 0.0)
        .map(|g| (wp[g] + wu[g].min(0.0) / ub[g], ub[g]))
        .collect();
    items.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut left = demand;
    for (value, cap) in items {
        if left <= 0.0 {
            break;
        }
        let take = cap.min(left);
        total += value * take;
        left -= take;
    }
    total
}

/// Bounds valid for every feature vector a feasible schedule can produce in
/// one period: dispatch sums to `demand_pu`, at most one disturbance entry is
/// non-zero and it cannot exceed `min(p_max, demand)`. The first layer is
/// bounded exactly over that relaxation, deeper layers by intervals.
pub fn period_bounds(mlp: &Mlp, p_max_pu: &[f64], demand_pu: f64) -> Result<LayerBounds, EmbedError> {
    mlp.validate()?;
    let ng = p_max_pu.len();
    if mlp.input_dim() != 3 * ng {
        return Err(EmbedError::Dimension { expected: 3 * ng, got: mlp.input_dim() });
    }
    if !(demand_pu >= 0.0 && demand_pu <= p_max_pu.iter().sum::<f64>() + 1e-9) {
        return Err(EmbedError::BadBox { index: 2 * ng, lo: 0.0, hi: demand_pu });
    }
    let l0 = &mlp.layers[0];
    let mut first = Vec::with_capacity(l0.n_out);
    for j in 0..l0.n_out {
        let col = |block: usize| -> Vec<f64> { (0..ng).map(|g| l0.weight(block * ng + g, j)).collect() };
        let (wu, wxi, wp) = (col(0), col(1), col(2));
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
        let xi_hi = (0..ng).map(|g| wxi[g] * p_max_pu[g].min(demand_pu)).fold(0.0, f64::max);
        let xi_lo = (0..ng).map(|g| wxi[g] * p_max_pu[g].min(demand_pu)).fold(0.0, f64::min);
        let hi = l0.b[j] + knapsack_max(&wu, &wp, p_max_pu, demand_pu) + xi_hi;
        let lo = l0.b[j] - knapsack_max(&neg(&wu), &neg(&wp), p_max_pu, demand_pu) + xi_lo;
        first.push((lo, hi));
    }
    let mut pre = vec![first.clone()];
    if mlp.layers.len() > 1 {
        let post: Vec<(f64, f64)> = first.iter().map(|&(lo, hi)| (lo.max(0.0), hi.max(0.0))).collect();
        pre.extend(interval_layers(mlp, 1, post));
    }
    Ok(LayerBounds { pre })
}

/// Argmax gadget: `lam` selects a maximiser of `p`, `xi` carries its value
/// in the selected slot and zero elsewhere. `p_ub[g]` bounds `p[g]` above.
pub fn encode_disturbance(
    problem: &mut MilpProblem,
    p: &[VarId],
    p_ub: &[f64],
    period: usize,
) -> Result<(Vec<VarId>, Vec<VarId>), EmbedError> {
    let n = p.len();
    if p_ub.len() != n {
        return Err(EmbedError::Dimension { expected: n, got: p_ub.len() });
    }
    for (&v, &ub) in p.iter().zip(p_ub) {
        if !ub.is_finite() {
            return Err(EmbedError::Unbounded(problem.variable(v).name.clone()));
        }
    }
    let t = period + 1;
    let lam: Vec<VarId> = (0..n)
        .map(|g| problem.add_var(format!("lam_{t}_{}", g + 1), 0.0, 1.0, VarKind::Binary))
        .collect::<Result<_, _>>()?;
    let xi: Vec<VarId> = (0..n)
        .map(|g| problem.add_var(format!("xi_{t}_{}", g + 1), 0.0, p_ub[g].max(0.0), VarKind::Continuous))
        .collect::<Result<_, _>>()?;
    for g in 0..n {
        for rho in (0..n).filter(|&r| r != g) {
            let m = p_ub[rho];
            if m <= 0.0 {
                continue;
            }
            problem.add_constraint(
                format!("argmax_{t}_{}_{}", g + 1, rho + 1),
                &[(p[rho], 1.0), (p[g], -1.0), (lam[g], m)],
                Sense::Le,
                m,
            )?;
        }
    }
    let one: Vec<(VarId, f64)> = lam.iter().map(|&l| (l, 1.0)).collect();
    problem.add_constraint(format!("onehot_{t}"), &one, Sense::Eq, 1.0)?;
    for g in 0..n {
        let m = p_ub[g].max(0.0);
        problem.add_constraint(format!("xiup_{t}_{}", g + 1), &[(xi[g], 1.0), (p[g], -1.0), (lam[g], m)], Sense::Le, m)?;
        problem.add_constraint(format!("xidn_{t}_{}", g + 1), &[(p[g], 1.0), (xi[g], -1.0), (lam[g], m)], Sense::Le, m)?;
        problem.add_constraint(format!("xion_{t}_{}", g + 1), &[(xi[g], 1.0), (lam[g], -m)], Sense::Le, 0.0)?;
    }
    Ok((lam, xi))
}

#[derive(Debug, Clone)]
pub struct NetworkHandles {
    /// `[hidden layer][neuron]`.
    pub zhat: Vec<Vec<VarId>>,
    pub z: Vec<Vec<VarId>>,
    pub a: Vec<Vec<VarId>>,
    pub rhat: VarId,
}

/// Exact big-M ReLU encoding of `mlp` applied to the affine inputs `x`.
pub fn encode_network(
    problem: &mut MilpProblem,
    mlp: &Mlp,
    x: &[LinExpr],
    bounds: &LayerBounds,
    period: usize,
) -> Result<NetworkHandles, EmbedError> {
    mlp.validate()?;
    if x.len() != mlp.input_dim() {
        return Err(EmbedError::Dimension { expected: mlp.input_dim(), got: x.len() });
    }
    if bounds.pre.len() != mlp.layers.len() || bounds.pre.iter().zip(&mlp.layers).any(|(b, l)| b.len() != l.n_out) {
        return Err(EmbedError::Dimension { expected: mlp.layers.len(), got: bounds.pre.len() });
    }
    let t = period + 1;
    let last = mlp.layers.len() - 1;
    let mut inputs: Vec<LinExpr> = x.to_vec();
    let (mut zhat, mut zs, mut ais) = (Vec::new(), Vec::new(), Vec::new());
    for (k, l) in mlp.layers.iter().enumerate() {
        let li = k + 1;
        let mut pre_vars = Vec::with_capacity(l.n_out);
        for j in 0..l.n_out {
            let (lb, ub) = bounds.pre[k][j];
            let name = if k == last { format!("rhat_{t}") } else { format!("zh_{t}_{li}_{}", j + 1) };
            let v = problem.add_var(name, lb, ub, VarKind::Continuous)?;
            let mut e = LinExpr::term(v, 1.0);
            for (i, inp) in inputs.iter().enumerate() {
                let w = l.weight(i, j);
                if w != 0.0 {
                    e.add_scaled(inp, -w);
                }
            }
            e.add_constant(-l.b[j]);
            let row = if k == last { format!("out_{t}") } else { format!("aff_{t}_{li}_{}", j + 1) };
            problem.add_expr_constraint(row, &e, Sense::Eq, 0.0)?;
            pre_vars.push(v);
        }
        if k == last {
            return Ok(NetworkHandles { zhat, z: zs, a: ais, rhat: pre_vars[0] });
        }
        let mut z_layer = Vec::with_capacity(l.n_out);
        let mut a_layer = Vec::with_capacity(l.n_out);
        for j in 0..l.n_out {
            // Separate constants for the two sides of the kink; a neuron whose
            // interval does not straddle zero gets its indicator fixed.
            let (lb, ub) = bounds.pre[k][j];
            let (m_off, m_on) = ((-lb).max(0.0), ub.max(0.0));
            let tag = format!("{t}_{li}_{}", j + 1);
            let z = problem.add_var(format!("z_{tag}"), 0.0, m_on, VarKind::Continuous)?;
            let (a_lo, a_hi) = if lb >= 0.0 { (1.0, 1.0) } else if ub <= 0.0 { (0.0, 0.0) } else { (0.0, 1.0) };
            let a = problem.add_var(format!("a_{tag}"), a_lo, a_hi, VarKind::Binary)?;
            let zh = pre_vars[j];
            problem.add_constraint(format!("rlo_{tag}"), &[(z, 1.0), (zh, -1.0)], Sense::Ge, 0.0)?;
            problem.add_constraint(format!("rup_{tag}"), &[(z, 1.0), (zh, -1.0), (a, m_off)], Sense::Le, m_off)?;
            problem.add_constraint(format!("ron_{tag}"), &[(z, 1.0), (a, -m_on)], Sense::Le, 0.0)?;
            z_layer.push(z);
            a_layer.push(a);
        }
        inputs = z_layer.iter().map(|&z| LinExpr::var(z)).collect();
        zhat.push(pre_vars);
        zs.push(z_layer);
        ais.push(a_layer);
    }
    unreachable!("the output layer returns")
}

pub fn add_rocof_limit(problem: &mut MilpProblem, rhat: VarId, limit: f64, period: usize) -> Result<(), EmbedError> {
    problem.add_constraint(format!("rocofcap_{}", period + 1), &[(rhat, 1.0)], Sense::Le, limit)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EmbeddedPredictor {
    pub lambda: Vec<VarId>,
    pub xi: Vec<VarId>,
    pub network: NetworkHandles,
}

#[derive(Debug, Clone)]
pub struct DnnModel {
    pub uc: UcModel,
    pub blocks: Vec<EmbeddedPredictor>,
    /// Bounds over the whole feature box.
    pub bounds: LayerBounds,
    /// Bounds actually used in each period's encoding.
    pub period_bounds: Vec<LayerBounds>,
    /// RoCoF cap on every period's prediction, Hz/s.
    pub limit: f64,
}

/// Feature box used for big-M bounds: u ∈ [0, 1], disturbance and dispatch
/// in [0, p_max] per unit.
pub fn feature_box(case: &GridCase) -> Vec<(f64, f64)> {
    let base = case.system.system_base;
    let mut b: Vec<(f64, f64)> = vec![(0.0, 1.0); case.n_gens()];
    for _ in 0..2 {
        b.extend(case.generators.iter().map(|g| (0.0, g.p_max / base)));
    }
    b
}

/// Per-period layer bounds from [`period_bounds`], optionally tightened by
/// [`tighten_bounds`] when a solver is given.
pub fn dnn_period_bounds(case: &GridCase, mlp: &Mlp, solver: Option<&Solver>) -> Result<Vec<LayerBounds>, EmbedError> {
    let base = case.system.system_base;
    let p_max_pu: Vec<f64> = case.generators.iter().map(|g| g.p_max / base).collect();
    let p_min_pu: Vec<f64> = case.generators.iter().map(|g| g.p_min / base).collect();
    (0..case.n_periods())
        .map(|t| {
            let demand = case.net_load(t).max(0.0) / base;
            let b = period_bounds(mlp, &p_max_pu, demand)?;
            match solver {
                Some(s) => tighten_bounds(mlp, &p_min_pu, &p_max_pu, demand, &b, s),
                None => Ok(b),
            }
        })
        .collect()
}

/// Re-bounds every neuron by minimising and maximising its pre-activation
/// over the LP relaxation of one period: unit limits `p_min·u ≤ p ≤ p_max·u`,
/// `Σ p = demand`, the relaxed disturbance gadget and the relaxed ReLU
/// encoding of the earlier layers. A bound is only ever narrowed.
pub fn tighten_bounds(
    mlp: &Mlp,
    p_min_pu: &[f64],
    p_max_pu: &[f64],
    demand_pu: f64,
    initial: &LayerBounds,
    solver: &Solver,
) -> Result<LayerBounds, EmbedError> {
    // Margin for the LP solver's own tolerances.
    const SLACK: f64 = 1e-6;
    let ng = p_max_pu.len();
    if mlp.input_dim() != 3 * ng || p_min_pu.len() != ng {
        return Err(EmbedError::Dimension { expected: 3 * ng, got: mlp.input_dim() });
    }
    let mut bounds = initial.clone();
    let mut lp = MilpProblem::new("bounds");
    let u: Vec<VarId> = (0..ng).map(|g| lp.add_continuous(format!("u{g}"), 0.0, 1.0)).collect::<Result<_, _>>()?;
    let p: Vec<VarId> =
        (0..ng).map(|g| lp.add_continuous(format!("p{g}"), 0.0, p_max_pu[g].max(0.0))).collect::<Result<_, _>>()?;
    for g in 0..ng {
        lp.add_constraint(format!("up{g}"), &[(p[g], 1.0), (u[g], -p_max_pu[g])], Sense::Le, 0.0)?;
        lp.add_constraint(format!("dn{g}"), &[(p[g], 1.0), (u[g], -p_min_pu[g])], Sense::Ge, 0.0)?;
    }
    let all: Vec<(VarId, f64)> = p.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint("demand", &all, Sense::Eq, demand_pu)?;
    let (_, xi) = encode_disturbance(&mut lp, &p, p_max_pu, 0)?;
    let mut x: Vec<LinExpr> = u.iter().map(|&v| LinExpr::var(v)).collect();
    x.extend(xi.iter().chain(&p).map(|&v| LinExpr::var(v)));
    for k in 0..mlp.layers.len() {
        let mut relaxed = lp.clone();
        let net = encode_network(&mut relaxed, mlp, &x, &bounds, 0)?;
        let targets: Vec<VarId> = if k + 1 == mlp.layers.len() { vec![net.rhat] } else { net.zhat[k].clone() };
        let mut relaxed = relaxed.relaxed();
        for (j, &v) in targets.iter().enumerate() {
            let (mut lo, mut hi) = bounds.pre[k][j];
            for sign in [1.0, -1.0] {
                relaxed.set_objective(&[(v, sign)])?;
                let r = solver.solve(&relaxed)?;
                if let Some(obj) = r.objective.filter(|_| r.status.has_solution()) {
                    if sign > 0.0 {
                        lo = lo.max(obj - SLACK);
                    } else {
                        hi = hi.min(-obj + SLACK);
                    }
                }
            }
            bounds.pre[k][j] = (lo.min(hi), hi.max(lo));
        }
    }
    Ok(bounds)
}

/// Base SCUC plus one predictor block and RoCoF cap per period.
pub fn build_dnn_rcuc(case: &GridCase, mlp: &Mlp, limit: f64) -> Result<DnnModel, EmbedError> {
    let local = dnn_period_bounds(case, mlp, None)?;
    build_dnn_rcuc_with(case, mlp, limit, local)
}

/// As [`build_dnn_rcuc`] with caller-supplied bounds for each period.
pub fn build_dnn_rcuc_with(
    case: &GridCase,
    mlp: &Mlp,
    limit: f64,
    period_bounds: Vec<LayerBounds>,
) -> Result<DnnModel, EmbedError> {
    let ng = case.n_gens();
    if mlp.input_dim() != 3 * ng {
        return Err(EmbedError::Dimension { expected: 3 * ng, got: mlp.input_dim() });
    }
    if period_bounds.len() != case.n_periods() {
        return Err(EmbedError::Dimension { expected: case.n_periods(), got: period_bounds.len() });
    }
    let mut uc = build_uc(case)?;
    uc.problem.name = "scuc_dnn".into();
    let bounds = propagate_bounds(mlp, &feature_box(case))?;
    let base = case.system.system_base;
    let p_ub: Vec<f64> = case.generators.iter().map(|g| g.p_max).collect();
    let mut blocks = Vec::with_capacity(case.n_periods());
    for (t, local) in period_bounds.iter().enumerate() {
        log::debug!(
            "period {}: sum of big-M {:.1} (box {:.1})",
            t + 1,
            (0..local.pre.len() - 1).flat_map(|k| (0..local.pre[k].len()).map(move |j| (k, j))).map(|(k, j)| local.big_m(k, j)).sum::<f64>(),
            (0..bounds.pre.len() - 1).flat_map(|k| (0..bounds.pre[k].len()).map(move |j| (k, j))).map(|(k, j)| bounds.big_m(k, j)).sum::<f64>()
        );
        let p: Vec<VarId> = (0..ng).map(|g| uc.vars.p[g][t]).collect();
        let (lambda, xi) = encode_disturbance(&mut uc.problem, &p, &p_ub, t)?;
        let mut x: Vec<LinExpr> = (0..ng).map(|g| LinExpr::var(uc.vars.u[g][t])).collect();
        x.extend(xi.iter().map(|&v| LinExpr::term(v, 1.0 / base)));
        x.extend(p.iter().map(|&v| LinExpr::term(v, 1.0 / base)));
        let network = encode_network(&mut uc.problem, mlp, &x, local, t)?;
        add_rocof_limit(&mut uc.problem, network.rhat, limit, t)?;
        blocks.push(EmbeddedPredictor { lambda, xi, network });
    }
    Ok(DnnModel { uc, blocks, bounds, period_bounds, limit })
}

/// Complete variable vector of `model` for a known schedule, with the
/// predictor variables set by evaluating the network. Serves as a MIP start;
/// it is feasible whenever every period's prediction respects the cap.
pub fn start_point(model: &DnnModel, mlp: &Mlp, case: &GridCase, s: &Schedule) -> Result<Vec<f64>, EmbedError> {
    let mut x = schedule_point(&model.uc, s);
    let base = case.system.system_base;
    for (t, block) in model.blocks.iter().enumerate() {
        let u = s.commitment(t);
        let p = s.dispatch(t);
        let Some(g) = largest_unit(&u, &p) else { continue };
        for (k, (&l, &xi)) in block.lambda.iter().zip(&block.xi).enumerate() {
            x[l.0] = (k == g) as u8 as f64;
            x[xi.0] = if k == g { p[g] } else { 0.0 };
        }
        let mut act = build_features(&u, &p.iter().map(|v| v / base).collect::<Vec<_>>())?;
        let last = mlp.layers.len() - 1;
        for (li, layer) in mlp.layers.iter().enumerate() {
            let pre: Vec<f64> = (0..layer.n_out)
                .map(|j| layer.b[j] + act.iter().enumerate().map(|(i, a)| a * layer.weight(i, j)).sum::<f64>())
                .collect();
            if li == last {
                x[block.network.rhat.0] = pre[0];
                break;
            }
            for (j, &zh) in pre.iter().enumerate() {
                x[block.network.zhat[li][j].0] = zh;
                x[block.network.z[li][j].0] = zh.max(0.0);
                let stable_on = model.period_bounds[t].pre[li][j].0 >= 0.0;
                x[block.network.a[li][j].0] = (zh > 0.0 || stable_on) as u8 as f64;
            }
            act = pre.iter().map(|v| v.max(0.0)).collect();
        }
    }
    Ok(x)
}

/// Network prediction for every period of a schedule.
pub fn predict_schedule(mlp: &Mlp, case: &GridCase, s: &Schedule) -> Result<Vec<f64>, EmbedError> {
    let base = case.system.system_base;
    (0..s.n_periods())
        .map(|t| {
            let p: Vec<f64> = s.dispatch(t).iter().map(|x| x / base).collect();
            Ok(mlp.forward(&build_features(&s.commitment(t), &p)?)?)
        })
        .collect()
}

/// Settings of [`solve_dnn_rcuc`].
#[derive(Debug, Clone, PartialEq)]
pub struct DnnSearch {
    /// Passes of the period-by-period neighbourhood search; 0 disables it.
    pub sweeps: usize,
    /// Limit of one neighbourhood solve, seconds.
    pub neighbourhood_time_limit: Option<f64>,
    /// Limit of the final solve of the full model, seconds.
    pub time_limit: Option<f64>,
}

impl Default for DnnSearch {
    fn default() -> Self {
        Self { sweeps: 2, neighbourhood_time_limit: Some(30.0), time_limit: Some(120.0) }
    }
}

/// The model with commitment, disturbance selection and neuron indicators
/// of every period except `period` fixed at their values in `x`.
fn neighbourhood(model: &DnnModel, period: usize, x: &[f64]) -> Result<UcModel, EmbedError> {
    let mut sub = model.uc.clone();
    for (t, block) in model.blocks.iter().enumerate().filter(|&(t, _)| t != period) {
        let fixed = model.uc.vars.u.iter().map(|row| row[t]).chain(block.lambda.iter().copied());
        for v in fixed.chain(block.network.a.iter().flatten().copied()) {
            sub.problem.fix(v, x[v.0].round())?;
        }
    }
    Ok(sub)
}

/// Solves the DNN-RCUC model. The relaxation of the embedded network is
/// weak, so the full model is rarely closed in useful time from scratch.
/// Instead: the cheapest of `seeds` whose predictions respect the cap
/// becomes the incumbent, a neighbourhood search re-optimises one period at
/// a time with the rest held fixed, and the full model is then solved from
/// the result under `search.time_limit`. The returned gap is that of the
/// final solve.
pub fn solve_dnn_rcuc(
    model: &DnnModel,
    mlp: &Mlp,
    case: &GridCase,
    solver: &Solver,
    seeds: &[Schedule],
    search: &DnnSearch,
) -> Result<UcOutcome, EmbedError> {
    let mut log = Vec::new();
    let mut best: Option<(f64, Schedule)> = None;
    for s in seeds {
        let pred = predict_schedule(mlp, case, s)?;
        let cost = cost_breakdown(s, case).total;
        let ok = pred.iter().all(|&r| r <= model.limit);
        log.push(format!("seed cost {cost:.2}: max prediction {:.4}{}", pred.iter().cloned().fold(f64::MIN, f64::max), if ok { "" } else { " (rejected)" }));
        if ok && best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, s.clone()));
        }
    }
    if let Some((cost, s)) = best.as_mut() {
        let options = SolveOptions { time_limit: search.neighbourhood_time_limit, ..solver.options.clone() };
        for sweep in 0..search.sweeps {
            let mut improved = false;
            for t in 0..case.n_periods() {
                let x = start_point(model, mlp, case, s)?;
                let sub = neighbourhood(model, t, &x)?;
                let report = check_feasible(&sub.problem, &x, options.feasibility_tol)?;
                if !report.is_feasible() {
                    log::debug!("period {} start: {report}", t + 1);
                }
                let out = solve_model_with(&sub, case, solver, &SolveOptions { start: Some(x), ..options.clone() })?;
                if let (Some(obj), Some(sched)) = (out.objective, out.schedule) {
                    if obj < *cost - 1e-7 * cost.abs().max(1.0) {
                        log.push(format!("sweep {} period {}: {:.2} -> {obj:.2}", sweep + 1, t + 1, *cost));
                        *cost = obj;
                        *s = sched;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    let start = best.as_ref().map(|(_, s)| start_point(model, mlp, case, s)).transpose()?;
    let options = SolveOptions { time_limit: search.time_limit, start, ..solver.options.clone() };
    let mut out = solve_model_with(&model.uc, case, solver, &options)?;
    if let Some((cost, s)) = best {
        // Keep the incumbent when the final solve hands back nothing better.
        if out.objective.is_none_or(|o| o > cost) || out.schedule.is_none() {
            out.objective = Some(cost);
            out.schedule = Some(s);
            if !out.status.may_have_point() {
                out.status = SolveStatus::TimeLimit;
            }
        }
    }
    for line in &log {
        log::info!("{line}");
    }
    log.append(&mut out.diagnostics);
    out.diagnostics = log;
    Ok(out)
}
