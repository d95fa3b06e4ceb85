//! Post-contingency frequency behaviour: Laplacian, Kron reduction, modal
//! RoCoF expression and a nonlinear swing simulator.
//!
//! Angles are radians, powers per unit of the system base, inertia
//! coefficients p.u.·s². Frequency deviations are carried as rad/s and
//! reported in Hz.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::grid_model::GridCase;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("voltage at bus index {0} must be positive")]
    BadVoltage(usize),
    #[error("eliminated block is singular at bus index {0}")]
    SingularElimination(usize),
    #[error("retained set is empty or out of range")]
    BadRetainedSet,
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("mode {mode} is overdamped: lambda/m - gamma^2/4 = {value:e}")]
    Overdamped { mode: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("no pre-event equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("trajectory diverged at t = {0} s")]
    Divergent(f64),
    #[error("inertia must be positive (got {0})")]
    ZeroInertia(f64),
}

/// Full-network Laplacian with weights b·V_i·V_j.
pub fn build_laplacian(case: &GridCase, voltages: &[f64]) -> Result<DMatrix<f64>, DynamicsError> {
    let n = case.n_buses();
    if voltages.len() != n {
        return Err(DynamicsError::InvalidArgument(format!(
            "{} voltages for {n} buses",
            voltages.len()
        )));
    }
    if let Some(i) = voltages.iter().position(|&v| !(v > 0.0)) {
        return Err(DynamicsError::BadVoltage(i));
    }
    let mut l = DMatrix::zeros(n, n);
    for br in &case.branches {
        let (i, j) = (br.from_bus - 1, br.to_bus - 1);
        let w = br.susceptance_b * voltages[i] * voltages[j];
        l[(i, j)] -= w;
        l[(j, i)] -= w;
        l[(i, i)] += w;
        l[(j, j)] += w;
    }
    Ok(l)
}

/// Schur complement of `l` onto `retained`, with the maps needed to carry
/// injections and angles across the reduction.
#[derive(Debug, Clone)]
pub struct KronReduction {
    pub retained: Vec<usize>,
    pub eliminated: Vec<usize>,
    pub reduced: DMatrix<f64>,
    /// −L_re·L_ee⁻¹: P_red = P_r + injection_map·P_e.
    pub injection_map: DMatrix<f64>,
    /// L_ee⁻¹, used to recover eliminated angles.
    pub lee_inv: DMatrix<f64>,
    /// L_er.
    pub ler: DMatrix<f64>,
}

impl KronReduction {
    pub fn reduce_injections(&self, full: &[f64]) -> Vec<f64> {
        let pr = DVector::from_iterator(self.retained.len(), self.retained.iter().map(|&i| full[i]));
        let pe = DVector::from_iterator(self.eliminated.len(), self.eliminated.iter().map(|&i| full[i]));
        (pr + &self.injection_map * pe).iter().copied().collect()
    }

    /// Angles of eliminated buses from retained angles: L_ee⁻¹(P_e − L_er θ_r).
    pub fn eliminated_angles(&self, theta_r: &[f64], full_injections: &[f64]) -> Vec<f64> {
        let tr = DVector::from_column_slice(theta_r);
        let pe = DVector::from_iterator(
            self.eliminated.len(),
            self.eliminated.iter().map(|&i| full_injections[i]),
        );
        (&self.lee_inv * (pe - &self.ler * tr)).iter().copied().collect()
    }
}

fn submatrix(l: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| l[(rows[i], cols[j])])
}

pub fn kron_decompose(l: &DMatrix<f64>, retained: &[usize]) -> Result<KronReduction, DynamicsError> {
    let n = l.nrows();
    let mut keep = vec![false; n];
    for &r in retained {
        if r >= n || keep[r] {
            return Err(DynamicsError::BadRetainedSet);
        }
        keep[r] = true;
    }
    if retained.is_empty() {
        return Err(DynamicsError::BadRetainedSet);
    }
    let eliminated: Vec<usize> = (0..n).filter(|&i| !keep[i]).collect();
    let lrr = submatrix(l, retained, retained);
    if eliminated.is_empty() {
        return Ok(KronReduction {
            retained: retained.to_vec(),
            eliminated,
            reduced: lrr,
            injection_map: DMatrix::zeros(retained.len(), 0),
            lee_inv: DMatrix::zeros(0, 0),
            ler: DMatrix::zeros(0, retained.len()),
        });
    }
    let lre = submatrix(l, retained, &eliminated);
    let ler = submatrix(l, &eliminated, retained);
    let lee = submatrix(l, &eliminated, &eliminated);
    let lee_inv = match lee.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => {
            // Report the eliminated bus least tied to anything retained.
            let worst = (0..eliminated.len())
                .min_by(|&a, &b| lee[(a, a)].total_cmp(&lee[(b, b)]))
                .unwrap();
            return Err(DynamicsError::SingularElimination(eliminated[worst]));
        }
    };
    let injection_map = -(&lre * &lee_inv);
    let reduced = &lrr + &injection_map * &ler;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    Ok(KronReduction {
        retained: retained.to_vec(),
        eliminated,
        reduced,
        injection_map,
        lee_inv,
        ler,
    })
}

pub fn kron_reduce(l: &DMatrix<f64>, retained: &[usize]) -> Result<DMatrix<f64>, DynamicsError> {
    kron_decompose(l, retained).map(|k| k.reduced)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenStructure {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column a is the eigenvector of eigenvalue a.
    pub eigenvectors: DMatrix<f64>,
}

pub fn eigendecompose(l: &DMatrix<f64>) -> Result<EigenStructure, DynamicsError> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(DynamicsError::InvalidArgument("matrix must be square and non-empty".into()));
    }
    let scale = l.amax().max(1.0);
    let asym = (l - l.transpose()).amax();
    if asym > 1e-9 * scale {
        return Err(DynamicsError::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(l.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&a| eig.eigenvalues[a]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (k, &a) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(a).clone_owned();
        // Fix the sign so that the first clearly non-zero entry is positive.
        if let Some(&first) = col.iter().find(|x| x.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
        eigenvectors.set_column(k, &col);
    }
    Ok(EigenStructure {
        eigenvalues,
        eigenvectors,
    })
}

/// Windowed RoCoF magnitude per node for a step loss of `delta_p` at
/// `event_node`, homogeneous inertia `m` and damping ratio `gamma`.
///
/// Mode 0 is the mean-frequency drift; every other mode must be underdamped.
pub fn rocof_closed_form(
    eig: &EigenStructure,
    m: f64,
    gamma: f64,
    delta_p: f64,
    event_node: usize,
    t: f64,
    window: f64,
) -> Result<Vec<f64>, DynamicsError> {
    let n = eig.eigenvalues.len();
    if !(m > 0.0) {
        return Err(DynamicsError::ZeroInertia(m));
    }
    if !(window > 0.0) || event_node >= n || t < 0.0 {
        return Err(DynamicsError::InvalidArgument(format!(
            "window {window}, event node {event_node} of {n}, t {t}"
        )));
    }
    let mut rate = vec![0.0; n];
    let beta = &eig.eigenvectors;
    for a in 0..n {
        let bab = beta[(event_node, a)];
        let coef = if a == 0 {
            if gamma > 0.0 {
                (-gamma * t).exp() * (1.0 - (-gamma * window).exp()) / (gamma * window * m)
            } else {
                1.0 / m
            }
        } else {
            let disc = eig.eigenvalues[a] / m - gamma * gamma / 4.0;
            if !(disc > 0.0) {
                return Err(DynamicsError::Overdamped { mode: a, value: disc });
            }
            let w = disc.sqrt();
            let s = gamma / 2.0;
            ((-s * (t + window)).exp() * (w * (t + window)).sin() - (-s * t).exp() * (w * t).sin())
                / (m * w * window)
        };
        for i in 0..n {
            rate[i] += beta[(i, a)] * bab * coef;
        }
    }
    Ok(rate.iter().map(|r| (delta_p * r / (2.0 * PI)).abs()).collect())
}

/// Per-node maximum of [`rocof_closed_form`] over window starts `0, step, ..`
/// up to `horizon - window`.
pub fn rocof_closed_form_max(
    eig: &EigenStructure,
    m: f64,
    gamma: f64,
    delta_p: f64,
    event_node: usize,
    window: f64,
    horizon: f64,
    step: f64,
) -> Result<Vec<f64>, DynamicsError> {
    let n = eig.eigenvalues.len();
    let mut best = vec![0.0f64; n];
    let starts = ((horizon - window) / step).floor().max(0.0) as usize;
    for s in 0..=starts {
        let r = rocof_closed_form(eig, m, gamma, delta_p, event_node, s as f64 * step, window)?;
        for (b, x) in best.iter_mut().zip(r) {
            *b = b.max(x);
        }
    }
    Ok(best)
}

/// Uniform-frequency (centre of inertia) magnitude: ΔP·f_n / (2·ΣH·S).
pub fn equivalent_rocof(delta_p_mw: f64, kinetic_sum: f64, nominal_freq: f64) -> Result<f64, DynamicsError> {
    if !(kinetic_sum > 0.0) {
        return Err(DynamicsError::ZeroInertia(kinetic_sum));
    }
    Ok((delta_p_mw * nominal_freq / (2.0 * kinetic_sum)).abs())
}

/// Σ H_i·S_Bi over committed units, MW·s.
pub fn aggregate_inertia(commitment: &[bool], case: &GridCase) -> f64 {
    case.generators
        .iter()
        .zip(commitment)
        .filter(|(_, &on)| on)
        .map(|(g, _)| g.kinetic_energy())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedNetwork {
    /// Bus ids of the retained nodes.
    pub gen_buses: Vec<usize>,
    pub inertia_m: Vec<f64>,
    pub damping_ratio_gamma: f64,
    pub laplacian: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingEvent {
    /// Node index in the reduced network.
    pub node: usize,
    /// Injection lost, p.u.
    pub delta_p: f64,
    /// Inertia coefficient removed from the node.
    pub delta_m: f64,
    pub time: f64,
    /// Tripped generator id, for reporting.
    pub gen_id: Option<usize>,
    pub mw: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingTrajectory {
    pub gen_buses: Vec<usize>,
    pub time_grid: Vec<f64>,
    /// [step][node].
    pub theta: Vec<Vec<f64>>,
    pub omega_dev: Vec<Vec<f64>>,
    pub event: SwingEvent,
    pub event_index: usize,
    /// Set when the run was cut short.
    pub diverged_at: Option<f64>,
    /// Largest pre-event angle difference across coupled nodes.
    pub initial_spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocofReport {
    pub bus_ids: Vec<usize>,
    pub per_bus_rocof: Vec<f64>,
    pub highest_rocof: f64,
    pub highest_bus: usize,
    pub event_gen: Option<usize>,
    pub event_mw: f64,
}

fn coupling(l: &DMatrix<f64>) -> (DMatrix<f64>, Vec<(usize, usize)>) {
    let n = l.nrows();
    let b = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (-l[(i, j)]).max(0.0) });
    let bmax = b.amax();
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if b[(i, j)] > 1e-6 * bmax {
                pairs.push((i, j));
            }
        }
    }
    (b, pairs)
}

fn electrical_power(b: &DMatrix<f64>, theta: &[f64], out: &mut [f64], sc: &mut Vec<(f64, f64)>) {
    sc.clear();
    sc.extend(theta.iter().map(|t| t.sin_cos()));
    let n = theta.len();
    for i in 0..n {
        let (si, ci) = sc[i];
        let mut acc = 0.0;
        for j in 0..n {
            let bij = b[(i, j)];
            if bij != 0.0 {
                let (sj, cj) = sc[j];
                acc += bij * (si * cj - ci * sj);
            }
        }
        out[i] = acc;
    }
}

fn max_spread(theta: &[f64], pairs: &[(usize, usize)]) -> f64 {
    pairs
        .iter()
        .map(|&(i, j)| (theta[i] - theta[j]).abs())
        .fold(0.0, f64::max)
}

/// Newton solve of P_i = Σ_j b_ij sin(θ_i − θ_j) with θ_0 = 0, from the DC guess.
pub fn equilibrium(l: &DMatrix<f64>, injections: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    let n = l.nrows();
    if n == 1 {
        return Ok(vec![0.0]);
    }
    let (b, pairs) = coupling(l);
    let sub = l.view((1, 1), (n - 1, n - 1)).clone_owned();
    let rhs = DVector::from_column_slice(&injections[1..]);
    let lu = sub.lu();
    let dc = lu
        .solve(&rhs)
        .ok_or_else(|| DynamicsError::NoEquilibrium("reduced Laplacian is singular".into()))?;
    let mut theta = vec![0.0; n];
    theta[1..].copy_from_slice(dc.as_slice());
    let mut pe = vec![0.0; n];
    let mut sc = Vec::new();
    for _ in 0..50 {
        electrical_power(&b, &theta, &mut pe, &mut sc);
        let mismatch: Vec<f64> = (1..n).map(|i| injections[i] - pe[i]).collect();
        let err = mismatch.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if err < 1e-12 {
            let spread = max_spread(&theta, &pairs);
            if spread >= PI / 2.0 {
                return Err(DynamicsError::NoEquilibrium(format!("angle spread {spread:.3} rad")));
            }
            return Ok(theta);
        }
        let jac = DMatrix::from_fn(n - 1, n - 1, |r, c| {
            let (i, k) = (r + 1, c + 1);
            if i == k {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| b[(i, j)] * (theta[i] - theta[j]).cos())
                    .sum()
            } else {
                -b[(i, k)] * (theta[i] - theta[k]).cos()
            }
        });
        let step = jac
            .lu()
            .solve(&DVector::from_vec(mismatch))
            .ok_or_else(|| DynamicsError::NoEquilibrium("singular Jacobian".into()))?;
        for (t, d) in theta[1..].iter_mut().zip(step.iter()) {
            *t += d;
        }
        if theta.iter().any(|t| !t.is_finite()) {
            break;
        }
    }
    Err(DynamicsError::NoEquilibrium("Newton iteration did not converge".into()))
}

struct Stage<'a> {
    b: &'a DMatrix<f64>,
    p: &'a [f64],
    m: &'a [f64],
    gamma: f64,
    active: &'a [usize],
}

impl Stage<'_> {
    /// Derivatives for the active subset; `x` = [θ; ω] of active nodes.
    fn deriv(&self, x: &[f64], dx: &mut [f64], pe: &mut [f64], sc: &mut Vec<(f64, f64)>) {
        let k = self.active.len();
        electrical_power(self.b, &x[..k], pe, sc);
        for i in 0..k {
            dx[i] = x[k + i];
            dx[k + i] = (self.p[i] - pe[i]) / self.m[i] - self.gamma * x[k + i];
        }
    }
}

/// Classic RK4 integration of m θ̈ + γ m θ̇ = P − Σ b sin(θ_i − θ_j), starting
/// from the pre-event equilibrium. At the event time the node loses
/// `delta_p` and `delta_m`; a node left without inertia is Kron-eliminated
/// and its angle and frequency follow the remaining nodes algebraically.
pub fn simulate_swing(
    net: &ReducedNetwork,
    injections: &[f64],
    event: &SwingEvent,
    horizon: f64,
    step: f64,
) -> Result<SwingTrajectory, DynamicsError> {
    let n = net.gen_buses.len();
    if injections.len() != n || net.inertia_m.len() != n || net.laplacian.nrows() != n {
        return Err(DynamicsError::InvalidArgument("dimension mismatch".into()));
    }
    if !(step > 0.0) || !(horizon > 0.0) || event.node >= n {
        return Err(DynamicsError::InvalidArgument(format!(
            "step {step}, horizon {horizon}, event node {}",
            event.node
        )));
    }
    if let Some(&m) = net.inertia_m.iter().find(|&&m| !(m > 0.0)) {
        return Err(DynamicsError::ZeroInertia(m));
    }
    let imbalance: f64 = injections.iter().sum();
    let scale = injections.iter().fold(1.0f64, |a, p| a.max(p.abs()));
    if imbalance.abs() > 1e-6 * scale {
        return Err(DynamicsError::NoEquilibrium(format!("injections unbalanced by {imbalance:e} p.u.")));
    }
    let mut p0 = injections.to_vec();
    for p in &mut p0 {
        *p -= imbalance / n as f64;
    }
    let theta0 = equilibrium(&net.laplacian, &p0)?;
    let (b_full, pairs_full) = coupling(&net.laplacian);
    let initial_spread = max_spread(&theta0, &pairs_full);

    let steps = (horizon / step).round() as usize;
    let event_step = ((event.time / step).round() as usize).min(steps);
    let mut time_grid = Vec::with_capacity(steps + 1);
    let mut theta_hist = Vec::with_capacity(steps + 1);
    let mut omega_hist = Vec::with_capacity(steps + 1);

    let mut active: Vec<usize> = (0..n).collect();
    let mut b = b_full.clone();
    let mut pairs = pairs_full.clone();
    let mut p = p0.clone();
    let mut m = net.inertia_m.clone();
    // Algebraic node after an elimination: (index, weights over active, angle offset).
    let mut passive: Option<(usize, Vec<f64>, f64)> = None;

    let mut x: Vec<f64> = theta0.iter().copied().chain(std::iter::repeat_n(0.0, n)).collect();
    let mut diverged_at = None;
    let mut pe = vec![0.0; n];
    let mut sc = Vec::with_capacity(n);
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n], vec![0.0; 2 * n]);
    let mut tmp = vec![0.0; 2 * n];

    let record = |x: &[f64], active: &[usize], passive: &Option<(usize, Vec<f64>, f64)>| {
        let k = active.len();
        let mut th = vec![0.0; n];
        let mut om = vec![0.0; n];
        for (a, &i) in active.iter().enumerate() {
            th[i] = x[a];
            om[i] = x[k + a];
        }
        if let Some((e, w, off)) = passive {
            th[*e] = off + w.iter().zip(&x[..k]).map(|(w, t)| w * t).sum::<f64>();
            om[*e] = w.iter().zip(&x[k..2 * k]).map(|(w, o)| w * o).sum::<f64>();
        }
        (th, om)
    };

    for s in 0..=steps {
        if s == event_step {
            let e = event.node;
            m[e] -= event.delta_m;
            p[e] -= event.delta_p;
            if m[e] <= 1e-9 * net.inertia_m.iter().fold(0.0f64, |a, &v| a.max(v)) {
                if n == 1 {
                    return Err(DynamicsError::InvalidArgument("event removes the only node".into()));
                }
                let keep: Vec<usize> = (0..n).filter(|&i| i != e).collect();
                let kr = kron_decompose(&net.laplacian, &keep)?;
                let pr = kr.reduce_injections(&p);
                let lee = net.laplacian[(e, e)];
                let offset = p[e] / lee;
                let w: Vec<f64> = keep.iter().map(|&j| -net.laplacian[(e, j)] / lee).collect();
                let k = keep.len();
                let mut nx = vec![0.0; 2 * k];
                for (a, &i) in keep.iter().enumerate() {
                    nx[a] = x[i];
                    nx[k + a] = x[n + i];
                }
                x = nx;
                let (bk, pk) = coupling(&kr.reduced);
                b = bk;
                pairs = pk;
                p = pr;
                m = keep.iter().map(|&i| m[i]).collect();
                passive = Some((e, w, offset));
                active = keep;
                k1.truncate(2 * k);
                k2.truncate(2 * k);
                k3.truncate(2 * k);
                k4.truncate(2 * k);
                tmp.truncate(2 * k);
            }
        }
        let (th, om) = record(&x, &active, &passive);
        time_grid.push(s as f64 * step);
        theta_hist.push(th);
        omega_hist.push(om);
        if s == steps {
            break;
        }

        let k = active.len();
        let stage = Stage { b: &b, p: &p, m: &m, gamma: net.damping_ratio_gamma, active: &active };
        stage.deriv(&x, &mut k1, &mut pe, &mut sc);
        for i in 0..2 * k {
            tmp[i] = x[i] + 0.5 * step * k1[i];
        }
        stage.deriv(&tmp, &mut k2, &mut pe, &mut sc);
        for i in 0..2 * k {
            tmp[i] = x[i] + 0.5 * step * k2[i];
        }
        stage.deriv(&tmp, &mut k3, &mut pe, &mut sc);
        for i in 0..2 * k {
            tmp[i] = x[i] + step * k3[i];
        }
        stage.deriv(&tmp, &mut k4, &mut pe, &mut sc);
        for i in 0..2 * k {
            x[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) || max_spread(&x[..k], &pairs) > PI {
            diverged_at = Some((s + 1) as f64 * step);
            break;
        }
    }

    Ok(SwingTrajectory {
        gen_buses: net.gen_buses.clone(),
        time_grid,
        theta: theta_hist,
        omega_dev: omega_hist,
        event: event.clone(),
        event_index: event_step,
        diverged_at,
        initial_spread,
    })
}

/// Max over post-event window starts of |f(t+Δt) − f(t)|/Δt, per node.
pub fn measure_rocof(
    traj: &SwingTrajectory,
    window: f64,
    nominal_freq: f64,
) -> Result<RocofReport, DynamicsError> {
    if let Some(t) = traj.diverged_at {
        return Err(DynamicsError::Divergent(t));
    }
    let steps = traj.time_grid.len();
    if steps < 2 {
        return Err(DynamicsError::InvalidArgument("trajectory too short".into()));
    }
    let dt = traj.time_grid[1] - traj.time_grid[0];
    let k = (window / dt).round() as usize;
    if k < 2 {
        return Err(DynamicsError::InvalidArgument(format!(
            "window {window} s spans fewer than 2 steps of {dt} s"
        )));
    }
    let n = traj.gen_buses.len();
    let mut per_bus = vec![0.0f64; n];
    let to_hz = |w: f64| nominal_freq + w / (2.0 * PI);
    let span = k as f64 * dt;
    for s in traj.event_index..steps.saturating_sub(k) {
        let (a, b) = (&traj.omega_dev[s], &traj.omega_dev[s + k]);
        for i in 0..n {
            let r = ((to_hz(b[i]) - to_hz(a[i])) / span).abs();
            per_bus[i] = per_bus[i].max(r);
        }
    }
    let (hi, &highest) = per_bus
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .unwrap_or((0, &0.0));
    Ok(RocofReport {
        bus_ids: traj.gen_buses.clone(),
        per_bus_rocof: per_bus,
        highest_rocof: highest,
        highest_bus: traj.gen_buses.get(hi).copied().unwrap_or(0),
        event_gen: traj.event.gen_id,
        event_mw: traj.event.mw,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsOptions {
    pub window: f64,
    pub step: f64,
    pub horizon: f64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            window: 0.5,
            step: 1e-3,
            horizon: 5.0,
        }
    }
}

/// Reduced network and balanced injections for one period of a dispatch.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub net: ReducedNetwork,
    pub injections: Vec<f64>,
    /// Reduced-node index of every committed generator (None when off).
    pub node_of_gen: Vec<Option<usize>>,
}

/// Builds the swing model of period `t`: retained nodes are the buses with a
/// committed unit, loads and renewables are carried onto them by the Kron map.
pub fn operating_point(
    case: &GridCase,
    commitment: &[bool],
    dispatch_mw: &[f64],
    t: usize,
) -> Result<OperatingPoint, DynamicsError> {
    let ng = case.n_gens();
    if commitment.len() != ng || dispatch_mw.len() != ng {
        return Err(DynamicsError::InvalidArgument("commitment/dispatch length".into()));
    }
    let base = case.system.system_base;
    let nb = case.n_buses();
    let mut full = vec![0.0; nb];
    let mut m_bus = vec![0.0; nb];
    for (b, fb) in full.iter_mut().enumerate() {
        *fb = (case.bus_res(b, t) - case.bus_load(b, t)) / base;
    }
    for (gi, g) in case.generators.iter().enumerate() {
        if commitment[gi] {
            full[g.bus - 1] += dispatch_mw[gi] / base;
            m_bus[g.bus - 1] += case.inertia_coefficient(gi);
        }
    }
    let retained: Vec<usize> = (0..nb).filter(|&b| m_bus[b] > 0.0).collect();
    if retained.is_empty() {
        return Err(DynamicsError::InvalidArgument("no committed generator".into()));
    }
    let l = build_laplacian(case, &vec![1.0; nb])?;
    let kr = kron_decompose(&l, &retained)?;
    let injections = kr.reduce_injections(&full);
    let node_of_gen = case
        .generators
        .iter()
        .enumerate()
        .map(|(gi, g)| {
            commitment[gi]
                .then(|| retained.iter().position(|&b| b == g.bus - 1))
                .flatten()
        })
        .collect();
    Ok(OperatingPoint {
        net: ReducedNetwork {
            gen_buses: retained.iter().map(|b| b + 1).collect(),
            inertia_m: retained.iter().map(|&b| m_bus[b]).collect(),
            damping_ratio_gamma: case.system.gamma,
            laplacian: kr.reduced,
        },
        injections,
        node_of_gen,
    })
}

/// Trips the committed units in `tripped` (all on one bus) at t = 0 and
/// reports the windowed locational RoCoF.
pub fn contingency_rocof(
    case: &GridCase,
    commitment: &[bool],
    dispatch_mw: &[f64],
    t: usize,
    tripped: &[usize],
    options: &DynamicsOptions,
) -> Result<(RocofReport, SwingTrajectory), DynamicsError> {
    contingency_rocof_sized(case, commitment, dispatch_mw, t, tripped, None, options)
}

/// As [`contingency_rocof`], with the lost power set to `delta_mw` instead of
/// the tripped units' dispatch when given.
pub fn contingency_rocof_sized(
    case: &GridCase,
    commitment: &[bool],
    dispatch_mw: &[f64],
    t: usize,
    tripped: &[usize],
    delta_mw: Option<f64>,
    options: &DynamicsOptions,
) -> Result<(RocofReport, SwingTrajectory), DynamicsError> {
    let op = operating_point(case, commitment, dispatch_mw, t)?;
    let Some(&first) = tripped.first() else {
        return Err(DynamicsError::InvalidArgument("no tripped unit".into()));
    };
    let node = op.node_of_gen[first]
        .ok_or_else(|| DynamicsError::InvalidArgument(format!("generator {} is not committed", first + 1)))?;
    let mut mw = 0.0;
    let mut dm = 0.0;
    for &g in tripped {
        if op.node_of_gen[g] != Some(node) {
            return Err(DynamicsError::InvalidArgument("tripped units must share a bus".into()));
        }
        mw += dispatch_mw[g];
        dm += case.inertia_coefficient(g);
    }
    if let Some(d) = delta_mw {
        if !d.is_finite() {
            return Err(DynamicsError::InvalidArgument(format!("event size {d} MW")));
        }
        mw = d;
    }
    let event = SwingEvent {
        node,
        delta_p: mw / case.system.system_base,
        delta_m: dm.min(op.net.inertia_m[node]),
        time: 0.0,
        gen_id: Some(first + 1),
        mw,
    };
    let traj = simulate_swing(&op.net, &op.injections, &event, options.horizon, options.step)?;
    let report = measure_rocof(&traj, options.window, case.system.nominal_freq)?;
    Ok((report, traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(n: usize, edges: &[(usize, usize, f64)]) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(n, n);
        for &(i, j, w) in edges {
            l[(i, j)] -= w;
            l[(j, i)] -= w;
            l[(i, i)] += w;
            l[(j, j)] += w;
        }
        l
    }

    #[test]
    fn chain_reduction_is_series_combination() {
        let l = lap(3, &[(0, 1, 10.0), (1, 2, 10.0)]);
        let r = kron_reduce(&l, &[0, 2]).unwrap();
        assert!((r[(0, 1)] + 5.0).abs() < 1e-12);
        assert!((r[(0, 0)] - 5.0).abs() < 1e-12);
        assert_eq!(kron_reduce(&l, &[0, 1, 2]).unwrap(), l);
    }

    #[test]
    fn isolated_passive_bus_is_reported() {
        let l = lap(3, &[(0, 1, 1.0)]);
        assert_eq!(kron_reduce(&l, &[0, 1]), Err(DynamicsError::SingularElimination(2)));
    }

    #[test]
    fn complete_graph_spectrum() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((i, j, 1.0));
            }
        }
        let e = eigendecompose(&lap(4, &edges)).unwrap();
        let expect = [0.0, 4.0, 4.0, 4.0];
        for (a, b) in e.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut l = lap(2, &[(0, 1, 1.0)]);
        l[(0, 1)] = -2.0;
        assert!(matches!(eigendecompose(&l), Err(DynamicsError::NotSymmetric(_))));
    }

    #[test]
    fn equivalent_rocof_arithmetic() {
        assert!((equivalent_rocof(100.0, 6000.0, 60.0).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(equivalent_rocof(0.0, 6000.0, 60.0).unwrap(), 0.0);
        assert_eq!(
            equivalent_rocof(100.0, 12000.0, 60.0).unwrap(),
            equivalent_rocof(100.0, 6000.0, 60.0).unwrap() / 2.0
        );
        assert!(equivalent_rocof(1.0, 0.0, 60.0).is_err());
    }

    #[test]
    fn closed_form_linear_in_delta_p() {
        let e = eigendecompose(&lap(3, &[(0, 1, 10.0), (1, 2, 8.0), (0, 2, 5.0)])).unwrap();
        let a = rocof_closed_form(&e, 0.05, 0.5, 0.1, 0, 0.2, 0.5).unwrap();
        let b = rocof_closed_form(&e, 0.05, 0.5, 0.2, 0, 0.2, 0.5).unwrap();
        let z = rocof_closed_form(&e, 0.05, 0.5, 0.0, 0, 0.2, 0.5).unwrap();
        for i in 0..3 {
            assert_eq!(b[i], 2.0 * a[i]);
            assert_eq!(z[i], 0.0);
        }
    }

    #[test]
    fn overdamped_mode_reported() {
        let e = eigendecompose(&lap(2, &[(0, 1, 0.001)])).unwrap();
        assert!(matches!(
            rocof_closed_form(&e, 1.0, 0.5, 0.1, 0, 0.0, 0.5),
            Err(DynamicsError::Overdamped { mode: 1, .. })
        ));
    }

    #[test]
    fn ramp_measured() {
        let dt = 1e-3;
        let n = 2001;
        let omega: Vec<Vec<f64>> = (0..n).map(|s| vec![-0.5 * 2.0 * PI * s as f64 * dt, 0.0]).collect();
        let traj = SwingTrajectory {
            gen_buses: vec![1, 2],
            time_grid: (0..n).map(|s| s as f64 * dt).collect(),
            theta: vec![vec![0.0; 2]; n],
            omega_dev: omega,
            event: SwingEvent { node: 0, delta_p: 0.0, delta_m: 0.0, time: 0.0, gen_id: None, mw: 0.0 },
            event_index: 0,
            diverged_at: None,
            initial_spread: 0.0,
        };
        let r = measure_rocof(&traj, 0.5, 60.0).unwrap();
        assert!((r.per_bus_rocof[0] - 0.5).abs() < 1e-9);
        assert_eq!(r.per_bus_rocof[1], 0.0);
        assert_eq!(r.highest_bus, 1);
        assert!(measure_rocof(&traj, 0.001, 60.0).is_err());
    }

    #[test]
    fn fixed_point_stays_put() {
        let l = lap(3, &[(0, 1, 10.0), (1, 2, 8.0), (0, 2, 5.0)]);
        let net = ReducedNetwork {
            gen_buses: vec![1, 2, 3],
            inertia_m: vec![0.05, 0.04, 0.06],
            damping_ratio_gamma: 0.5,
            laplacian: l,
        };
        let p = [0.6, -0.2, -0.4];
        let ev = SwingEvent { node: 0, delta_p: 0.0, delta_m: 0.0, time: 0.0, gen_id: None, mw: 0.0 };
        let traj = simulate_swing(&net, &p, &ev, 10.0, 1e-3).unwrap();
        let first = &traj.theta[0];
        for th in &traj.theta {
            for (a, b) in th.iter().zip(first) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
