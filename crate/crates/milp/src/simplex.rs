//! Dense bounded-variable primal simplex.
//!
//! Rows are brought to `a·x + s = b` with one slack per row whose bounds
//! encode the sense (`<=`: s ≥ 0, `>=`: s ≤ 0, `=`: s = 0). Phase one
//! minimises the sum of artificials added only where no slack can absorb
//! the initial residual. The full tableau `B⁻¹[A | I | art | b]` is kept
//! dense, so this is meant for desk-scale models.

use crate::problem::{MilpProblem, Sense};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-7;
const DEGENERATE_SWITCH: usize = 50;
const REFRESH_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    Free,
}

struct Tableau {
    m: usize,
    ncol: usize,
    /// Row-major m × (ncol + 1); the last column holds B⁻¹b.
    t: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    value: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.ncol + 1) + j]
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        self.recompute_reduced();
    }

    fn recompute_reduced(&mut self) {
        let w = self.ncol + 1;
        let mut d = self.cost.clone();
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..i * w + self.ncol];
                for (dj, &a) in d.iter_mut().zip(row) {
                    *dj -= cb * a;
                }
            }
        }
        for i in 0..self.m {
            d[self.basis[i]] = 0.0;
        }
        self.reduced = d;
    }

    /// Recomputes basic values from B⁻¹b and the nonbasic values.
    fn refresh_basic_values(&mut self) {
        let w = self.ncol + 1;
        let nonbasic: Vec<(usize, f64)> = (0..self.ncol)
            .filter(|&j| self.status[j] != Status::Basic && self.value[j] != 0.0)
            .map(|j| (j, self.value[j]))
            .collect();
        for i in 0..self.m {
            let row = &self.t[i * w..(i + 1) * w];
            let mut v = row[self.ncol];
            for &(j, xj) in &nonbasic {
                v -= row[j] * xj;
            }
            self.value[self.basis[i]] = v;
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.ncol + 1;
        let p = self.at(r, j);
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for a in row.iter_mut() {
                *a /= p;
            }
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * w + j];
            if f != 0.0 {
                let row = &mut self.t[i * w..(i + 1) * w];
                for (a, &pr) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let dj = self.reduced[j];
        if dj != 0.0 {
            for (d, &pr) in self.reduced.iter_mut().zip(&pivot_row[..self.ncol]) {
                *d -= dj * pr;
            }
            self.reduced[j] = 0.0;
        }
    }

    /// Runs simplex iterations for the current cost vector.
    fn optimise(&mut self, max_iter: usize) -> Result<(), LpOutcome> {
        let mut degenerate_run = 0usize;
        for iter in 0..max_iter {
            if iter % REFRESH_EVERY == REFRESH_EVERY - 1 {
                self.refresh_basic_values();
                self.recompute_reduced();
            }
            let bland = degenerate_run > DEGENERATE_SWITCH;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.ncol {
                let st = self.status[j];
                if st == Status::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let d = self.reduced[j];
                let dir = match st {
                    Status::AtLower if d < -COST_TOL => 1.0,
                    Status::AtUpper if d > COST_TOL => -1.0,
                    Status::Free if d.abs() > COST_TOL => -d.signum(),
                    _ => continue,
                };
                match entering {
                    None => entering = Some((j, dir)),
                    Some((k, _)) if !bland && d.abs() > self.reduced[k].abs() => {
                        entering = Some((j, dir))
                    }
                    _ => {}
                }
                if bland {
                    break;
                }
            }
            let Some((j, dir)) = entering else {
                return Ok(());
            };

            let mut step = self.upper[j] - self.lower[j];
            let mut leave: Option<(usize, f64, f64)> = None; // (row, |alpha|, bound)
            for i in 0..self.m {
                let alpha = self.at(i, j) * dir;
                let k = self.basis[i];
                let (limit, bound) = if alpha > PIVOT_TOL && self.lower[k].is_finite() {
                    ((self.value[k] - self.lower[k]) / alpha, self.lower[k])
                } else if alpha < -PIVOT_TOL && self.upper[k].is_finite() {
                    ((self.upper[k] - self.value[k]) / -alpha, self.upper[k])
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < step,
                    Some((r, a, _)) => {
                        if bland {
                            limit < step - 1e-12
                                || (limit <= step + 1e-12 && self.basis[i] < self.basis[r])
                        } else {
                            limit < step - 1e-12 || (limit <= step + 1e-12 && alpha.abs() > a)
                        }
                    }
                };
                if better {
                    step = limit;
                    leave = Some((i, alpha.abs(), bound));
                }
            }
            if !step.is_finite() {
                return Err(LpOutcome::Unbounded);
            }
            degenerate_run = if step < 1e-12 { degenerate_run + 1 } else { 0 };

            self.value[j] += dir * step;
            for i in 0..self.m {
                let a = self.at(i, j);
                if a != 0.0 {
                    let k = self.basis[i];
                    self.value[k] -= dir * step * a;
                }
            }
            match leave {
                None => {
                    // Bound flip.
                    self.status[j] = if dir > 0.0 {
                        self.value[j] = self.upper[j];
                        Status::AtUpper
                    } else {
                        self.value[j] = self.lower[j];
                        Status::AtLower
                    };
                }
                Some((r, _, bound)) => {
                    let k = self.basis[r];
                    self.value[k] = bound;
                    self.status[k] = if bound == self.lower[k] {
                        Status::AtLower
                    } else {
                        Status::AtUpper
                    };
                    self.status[j] = Status::Basic;
                    self.basis[r] = j;
                    self.pivot(r, j);
                }
            }
        }
        Err(LpOutcome::IterationLimit)
    }
}

fn initial_value(lower: f64, upper: f64) -> (f64, Status) {
    if lower.is_finite() {
        (lower, Status::AtLower)
    } else if upper.is_finite() {
        (upper, Status::AtUpper)
    } else {
        (0.0, Status::Free)
    }
}

/// Solves the LP relaxation of `problem` with the given variable bounds.
pub fn solve_lp(problem: &MilpProblem, lower: &[f64], upper: &[f64]) -> LpOutcome {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return LpOutcome::Infeasible;
    }

    let mut value = vec![0.0; n + m];
    let mut status = vec![Status::AtLower; n + m];
    for j in 0..n {
        let (v, st) = initial_value(lower[j], upper[j]);
        value[j] = v;
        status[j] = st;
    }

    // Residuals decide where an artificial is needed.
    let rows = problem.constraints();
    let mut art_rows = Vec::new();
    let mut slack_lower = vec![0.0; m];
    let mut slack_upper = vec![0.0; m];
    let mut diag = vec![1.0; m];
    for (i, c) in rows.iter().enumerate() {
        let (sl, su) = match c.sense {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        slack_lower[i] = sl;
        slack_upper[i] = su;
        let r = c.rhs - c.activity(&value[..n]);
        if r >= sl - 1e-12 && r <= su + 1e-12 {
            value[n + i] = r.clamp(sl, su);
            status[n + i] = Status::Basic;
        } else {
            value[n + i] = 0.0;
            status[n + i] = if sl == 0.0 {
                Status::AtLower
            } else {
                Status::AtUpper
            };
            diag[i] = if r > 0.0 { 1.0 } else { -1.0 };
            art_rows.push(i);
        }
    }
    let n_art = art_rows.len();
    let ncol = n + m + n_art;
    let w = ncol + 1;

    let mut t = vec![0.0; m * w];
    let mut basis = vec![0usize; m];
    let mut lo = Vec::with_capacity(ncol);
    let mut up = Vec::with_capacity(ncol);
    lo.extend_from_slice(lower);
    up.extend_from_slice(upper);
    lo.extend_from_slice(&slack_lower);
    up.extend_from_slice(&slack_upper);
    lo.extend(std::iter::repeat_n(0.0, n_art));
    up.extend(std::iter::repeat_n(f64::INFINITY, n_art));
    value.extend(std::iter::repeat_n(0.0, n_art));
    status.extend(std::iter::repeat_n(Status::Basic, n_art));

    let mut art_of_row = vec![None; m];
    for (a, &i) in art_rows.iter().enumerate() {
        art_of_row[i] = Some(n + m + a);
    }
    for (i, c) in rows.iter().enumerate() {
        let d = diag[i];
        let row = &mut t[i * w..(i + 1) * w];
        for &(v, coef) in &c.terms {
            row[v.0] = coef / d;
        }
        row[n + i] = 1.0 / d;
        row[ncol] = c.rhs / d;
        match art_of_row[i] {
            Some(col) => {
                row[col] = 1.0;
                basis[i] = col;
            }
            None => basis[i] = n + i,
        }
    }

    let mut tab = Tableau {
        m,
        ncol,
        t,
        lower: lo,
        upper: up,
        value,
        status,
        basis,
        cost: Vec::new(),
        reduced: Vec::new(),
    };
    tab.refresh_basic_values();
    let max_iter = 200 * (m + ncol) + 10_000;

    if n_art > 0 {
        let mut c1 = vec![0.0; ncol];
        for c in c1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        tab.set_cost(c1);
        if let Err(outcome) = tab.optimise(max_iter) {
            return match outcome {
                LpOutcome::Unbounded => LpOutcome::Infeasible,
                other => other,
            };
        }
        tab.refresh_basic_values();
        let infeasibility: f64 = (n + m..ncol).map(|j| tab.value[j].abs()).sum();
        let scale = 1.0 + rows.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if infeasibility > PHASE1_TOL * scale {
            return LpOutcome::Infeasible;
        }
        for j in n + m..ncol {
            tab.upper[j] = 0.0;
            if tab.status[j] != Status::Basic {
                tab.value[j] = 0.0;
                tab.status[j] = Status::AtLower;
            }
        }
    }

    let mut c2 = vec![0.0; ncol];
    for &(v, coef) in problem.objective() {
        c2[v.0] = coef;
    }
    tab.set_cost(c2);
    if let Err(outcome) = tab.optimise(max_iter) {
        return outcome;
    }
    tab.refresh_basic_values();
    let mut values: Vec<f64> = tab.value[..n].to_vec();
    for (j, x) in values.iter_mut().enumerate() {
        // Snap tiny bound drift.
        if (*x - lower[j]).abs() < 1e-11 {
            *x = lower[j];
        } else if (*x - upper[j]).abs() < 1e-11 {
            *x = upper[j];
        }
    }
    let objective = problem.objective_value(&values);
    LpOutcome::Optimal { values, objective }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::VarKind;

    fn bounds(p: &MilpProblem) -> (Vec<f64>, Vec<f64>) {
        (
            p.variables().iter().map(|v| v.lower).collect(),
            p.variables().iter().map(|v| v.upper).collect(),
        )
    }

    #[test]
    fn textbook_lp() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let mut p = MilpProblem::new("wyndor");
        let x = p.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        let y = p.add_continuous("y", 0.0, f64::INFINITY).unwrap();
        p.set_objective(&[(x, -3.0), (y, -5.0)]).unwrap();
        p.add_constraint("a", &[(x, 1.0)], Sense::Le, 4.0).unwrap();
        p.add_constraint("b", &[(y, 2.0)], Sense::Le, 12.0).unwrap();
        p.add_constraint("c", &[(x, 3.0), (y, 2.0)], Sense::Le, 18.0).unwrap();
        let (l, u) = bounds(&p);
        match solve_lp(&p, &l, &u) {
            LpOutcome::Optimal { values, objective } => {
                assert!((values[0] - 2.0).abs() < 1e-9);
                assert!((values[1] - 6.0).abs() < 1e-9);
                assert!((objective + 36.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equality_and_free_variables() {
        // min x: x - y = 3, x + y >= 1, y free, x in [-5, 5]
        let mut p = MilpProblem::new("eq");
        let x = p.add_continuous("x", -5.0, 5.0).unwrap();
        let y = p
            .add_continuous("y", f64::NEG_INFINITY, f64::INFINITY)
            .unwrap();
        p.set_objective(&[(x, 1.0)]).unwrap();
        p.add_constraint("q", &[(x, 1.0), (y, -1.0)], Sense::Eq, 3.0).unwrap();
        p.add_constraint("g", &[(x, 1.0), (y, 1.0)], Sense::Ge, 1.0).unwrap();
        let (l, u) = bounds(&p);
        match solve_lp(&p, &l, &u) {
            LpOutcome::Optimal { values, .. } => {
                assert!((values[0] - 2.0).abs() < 1e-9, "{values:?}");
                assert!((values[1] + 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut p = MilpProblem::new("inf");
        let x = p.add_var("x", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous).unwrap();
        p.add_constraint("a", &[(x, 1.0)], Sense::Le, 0.0).unwrap();
        p.add_constraint("b", &[(x, 1.0)], Sense::Ge, 1.0).unwrap();
        let (l, u) = bounds(&p);
        assert_eq!(solve_lp(&p, &l, &u), LpOutcome::Infeasible);

        let mut q = MilpProblem::new("unb");
        let x = q.add_continuous("x", 0.0, f64::INFINITY).unwrap();
        q.set_objective(&[(x, -1.0)]).unwrap();
        q.add_constraint("a", &[(x, 1.0)], Sense::Ge, 1.0).unwrap();
        let (l, u) = bounds(&q);
        assert_eq!(solve_lp(&q, &l, &u), LpOutcome::Unbounded);
    }
}
