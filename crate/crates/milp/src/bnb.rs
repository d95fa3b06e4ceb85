//! Best-first branch and bound over the dense simplex relaxation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::feasibility::INTEGRALITY_TOL;
use crate::problem::MilpProblem;
use crate::simplex::{solve_lp, LpOutcome};
use crate::{Backend, RawSolution, SolveOptions, SolveStatus, SolverError};

struct Node {
    bound: f64,
    seq: usize,
    /// Bound changes relative to the root: (variable, lower, upper).
    changes: Vec<(usize, f64, f64)>,
    values: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound, then oldest node, wins.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Exact MILP solver for desk-scale instances.
#[derive(Debug, Clone)]
pub struct BuiltinBackend {
    pub node_limit: usize,
}

impl Default for BuiltinBackend {
    fn default() -> Self {
        Self { node_limit: 200_000 }
    }
}

/// Most fractional integral variable; lowest index on ties.
fn branching_variable(problem: &MilpProblem, values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, var) in problem.variables().iter().enumerate() {
        if !var.kind.is_integral() {
            continue;
        }
        let frac = values[j] - values[j].floor();
        let dist = frac.min(1.0 - frac);
        if dist > INTEGRALITY_TOL && best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1e-10)).max(0.0)
}

impl Backend for BuiltinBackend {
    fn name(&self) -> &str {
        "builtin"
    }

    fn solve_raw(
        &self,
        problem: &MilpProblem,
        options: &SolveOptions,
    ) -> Result<RawSolution, SolverError> {
        let start = Instant::now();
        let root_lower: Vec<f64> = problem.variables().iter().map(|v| v.lower).collect();
        let root_upper: Vec<f64> = problem.variables().iter().map(|v| v.upper).collect();
        let mut lower = root_lower.clone();
        let mut upper = root_upper.clone();

        let mut heap = BinaryHeap::new();
        let mut seq = 0usize;
        match solve_lp(problem, &lower, &upper) {
            LpOutcome::Optimal { values, objective } => heap.push(Node {
                bound: objective,
                seq,
                changes: Vec::new(),
                values,
            }),
            LpOutcome::Infeasible => return Ok(RawSolution::status(SolveStatus::Infeasible)),
            LpOutcome::Unbounded => {
                return Ok(RawSolution::error("LP relaxation is unbounded"));
            }
            LpOutcome::IterationLimit => {
                return Ok(RawSolution::error("simplex iteration limit at root"));
            }
        }

        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        let mut nodes = 0usize;
        let mut stopped = false;
        while let Some(node) = heap.pop() {
            if let Some((inc, _)) = &incumbent {
                if relative_gap(*inc, node.bound) <= options.gap {
                    // Every remaining node is at least this bound.
                    heap.push(node);
                    break;
                }
            }
            nodes += 1;
            let timed_out = options
                .time_limit
                .is_some_and(|t| start.elapsed().as_secs_f64() > t);
            if nodes > self.node_limit || timed_out {
                heap.push(node);
                stopped = true;
                break;
            }
            let Some(j) = branching_variable(problem, &node.values) else {
                if incumbent.as_ref().is_none_or(|(inc, _)| node.bound < *inc) {
                    incumbent = Some((node.bound, node.values));
                }
                continue;
            };

            let x = node.values[j];
            for (lo, up) in [(f64::NEG_INFINITY, x.floor()), (x.ceil(), f64::INFINITY)] {
                lower.copy_from_slice(&root_lower);
                upper.copy_from_slice(&root_upper);
                for &(k, l, u) in &node.changes {
                    lower[k] = l;
                    upper[k] = u;
                }
                let child_lo = lower[j].max(lo);
                let child_up = upper[j].min(up);
                if child_lo > child_up {
                    continue;
                }
                lower[j] = child_lo;
                upper[j] = child_up;
                if let LpOutcome::Optimal { values, objective } = solve_lp(problem, &lower, &upper)
                {
                    if incumbent.as_ref().is_some_and(|(inc, _)| objective >= *inc) {
                        continue;
                    }
                    let mut changes = node.changes.clone();
                    changes.retain(|c| c.0 != j);
                    changes.push((j, child_lo, child_up));
                    seq += 1;
                    heap.push(Node {
                        bound: objective,
                        seq,
                        changes,
                        values,
                    });
                }
            }
        }
        log::debug!("builtin branch and bound explored {nodes} nodes");

        let best_bound = heap.peek().map(|n| n.bound);
        match incumbent {
            Some((obj, values)) if !stopped => {
                let gap = best_bound.map_or(0.0, |b| relative_gap(obj, b));
                let status = if gap <= 1e-9 {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapLimit
                };
                Ok(RawSolution {
                    status,
                    values: Some(values),
                    mip_gap: gap,
                    diagnostics: Vec::new(),
                })
            }
            Some((obj, _)) => {
                let gap = best_bound.map_or(0.0, |b| relative_gap(obj, b));
                Ok(RawSolution {
                    status: SolveStatus::TimeLimit,
                    values: None,
                    mip_gap: gap,
                    diagnostics: vec![format!("stopped after {nodes} nodes")],
                })
            }
            None if stopped => Ok(RawSolution {
                status: SolveStatus::TimeLimit,
                values: None,
                mip_gap: f64::INFINITY,
                diagnostics: vec![format!("no incumbent after {nodes} nodes")],
            }),
            None => Ok(RawSolution::status(SolveStatus::Infeasible)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_order_is_best_first_then_fifo() {
        let mk = |bound, seq| Node {
            bound,
            seq,
            changes: Vec::new(),
            values: Vec::new(),
        };
        let mut h = BinaryHeap::new();
        h.push(mk(2.0, 0));
        h.push(mk(1.0, 2));
        h.push(mk(1.0, 1));
        assert_eq!(h.pop().unwrap().seq, 1);
        assert_eq!(h.pop().unwrap().seq, 2);
        assert_eq!(h.pop().unwrap().seq, 0);
    }

    #[test]
    fn most_fractional_lowest_index() {
        let mut p = MilpProblem::new("t");
        for n in ["a", "b", "c"] {
            p.add_var(n, 0.0, 3.0, crate::VarKind::Integer).unwrap();
        }
        assert_eq!(branching_variable(&p, &[0.2, 1.5, 2.5]), Some(1));
        assert_eq!(branching_variable(&p, &[1.0, 2.0, 3.0]), None);
    }
}
