//! In-process HiGHS backend.

use highs::{HighsModelStatus, RowProblem, Sense as HSense};

use crate::problem::{MilpProblem, Sense};
use crate::{Backend, RawSolution, SolveOptions, SolveStatus, SolverError};

#[derive(Debug, Clone)]
pub struct HighsBackend {
    pub threads: i32,
    pub random_seed: i32,
}

impl Default for HighsBackend {
    fn default() -> Self {
        Self {
            threads: 1,
            random_seed: 0,
        }
    }
}

impl Backend for HighsBackend {
    fn name(&self) -> &str {
        "highs"
    }

    fn solve_raw(
        &self,
        problem: &MilpProblem,
        options: &SolveOptions,
    ) -> Result<RawSolution, SolverError> {
        let mut rp = RowProblem::default();
        let mut cost = vec![0.0; problem.num_vars()];
        for &(v, c) in problem.objective() {
            cost[v.0] = c;
        }
        let cols: Vec<_> = problem
            .variables()
            .iter()
            .zip(&cost)
            .map(|(var, &c)| {
                rp.add_column_with_integrality(c, var.lower..=var.upper, var.kind.is_integral())
            })
            .collect();
        for row in problem.constraints() {
            let terms: Vec<_> = row.terms.iter().map(|&(v, a)| (cols[v.0], a)).collect();
            match row.sense {
                Sense::Le => rp.add_row(f64::NEG_INFINITY..=row.rhs, &terms),
                Sense::Ge => rp.add_row(row.rhs..=f64::INFINITY, &terms),
                Sense::Eq => rp.add_row(row.rhs..=row.rhs, &terms),
            }
        }

        let mut model = rp.optimise(HSense::Minimise);
        model.make_quiet();
        model.set_option("threads", self.threads);
        model.set_option("random_seed", self.random_seed);
        model.set_option("mip_rel_gap", options.gap);
        model.set_option("primal_feasibility_tolerance", 1e-9);
        model.set_option("mip_feasibility_tolerance", 1e-6);
        if let Some(t) = options.time_limit {
            model.set_option("time_limit", t);
        }
        if let Some(start) = options.start.as_deref().filter(|s| s.len() == problem.num_vars()) {
            if model.try_set_solution(Some(start), None, None, None).is_err() {
                log::debug!("HiGHS rejected the start point");
            }
        }
        let solved = model.solve();
        let has_integers = problem.num_integral() > 0;
        let status = match solved.status() {
            HighsModelStatus::Optimal => {
                let gap = if has_integers { solved.mip_gap() } else { 0.0 };
                let status = if gap <= 1e-9 {
                    SolveStatus::Optimal
                } else {
                    SolveStatus::GapLimit
                };
                return Ok(RawSolution {
                    status,
                    values: Some(solved.get_solution().columns().to_vec()),
                    mip_gap: gap.max(0.0),
                    diagnostics: Vec::new(),
                });
            }
            HighsModelStatus::ModelEmpty => {
                return Ok(RawSolution {
                    status: SolveStatus::Optimal,
                    values: Some(Vec::new()),
                    mip_gap: 0.0,
                    diagnostics: Vec::new(),
                });
            }
            HighsModelStatus::Infeasible => SolveStatus::Infeasible,
            HighsModelStatus::UnboundedOrInfeasible => {
                let mut raw = RawSolution::status(SolveStatus::Infeasible);
                raw.diagnostics.push("HiGHS: unbounded or infeasible".into());
                return Ok(raw);
            }
            HighsModelStatus::ReachedTimeLimit if has_integers && solved.mip_gap().is_finite() => {
                return Ok(RawSolution {
                    status: SolveStatus::TimeLimit,
                    values: Some(solved.get_solution().columns().to_vec()),
                    mip_gap: solved.mip_gap(),
                    diagnostics: vec!["time limit reached with an incumbent".into()],
                });
            }
            HighsModelStatus::ReachedTimeLimit => SolveStatus::TimeLimit,
            other => {
                return Ok(RawSolution::error(format!("HiGHS model status {other:?}")));
            }
        };
        Ok(RawSolution::status(status))
    }
}
