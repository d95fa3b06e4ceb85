//! Independent residual check of a candidate point.

use std::fmt;

use crate::error::SolverError;
use crate::problem::{MilpProblem, Sense};

pub const FEASIBILITY_TOL: f64 = 1e-6;
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Row,
    LowerBound,
    UpperBound,
    Integrality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub name: String,
    pub kind: ViolationKind,
    /// Amount by which the requirement is missed (always positive).
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeasibilityReport {
    /// Signed slack per constraint; negative means violated.
    pub row_slack: Vec<f64>,
    /// Row and bound violations above tolerance, largest first.
    pub violations: Vec<Violation>,
    /// Integral variables farther than the integrality tolerance from an integer.
    pub integrality: Vec<Violation>,
    pub max_residual: f64,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty() && self.integrality.is_empty()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_feasible() {
            return write!(f, "feasible (max residual {:e})", self.max_residual);
        }
        writeln!(
            f,
            "{} violations, {} integrality deviations",
            self.violations.len(),
            self.integrality.len()
        )?;
        for v in self.violations.iter().chain(&self.integrality).take(10) {
            writeln!(f, "  {:?} {}: {:e}", v.kind, v.name, v.residual)?;
        }
        Ok(())
    }
}

/// Checks `values` against every bound, row and integrality requirement.
pub fn check_feasible(
    problem: &MilpProblem,
    values: &[f64],
    tol: f64,
) -> Result<FeasibilityReport, SolverError> {
    if values.len() < problem.num_vars() {
        return Err(SolverError::MissingValue(
            problem.variables()[values.len()].name.clone(),
        ));
    }
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return Err(SolverError::MissingValue(problem.variables()[j].name.clone()));
    }
    let mut report = FeasibilityReport::default();
    for (var, &x) in problem.variables().iter().zip(values) {
        if x < var.lower - tol {
            report.violations.push(Violation {
                name: var.name.clone(),
                kind: ViolationKind::LowerBound,
                residual: var.lower - x,
            });
        }
        if x > var.upper + tol {
            report.violations.push(Violation {
                name: var.name.clone(),
                kind: ViolationKind::UpperBound,
                residual: x - var.upper,
            });
        }
        if var.kind.is_integral() {
            let dev = (x - x.round()).abs();
            if dev > INTEGRALITY_TOL {
                report.integrality.push(Violation {
                    name: var.name.clone(),
                    kind: ViolationKind::Integrality,
                    residual: dev,
                });
            }
        }
        report.max_residual = report
            .max_residual
            .max(var.lower - x)
            .max(x - var.upper);
    }
    for c in problem.constraints() {
        let act = c.activity(values);
        let slack = match c.sense {
            Sense::Le => c.rhs - act,
            Sense::Ge => act - c.rhs,
            Sense::Eq => -(act - c.rhs).abs(),
        };
        report.row_slack.push(slack);
        report.max_residual = report.max_residual.max(-slack);
        if -slack > tol {
            report.violations.push(Violation {
                name: c.name.clone(),
                kind: ViolationKind::Row,
                residual: -slack,
            });
        }
    }
    report
        .violations
        .sort_by(|a, b| b.residual.total_cmp(&a.residual));
    report
        .integrality
        .sort_by(|a, b| b.residual.total_cmp(&a.residual));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::VarKind;

    #[test]
    fn small_shortfall_is_reported() {
        let mut p = MilpProblem::new("t");
        let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        p.add_constraint("c", &[(x, 1.0)], Sense::Ge, 3.0).unwrap();
        let r = check_feasible(&p, &[2.9], 1e-6).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert!((r.violations[0].residual - 0.1).abs() < 1e-12);
        assert!(check_feasible(&p, &[3.0], 1e-6).unwrap().is_feasible());
    }

    #[test]
    fn integrality_and_missing_values() {
        let mut p = MilpProblem::new("t");
        p.add_var("n", 0.0, 5.0, VarKind::Integer).unwrap();
        p.add_continuous("y", 0.0, 1.0).unwrap();
        let r = check_feasible(&p, &[1.5, 0.5], 1e-6).unwrap();
        assert_eq!(r.integrality.len(), 1);
        assert!(r.violations.is_empty());
        assert!(matches!(
            check_feasible(&p, &[1.0], 1e-6),
            Err(SolverError::MissingValue(n)) if n == "y"
        ));
    }

    #[test]
    fn violations_sorted_descending() {
        let mut p = MilpProblem::new("t");
        let x = p.add_continuous("x", 0.0, 10.0).unwrap();
        p.add_constraint("a", &[(x, 1.0)], Sense::Le, 1.0).unwrap();
        p.add_constraint("b", &[(x, 1.0)], Sense::Le, 0.5).unwrap();
        p.add_constraint("c", &[(x, 1.0)], Sense::Eq, 1.5).unwrap();
        let r = check_feasible(&p, &[2.0], 1e-6).unwrap();
        let names: Vec<&str> = r.violations.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["b", "a", "c"]);
    }
}
