//! Solver-agnostic MILP model with LP-text export and pluggable exact backends.
//!
//! Problems are always minimised. [`solve`] delegates to a [`Backend`] and then
//! re-checks the returned point with [`check_feasible`]; a point that fails the
//! check is repaired by re-solving the LP with the integral variables fixed,
//! and rejected if that also fails. Callers can therefore rely on every
//! returned value vector satisfying all rows and bounds to 1e-6.

pub mod bnb;
pub mod error;
pub mod external;
pub mod feasibility;
#[cfg(feature = "highs")]
pub mod highs_backend;
pub mod lp_format;
pub mod problem;
pub mod simplex;

use std::fmt;

pub use bnb::BuiltinBackend;
pub use error::{LpFormatError, ProblemError, SolverError};
pub use external::{format_solution, parse_solution, ExternalBackend, SolutionFormat};
pub use feasibility::{check_feasible, FeasibilityReport, Violation, ViolationKind};
#[cfg(feature = "highs")]
pub use highs_backend::HighsBackend;
pub use lp_format::{export_lp, parse_lp, read_lp, to_lp_string};
pub use problem::{Constraint, LinExpr, MilpProblem, RowId, Sense, VarId, VarKind, Variable};

pub const DEFAULT_GAP: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    Infeasible,
    TimeLimit,
    Error,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "optimal" => SolveStatus::Optimal,
            "gap_limit" => SolveStatus::GapLimit,
            "infeasible" => SolveStatus::Infeasible,
            "time_limit" => SolveStatus::TimeLimit,
            "error" => SolveStatus::Error,
            _ => return None,
        })
    }

    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::GapLimit)
    }

    /// Statuses that may come with a usable point: the proven ones plus a
    /// time limit reached with an incumbent.
    pub fn may_have_point(self) -> bool {
        self.has_solution() || self == SolveStatus::TimeLimit
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative MIP gap at which the search may stop.
    pub gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub feasibility_tol: f64,
    /// Point offered to the backend as a starting incumbent. Backends that
    /// cannot use one ignore it.
    pub start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            gap: DEFAULT_GAP,
            time_limit: None,
            feasibility_tol: feasibility::FEASIBILITY_TOL,
            start: None,
        }
    }
}

/// What a backend hands back before verification.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub values: Option<Vec<f64>>,
    pub mip_gap: f64,
    pub diagnostics: Vec<String>,
}

impl RawSolution {
    pub fn status(status: SolveStatus) -> Self {
        Self {
            status,
            values: None,
            mip_gap: f64::INFINITY,
            diagnostics: Vec::new(),
        }
    }

    pub fn error(message: impl Into<String>) -> Self {
        Self {
            diagnostics: vec![message.into()],
            ..Self::status(SolveStatus::Error)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub values: Option<Vec<f64>>,
    pub mip_gap: f64,
    pub backend: String,
    pub diagnostics: Vec<String>,
}

impl SolveResult {
    pub fn value(&self, var: VarId) -> Option<f64> {
        self.values.as_ref().map(|v| v[var.0])
    }

    pub fn value_by_name(&self, problem: &MilpProblem, name: &str) -> Option<f64> {
        problem.var_by_name(name).and_then(|v| self.value(v))
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn solve_raw(
        &self,
        problem: &MilpProblem,
        options: &SolveOptions,
    ) -> Result<RawSolution, SolverError>;
}

/// A backend slot; solving through an empty slot is an error.
#[derive(Default)]
pub struct Solver {
    backend: Option<Box<dyn Backend>>,
    pub options: SolveOptions,
}

impl Solver {
    pub fn new(backend: Box<dyn Backend>) -> Self {
        Self {
            backend: Some(backend),
            options: SolveOptions::default(),
        }
    }

    pub fn with_options(mut self, options: SolveOptions) -> Self {
        self.options = options;
        self
    }

    pub fn backend_name(&self) -> Option<&str> {
        self.backend.as_deref().map(|b| b.name())
    }

    pub fn solve(&self, problem: &MilpProblem) -> Result<SolveResult, SolverError> {
        let backend = self.backend.as_deref().ok_or(SolverError::NoBackend)?;
        solve(problem, backend, &self.options)
    }

    /// [`Solver::solve`] under other options, e.g. a different time limit.
    pub fn solve_with(&self, problem: &MilpProblem, options: &SolveOptions) -> Result<SolveResult, SolverError> {
        let backend = self.backend.as_deref().ok_or(SolverError::NoBackend)?;
        solve(problem, backend, options)
    }

    /// [`Solver::solve`] with `start` offered as the initial incumbent.
    pub fn solve_from(&self, problem: &MilpProblem, start: &[f64]) -> Result<SolveResult, SolverError> {
        let backend = self.backend.as_deref().ok_or(SolverError::NoBackend)?;
        let options = SolveOptions { start: Some(start.to_vec()), ..self.options.clone() };
        solve(problem, backend, &options)
    }
}

/// Best available in-process backend for this build.
pub fn default_backend() -> Box<dyn Backend> {
    #[cfg(feature = "highs")]
    {
        Box::new(HighsBackend::default())
    }
    #[cfg(not(feature = "highs"))]
    {
        Box::new(BuiltinBackend::default())
    }
}

fn snap_integers(problem: &MilpProblem, values: &mut [f64]) {
    for (var, x) in problem.variables().iter().zip(values.iter_mut()) {
        if var.kind.is_integral() && (*x - x.round()).abs() <= feasibility::INTEGRALITY_TOL {
            *x = x.round();
        }
    }
}

fn failed(backend: &str, status: SolveStatus, diagnostics: Vec<String>) -> SolveResult {
    SolveResult {
        status,
        objective: None,
        values: None,
        mip_gap: f64::INFINITY,
        backend: backend.to_string(),
        diagnostics,
    }
}

/// Solves `problem` and verifies the returned point.
pub fn solve(
    problem: &MilpProblem,
    backend: &dyn Backend,
    options: &SolveOptions,
) -> Result<SolveResult, SolverError> {
    problem.validate()?;
    let name = backend.name().to_string();
    let raw = match backend.solve_raw(problem, options) {
        Ok(raw) => raw,
        Err(e @ (SolverError::Process(_) | SolverError::SolutionFormat(_) | SolverError::Io(_))) => {
            return Ok(failed(&name, SolveStatus::Error, vec![e.to_string()]));
        }
        Err(e) => return Err(e),
    };
    let mut diagnostics = raw.diagnostics;
    let Some(mut values) = raw.values.filter(|_| raw.status.may_have_point()) else {
        return Ok(failed(&name, raw.status, diagnostics));
    };
    if values.len() != problem.num_vars() {
        diagnostics.push(format!(
            "backend returned {} values for {} variables",
            values.len(),
            problem.num_vars()
        ));
        return Ok(failed(&name, SolveStatus::Error, diagnostics));
    }

    snap_integers(problem, &mut values);
    let tol = options.feasibility_tol;
    let mut report = check_feasible(problem, &values, tol)?;
    if !report.is_feasible() && problem.num_integral() > 0 {
        // Re-derive the continuous part from the rounded integer assignment.
        log::debug!("polishing solution: {report}");
        let fixed = problem.with_integers_fixed(&values);
        let lp_options = SolveOptions { start: None, ..options.clone() };
        let polished = backend.solve_raw(&fixed, &lp_options)?;
        if let Some(mut v) = polished.values.filter(|_| polished.status.has_solution()) {
            snap_integers(problem, &mut v);
            let again = check_feasible(problem, &v, tol)?;
            if again.is_feasible() {
                values = v;
                report = again;
            }
        }
    }
    if !report.is_feasible() {
        diagnostics.push(format!("returned point failed verification: {report}"));
        return Ok(failed(&name, SolveStatus::Error, diagnostics));
    }
    Ok(SolveResult {
        status: raw.status,
        objective: Some(problem.objective_value(&values)),
        values: Some(values),
        mip_gap: raw.mip_gap,
        backend: name,
        diagnostics,
    })
}
