//! Backend that shells out to any solver consuming LP files.
//!
//! The argument list is a template: `{lp}` and `{sol}` expand to the problem
//! and solution paths inside a fresh temporary directory, `{gap}` to the
//! relative gap and `{time_limit}` to seconds (a large number when unset).

use std::path::Path;
use std::process::Command;

use crate::lp_format::export_lp;
use crate::problem::MilpProblem;
use crate::{Backend, RawSolution, SolveOptions, SolveStatus, SolverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolutionFormat {
    /// `# key value` header lines followed by `name value` lines.
    #[default]
    NameValue,
    /// CBC `solu` output.
    Cbc,
}

impl SolutionFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "name_value" => Some(Self::NameValue),
            "cbc" => Some(Self::Cbc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    pub command: String,
    pub args: Vec<String>,
    pub format: SolutionFormat,
}

impl ExternalBackend {
    pub fn new(command: impl Into<String>, args: Vec<String>, format: SolutionFormat) -> Self {
        Self {
            command: command.into(),
            args,
            format,
        }
    }

    fn expand(&self, lp: &Path, sol: &Path, options: &SolveOptions) -> Vec<String> {
        let time = options.time_limit.unwrap_or(1e7).to_string();
        self.args
            .iter()
            .map(|a| {
                a.replace("{lp}", &lp.display().to_string())
                    .replace("{sol}", &sol.display().to_string())
                    .replace("{gap}", &options.gap.to_string())
                    .replace("{time_limit}", &time)
            })
            .collect()
    }
}

fn tail(bytes: &[u8], lines: usize) -> String {
    let text = String::from_utf8_lossy(bytes);
    let all: Vec<&str> = text.lines().collect();
    all[all.len().saturating_sub(lines)..].join("\n")
}

impl Backend for ExternalBackend {
    fn name(&self) -> &str {
        "external"
    }

    fn solve_raw(
        &self,
        problem: &MilpProblem,
        options: &SolveOptions,
    ) -> Result<RawSolution, SolverError> {
        let dir = tempfile::tempdir()?;
        let lp = dir.path().join("problem.lp");
        let sol = dir.path().join("problem.sol");
        export_lp(problem, &lp)?;
        let args = self.expand(&lp, &sol, options);
        log::debug!("running {} {}", self.command, args.join(" "));
        let output = Command::new(&self.command)
            .args(&args)
            .output()
            .map_err(|e| SolverError::Process(format!("{}: {e}", self.command)))?;
        if !sol.exists() {
            return Err(SolverError::Process(format!(
                "{} exited with {} and wrote no solution\n{}",
                self.command,
                output.status,
                tail(&output.stderr, 20)
            )));
        }
        let text = std::fs::read_to_string(&sol)?;
        let mut raw = parse_solution(&text, self.format, problem)?;
        if !output.status.success() {
            raw.diagnostics
                .push(format!("{} exited with {}", self.command, output.status));
        }
        Ok(raw)
    }
}

/// Inverse of [`parse_solution`] for the `NameValue` format.
pub fn format_solution(problem: &MilpProblem, result: &crate::SolveResult) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    writeln!(out, "# status {}", result.status).unwrap();
    if let Some(values) = &result.values {
        writeln!(out, "# objective {}", result.objective.unwrap_or(f64::NAN)).unwrap();
        writeln!(out, "# gap {}", result.mip_gap).unwrap();
        for (var, x) in problem.variables().iter().zip(values) {
            writeln!(out, "{} {}", var.name, x).unwrap();
        }
    }
    out
}

fn assign(
    problem: &MilpProblem,
    values: &mut [f64],
    name: &str,
    value: &str,
    line: usize,
) -> Result<(), SolverError> {
    let v = problem
        .var_by_name(name)
        .ok_or_else(|| SolverError::SolutionFormat(format!("line {line}: unknown variable `{name}`")))?;
    values[v.0] = value
        .parse()
        .map_err(|_| SolverError::SolutionFormat(format!("line {line}: bad value `{value}`")))?;
    Ok(())
}

/// Parses a solution file. Variables the file omits are taken as zero.
pub fn parse_solution(
    text: &str,
    format: SolutionFormat,
    problem: &MilpProblem,
) -> Result<RawSolution, SolverError> {
    let mut values = vec![0.0; problem.num_vars()];
    let mut status = None;
    let mut gap = 0.0;
    match format {
        SolutionFormat::NameValue => {
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                if let Some(header) = line.strip_prefix('#') {
                    let mut parts = header.split_whitespace();
                    match (parts.next(), parts.next()) {
                        (Some("status"), Some(s)) => {
                            status = Some(SolveStatus::parse(s).ok_or_else(|| {
                                SolverError::SolutionFormat(format!("unknown status `{s}`"))
                            })?)
                        }
                        (Some("gap"), Some(g)) => gap = g.parse().unwrap_or(f64::INFINITY),
                        _ => {}
                    }
                    continue;
                }
                let mut parts = line.split_whitespace();
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(n), Some(v), None) => assign(problem, &mut values, n, v, i + 1)?,
                    _ => {
                        return Err(SolverError::SolutionFormat(format!(
                            "line {}: expected `name value`",
                            i + 1
                        )))
                    }
                }
            }
        }
        SolutionFormat::Cbc => {
            let mut lines = text.lines().enumerate();
            let (_, first) = lines
                .next()
                .ok_or_else(|| SolverError::SolutionFormat("empty CBC solution".into()))?;
            let head = first.to_ascii_lowercase();
            status = Some(if head.starts_with("optimal") {
                SolveStatus::Optimal
            } else if head.contains("infeasible") {
                SolveStatus::Infeasible
            } else if head.contains("stopped on gap") {
                SolveStatus::GapLimit
            } else if head.contains("stopped on time") {
                SolveStatus::TimeLimit
            } else {
                SolveStatus::Error
            });
            for (i, line) in lines {
                let mut parts: Vec<&str> = line.split_whitespace().collect();
                if parts.first() == Some(&"**") {
                    parts.remove(0);
                }
                if parts.len() < 3 {
                    continue;
                }
                assign(problem, &mut values, parts[1], parts[2], i + 1)?;
            }
        }
    }
    let status = status.unwrap_or(SolveStatus::Optimal);
    Ok(RawSolution {
        status,
        values: status.has_solution().then_some(values),
        mip_gap: if status.has_solution() { gap } else { f64::INFINITY },
        diagnostics: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem() -> MilpProblem {
        let mut p = MilpProblem::new("t");
        p.add_continuous("x", 0.0, 10.0).unwrap();
        p.add_binary("y").unwrap();
        p
    }

    #[test]
    fn name_value_with_header() {
        let p = problem();
        let raw = parse_solution("# status optimal\n# gap 0.0005\nx 2.5\n", SolutionFormat::NameValue, &p)
            .unwrap();
        assert_eq!(raw.status, SolveStatus::Optimal);
        assert_eq!(raw.values, Some(vec![2.5, 0.0]));
        assert_eq!(raw.mip_gap, 0.0005);
        let inf = parse_solution("# status infeasible\n", SolutionFormat::NameValue, &p).unwrap();
        assert_eq!(inf.values, None);
        assert!(parse_solution("z 1\n", SolutionFormat::NameValue, &p).is_err());
    }

    #[test]
    fn cbc_solution() {
        let p = problem();
        let text = "Optimal - objective value 3.00000000\n      0 x             3     0\n      1 y     1    2\n";
        let raw = parse_solution(text, SolutionFormat::Cbc, &p).unwrap();
        assert_eq!(raw.values, Some(vec![3.0, 1.0]));
        let text = "Infeasible - objective value 0\n**    0 x   1  0\n";
        let raw = parse_solution(text, SolutionFormat::Cbc, &p).unwrap();
        assert_eq!(raw.status, SolveStatus::Infeasible);
    }

    #[test]
    fn missing_command_is_process_error() {
        let b = ExternalBackend::new("/nonexistent/solver", vec!["{lp}".into()], SolutionFormat::NameValue);
        let err = b.solve_raw(&problem(), &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, SolverError::Process(_)));
    }
}
