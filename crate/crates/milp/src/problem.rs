//! In-memory MILP representation.
//!
//! A [`MilpProblem`] is a plain list of variables, linear constraints and a
//! linear objective (always minimised). Coefficients are normalised on
//! insertion: duplicate variables in one expression are merged and exact
//! zeros are dropped, so two problems built from the same terms compare equal
//! regardless of how the terms were spelled.

use std::collections::HashMap;
use std::fmt;

use crate::error::ProblemError;

/// Index of a variable inside its owning problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Index of a constraint inside its owning problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
    Integer,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Left-hand side value for the given assignment.
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * values[v.0]).sum()
    }
}

/// Affine expression `Σ coef·var + constant` used while building models.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: value,
        }
    }

    pub fn var(var: VarId) -> Self {
        Self::term(var, 1.0)
    }

    pub fn term(var: VarId, coef: f64) -> Self {
        Self {
            terms: vec![(var, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, var: VarId, coef: f64) -> &mut Self {
        self.terms.push((var, coef));
        self
    }

    pub fn add_constant(&mut self, value: f64) -> &mut Self {
        self.constant += value;
        self
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * scale)));
        self.constant += other.constant * scale;
        self
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpProblem {
    pub name: String,
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    /// Constant offset added to the objective; not exported to LP text.
    objective_offset: f64,
    index: HashMap<String, VarId>,
    row_index: HashMap<String, RowId>,
}

/// LP text identifiers: a letter or `_` first (but not `e`/`E`, which LP
/// readers may take for an exponent), then alphanumerics and `_ . [ ] ,`.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if (c.is_ascii_alphabetic() || c == '_') && c != 'e' && c != 'E' => {}
        _ => return false,
    }
    name.len() <= 255
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | ','))
}

/// Sorts by variable index, merges duplicates and drops exact zeros.
pub(crate) fn normalise_terms(terms: &[(VarId, f64)]) -> Vec<(VarId, f64)> {
    let mut sorted: Vec<(VarId, f64)> = terms.to_vec();
    sorted.sort_by_key(|&(v, _)| v);
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(sorted.len());
    for (v, c) in sorted {
        match out.last_mut() {
            Some((lv, lc)) if *lv == v => *lc += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|&(_, c)| c != 0.0);
    out
}

impl MilpProblem {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
    ) -> Result<VarId, ProblemError> {
        let name = name.into();
        if !is_valid_name(&name) {
            return Err(ProblemError::InvalidName(name));
        }
        if self.index.contains_key(&name) {
            return Err(ProblemError::DuplicateVariable(name));
        }
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ProblemError::InvalidBounds { name, lower, upper });
        }
        if kind.is_integral() && (!lower.is_finite() || !upper.is_finite()) {
            return Err(ProblemError::UnboundedInteger(name));
        }
        let id = VarId(self.variables.len());
        self.index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            lower,
            upper,
            kind,
        });
        Ok(id)
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
    ) -> Result<VarId, ProblemError> {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId, ProblemError> {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
    ) -> Result<RowId, ProblemError> {
        let name = name.into();
        if !is_valid_name(&name) {
            return Err(ProblemError::InvalidName(name));
        }
        if self.row_index.contains_key(&name) {
            return Err(ProblemError::DuplicateConstraint(name));
        }
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| v.0 >= self.variables.len()) {
            return Err(ProblemError::UnknownVariable {
                row: name,
                index: v.0,
            });
        }
        if terms.iter().any(|(_, c)| !c.is_finite()) || !rhs.is_finite() {
            return Err(ProblemError::NonFinite(name));
        }
        let terms = normalise_terms(terms);
        if terms.is_empty() {
            return Err(ProblemError::EmptyConstraint(name));
        }
        let id = RowId(self.constraints.len());
        self.row_index.insert(name.clone(), id);
        self.constraints.push(Constraint {
            name,
            terms,
            sense,
            rhs,
        });
        Ok(id)
    }

    /// Adds `expr (sense) rhs`, moving the expression constant to the right.
    pub fn add_expr_constraint(
        &mut self,
        name: impl Into<String>,
        expr: &LinExpr,
        sense: Sense,
        rhs: f64,
    ) -> Result<RowId, ProblemError> {
        self.add_constraint(name, &expr.terms, sense, rhs - expr.constant)
    }

    pub fn set_objective(&mut self, terms: &[(VarId, f64)]) -> Result<(), ProblemError> {
        if let Some(&(v, _)) = terms.iter().find(|(v, _)| v.0 >= self.variables.len()) {
            return Err(ProblemError::UnknownVariable {
                row: "objective".into(),
                index: v.0,
            });
        }
        if terms.iter().any(|(_, c)| !c.is_finite()) {
            return Err(ProblemError::NonFinite("objective".into()));
        }
        self.objective = normalise_terms(terms);
        Ok(())
    }

    pub fn add_objective_terms(&mut self, terms: &[(VarId, f64)]) -> Result<(), ProblemError> {
        let mut all = self.objective.clone();
        all.extend_from_slice(terms);
        self.set_objective(&all)
    }

    pub fn set_objective_offset(&mut self, offset: f64) {
        self.objective_offset = offset;
    }

    pub fn objective_offset(&self) -> f64 {
        self.objective_offset
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) -> Result<(), ProblemError> {
        let v = &mut self.variables[var.0];
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(ProblemError::InvalidBounds {
                name: v.name.clone(),
                lower,
                upper,
            });
        }
        if v.kind.is_integral() && (!lower.is_finite() || !upper.is_finite()) {
            return Err(ProblemError::UnboundedInteger(v.name.clone()));
        }
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    /// Pins a variable to a single value.
    pub fn fix(&mut self, var: VarId, value: f64) -> Result<(), ProblemError> {
        self.set_bounds(var, value, value)
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, id: RowId) -> &Constraint {
        &self.constraints[id.0]
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn row_by_name(&self, name: &str) -> Option<RowId> {
        self.row_index.get(name).copied()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_integral(&self) -> usize {
        self.variables.iter().filter(|v| v.kind.is_integral()).count()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    /// `Σ c_j x_j + offset`.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .objective
                .iter()
                .map(|&(v, c)| c * values[v.0])
                .sum::<f64>()
    }

    /// Same problem with every integral variable pinned to the given value.
    /// Used to recover exactly-consistent continuous values after rounding.
    pub fn with_integers_fixed(&self, values: &[f64]) -> MilpProblem {
        let mut fixed = self.clone();
        for (j, var) in fixed.variables.iter_mut().enumerate() {
            if var.kind.is_integral() {
                let r = values[j].round().clamp(var.lower, var.upper);
                var.lower = r;
                var.upper = r;
                var.kind = VarKind::Continuous;
            }
        }
        fixed
    }

    /// LP relaxation: every integral variable becomes continuous within its bounds.
    pub fn relaxed(&self) -> MilpProblem {
        let mut lp = self.clone();
        for var in &mut lp.variables {
            var.kind = VarKind::Continuous;
        }
        lp
    }

    /// Re-checks the structural invariants; useful after manual edits or parsing.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let mut seen = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if seen.insert(v.name.as_str(), i).is_some() {
                return Err(ProblemError::DuplicateVariable(v.name.clone()));
            }
            if v.kind.is_integral() && (!v.lower.is_finite() || !v.upper.is_finite()) {
                return Err(ProblemError::UnboundedInteger(v.name.clone()));
            }
        }
        for c in &self.constraints {
            if let Some(&(v, _)) = c.terms.iter().find(|(v, _)| v.0 >= self.variables.len()) {
                return Err(ProblemError::UnknownVariable {
                    row: c.name.clone(),
                    index: v.0,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn terms_are_merged_and_zero_dropped() {
        let mut p = MilpProblem::new("t");
        let x = p.add_continuous("x", 0.0, 1.0).unwrap();
        let y = p.add_continuous("y", 0.0, 1.0).unwrap();
        let r = p
            .add_constraint("c", &[(y, 1.0), (x, 2.0), (y, -1.0), (x, 1.0)], Sense::Le, 1.0)
            .unwrap();
        assert_eq!(p.constraint(r).terms, vec![(x, 3.0)]);
    }

    #[test]
    fn empty_constraint_rejected() {
        let mut p = MilpProblem::new("t");
        let x = p.add_continuous("x", 0.0, 1.0).unwrap();
        let err = p
            .add_constraint("c", &[(x, 1.0), (x, -1.0)], Sense::Le, 1.0)
            .unwrap_err();
        assert!(matches!(err, ProblemError::EmptyConstraint(_)));
    }

    #[test]
    fn names_checked() {
        assert!(is_valid_name("u_3_2"));
        assert!(is_valid_name("zh_1_2_3"));
        assert!(!is_valid_name("eps_1"));
        assert!(!is_valid_name("3x"));
        assert!(!is_valid_name("a b"));
        let mut p = MilpProblem::new("t");
        p.add_binary("x").unwrap();
        assert!(matches!(
            p.add_binary("x"),
            Err(ProblemError::DuplicateVariable(_))
        ));
    }

    #[test]
    fn integer_needs_finite_bounds() {
        let mut p = MilpProblem::new("t");
        assert!(matches!(
            p.add_var("n", 0.0, f64::INFINITY, VarKind::Integer),
            Err(ProblemError::UnboundedInteger(_))
        ));
    }
}
