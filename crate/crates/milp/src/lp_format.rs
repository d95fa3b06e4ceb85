//! CPLEX-LP text dialect: writer and reader.
//!
//! The writer emits `Minimize`, `Subject To`, `Bounds`, `Binaries`,
//! `Generals`, `End` in declaration order and lists every variable in
//! `Bounds`, so a re-parse restores the original variable order exactly.
//! Numbers are printed in shortest round-trip form.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::LpFormatError;
use crate::problem::{MilpProblem, Sense, VarId, VarKind};

const TERMS_PER_LINE: usize = 8;

fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        return "+inf".into();
    }
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_terms(out: &mut String, problem: &MilpProblem, terms: &[(VarId, f64)]) {
    for (k, &(v, c)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(c.abs()), problem.variable(v).name);
    }
}

/// Renders the problem as LP text.
pub fn to_lp_string(problem: &MilpProblem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ Problem: {}", problem.name);
    if problem.objective_offset() != 0.0 {
        let _ = writeln!(out, "\\ Offset: {}", fmt_num(problem.objective_offset()));
    }
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, problem, problem.objective());
    out.push_str("\nSubject To\n");
    for c in problem.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, problem, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense, fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in problem.variables() {
        let (l, u) = (v.lower, v.upper);
        let line = if l == u {
            format!(" {} = {}", v.name, fmt_num(l))
        } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
            format!(" {} free", v.name)
        } else if u == f64::INFINITY {
            format!(" {} >= {}", v.name, fmt_num(l))
        } else {
            format!(" {} <= {} <= {}", fmt_num(l), v.name, fmt_num(u))
        };
        out.push_str(&line);
        out.push('\n');
    }
    for (header, kind) in [("Binaries", VarKind::Binary), ("Generals", VarKind::Integer)] {
        let names: Vec<&str> = problem
            .variables()
            .iter()
            .filter(|v| v.kind == kind)
            .map(|v| v.name.as_str())
            .collect();
        if names.is_empty() {
            continue;
        }
        let _ = writeln!(out, "{header}");
        for chunk in names.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(problem: &MilpProblem, path: &Path) -> Result<(), LpFormatError> {
    fs::write(path, to_lp_string(problem))?;
    Ok(())
}

pub fn read_lp(path: &Path) -> Result<MilpProblem, LpFormatError> {
    parse_lp(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Plus,
    Minus,
    Colon,
    Cmp(Sense),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let l = line.trim().to_ascii_lowercase();
    let l = l.split_whitespace().collect::<Vec<_>>().join(" ");
    match l.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binaries" | "binary" | "bin" => Some(Section::Binaries),
        "generals" | "general" | "gen" | "integers" => Some(Section::Generals),
        "end" => Some(Section::End),
        _ => None,
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | ',' | '{' | '}' | '#' | '$' | '%' | '&' | '!' | '"' | '\'' | '@' | '^' | '~' | '|' | '?' | ';' | '(' | ')')
}

fn tokenize(text: &str, line: usize) -> Result<Vec<Tok>, LpFormatError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let syntax = |message: String| LpFormatError::Syntax { line, message };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '+' {
            toks.push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            toks.push(Tok::Minus);
            i += 1;
        } else if c == ':' {
            toks.push(Tok::Colon);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j], '<' | '>' | '=') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<=" | "<" | "=<" => Sense::Le,
                ">=" | ">" | "=>" => Sense::Ge,
                "=" => Sense::Eq,
                other => return Err(syntax(format!("unknown operator `{other}`"))),
            };
            toks.push(Tok::Cmp(sense));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let s: String = chars[i..j].iter().collect();
            let v = s
                .parse::<f64>()
                .map_err(|_| syntax(format!("bad number `{s}`")))?;
            toks.push(Tok::Num(v));
            i = j;
        } else if is_name_char(c) {
            let mut j = i;
            while j < chars.len() && is_name_char(chars[j]) {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => toks.push(Tok::Num(f64::INFINITY)),
                _ => toks.push(Tok::Name(s)),
            }
            i = j;
        } else {
            return Err(syntax(format!("unexpected character `{c}`")));
        }
    }
    Ok(toks)
}

/// Reader state: variables in first-appearance order.
#[derive(Default)]
struct Builder {
    names: Vec<String>,
    index: HashMap<String, usize>,
    bounds: HashMap<usize, (f64, f64)>,
    bound_order: Vec<usize>,
    kinds: HashMap<usize, VarKind>,
    objective: Vec<(usize, f64)>,
    rows: Vec<(String, Vec<(usize, f64)>, Sense, f64)>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }
}

/// Parses a linear expression `[sign] [coef] name ...` starting at `pos`.
/// Stops at a comparison operator or the end of the tokens.
fn parse_expr(
    toks: &[Tok],
    pos: &mut usize,
    b: &mut Builder,
    line: usize,
) -> Result<Vec<(usize, f64)>, LpFormatError> {
    let mut terms = Vec::new();
    loop {
        let mut sign = 1.0;
        let mut saw_sign = false;
        while let Some(t) = toks.get(*pos) {
            match t {
                Tok::Plus => {
                    saw_sign = true;
                    *pos += 1;
                }
                Tok::Minus => {
                    sign = -sign;
                    saw_sign = true;
                    *pos += 1;
                }
                _ => break,
            }
        }
        let coef = match toks.get(*pos) {
            Some(Tok::Num(v)) => {
                *pos += 1;
                Some(*v)
            }
            _ => None,
        };
        match toks.get(*pos) {
            Some(Tok::Name(n)) => {
                let n = n.clone();
                *pos += 1;
                let v = b.var(&n);
                terms.push((v, sign * coef.unwrap_or(1.0)));
            }
            None | Some(Tok::Cmp(_)) if !saw_sign && coef.is_none() => break,
            other => {
                return Err(LpFormatError::Syntax {
                    line,
                    message: format!("expected variable name, found {other:?}"),
                })
            }
        }
    }
    Ok(terms)
}

fn signed_number(toks: &[Tok], pos: &mut usize, line: usize) -> Result<f64, LpFormatError> {
    let mut sign = 1.0;
    while let Some(t) = toks.get(*pos) {
        match t {
            Tok::Plus => *pos += 1,
            Tok::Minus => {
                sign = -sign;
                *pos += 1
            }
            _ => break,
        }
    }
    match toks.get(*pos) {
        Some(Tok::Num(v)) => {
            *pos += 1;
            Ok(sign * v)
        }
        other => Err(LpFormatError::Syntax {
            line,
            message: format!("expected number, found {other:?}"),
        }),
    }
}

fn parse_rows(
    toks: &[Tok],
    b: &mut Builder,
    line: usize,
) -> Result<(), LpFormatError> {
    let mut pos = 0;
    while pos < toks.len() {
        let name = match (toks.get(pos), toks.get(pos + 1)) {
            (Some(Tok::Name(n)), Some(Tok::Colon)) => {
                let n = n.clone();
                pos += 2;
                n
            }
            _ => format!("R{}", b.rows.len() + 1),
        };
        let terms = parse_expr(toks, &mut pos, b, line)?;
        let sense = match toks.get(pos) {
            Some(Tok::Cmp(s)) => *s,
            other => {
                return Err(LpFormatError::Syntax {
                    line,
                    message: format!("constraint `{name}`: expected comparison, found {other:?}"),
                })
            }
        };
        pos += 1;
        let rhs = signed_number(toks, &mut pos, line)?;
        b.rows.push((name, terms, sense, rhs));
    }
    Ok(())
}

fn parse_bound_line(toks: &[Tok], b: &mut Builder, line: usize) -> Result<(), LpFormatError> {
    let syntax = |message: &str| LpFormatError::Syntax {
        line,
        message: message.to_string(),
    };
    let mut pos = 0;
    // `name free`
    if let [Tok::Name(n), Tok::Name(kw)] = toks {
        if kw.eq_ignore_ascii_case("free") {
            let v = b.var(n);
            b.bounds.insert(v, (f64::NEG_INFINITY, f64::INFINITY));
            b.bound_order.push(v);
            return Ok(());
        }
    }
    if matches!(toks.first(), Some(Tok::Name(_))) {
        // `name op value`
        let Some(Tok::Name(n)) = toks.first() else {
            unreachable!()
        };
        let v = b.var(n);
        pos += 1;
        let sense = match toks.get(pos) {
            Some(Tok::Cmp(s)) => *s,
            _ => return Err(syntax("expected comparison in bound")),
        };
        pos += 1;
        let value = signed_number(toks, &mut pos, line)?;
        let entry = b.bounds.entry(v).or_insert((0.0, f64::INFINITY));
        match sense {
            Sense::Le => entry.1 = value,
            Sense::Ge => entry.0 = value,
            Sense::Eq => *entry = (value, value),
        }
        b.bound_order.push(v);
        return Ok(());
    }
    // `value op name [op value]`
    let first = signed_number(toks, &mut pos, line)?;
    let s1 = match toks.get(pos) {
        Some(Tok::Cmp(s)) => *s,
        _ => return Err(syntax("expected comparison in bound")),
    };
    pos += 1;
    let v = match toks.get(pos) {
        Some(Tok::Name(n)) => b.var(&n.clone()),
        _ => return Err(syntax("expected variable in bound")),
    };
    pos += 1;
    let entry = b.bounds.entry(v).or_insert((0.0, f64::INFINITY));
    match s1 {
        Sense::Le => entry.0 = first,
        Sense::Ge => entry.1 = first,
        Sense::Eq => *entry = (first, first),
    }
    if pos < toks.len() {
        let s2 = match toks.get(pos) {
            Some(Tok::Cmp(s)) => *s,
            _ => return Err(syntax("expected comparison in bound")),
        };
        pos += 1;
        let second = signed_number(toks, &mut pos, line)?;
        let entry = b.bounds.get_mut(&v).expect("inserted above");
        match s2 {
            Sense::Le => entry.1 = second,
            Sense::Ge => entry.0 = second,
            Sense::Eq => *entry = (second, second),
        }
    }
    if pos != toks.len() {
        return Err(syntax("trailing tokens in bound"));
    }
    b.bound_order.push(v);
    Ok(())
}

/// Parses LP text produced by [`to_lp_string`] or any tool emitting the same
/// dialect (minimisation only).
pub fn parse_lp(text: &str) -> Result<MilpProblem, LpFormatError> {
    let mut b = Builder::default();
    let mut name = String::new();
    let mut offset = 0.0;
    let mut section = Section::Preamble;
    // Objective and constraint sections may wrap across lines; buffer them.
    let mut buffer: Vec<Tok> = Vec::new();
    let mut buffer_line = 0;

    let flush = |section: Section,
                     buffer: &mut Vec<Tok>,
                     b: &mut Builder,
                     line: usize|
     -> Result<(), LpFormatError> {
        match section {
            Section::Objective => {
                let mut pos = 0;
                if let (Some(Tok::Name(_)), Some(Tok::Colon)) = (buffer.first(), buffer.get(1)) {
                    pos = 2;
                }
                let terms = parse_expr(buffer, &mut pos, b, line)?;
                if pos != buffer.len() {
                    return Err(LpFormatError::Syntax {
                        line,
                        message: "unexpected tokens in objective".into(),
                    });
                }
                b.objective = terms;
            }
            Section::Constraints => parse_rows(buffer, b, line)?,
            _ => {}
        }
        buffer.clear();
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if let Some(comment) = raw.trim_start().strip_prefix('\\') {
            let comment = comment.trim();
            if let Some(n) = comment.strip_prefix("Problem:") {
                name = n.trim().to_string();
            } else if let Some(o) = comment.strip_prefix("Offset:") {
                offset = o.trim().parse().map_err(|_| LpFormatError::Syntax {
                    line: lineno,
                    message: "bad offset".into(),
                })?;
            }
            continue;
        }
        let content = match raw.find('\\') {
            Some(i) => &raw[..i],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        if let Some(next) = section_header(content) {
            flush(section, &mut buffer, &mut b, buffer_line)?;
            section = next;
            buffer_line = lineno;
            continue;
        }
        match section {
            Section::Preamble => {
                return Err(LpFormatError::Syntax {
                    line: lineno,
                    message: "content before `Minimize`".into(),
                })
            }
            Section::Objective | Section::Constraints => {
                if buffer.is_empty() {
                    buffer_line = lineno;
                }
                buffer.extend(tokenize(content, lineno)?);
            }
            Section::Bounds => {
                let toks = tokenize(content, lineno)?;
                parse_bound_line(&toks, &mut b, lineno)?;
            }
            Section::Binaries | Section::Generals => {
                let kind = if section == Section::Binaries {
                    VarKind::Binary
                } else {
                    VarKind::Integer
                };
                for n in content.split_whitespace() {
                    let v = b.var(n);
                    b.kinds.insert(v, kind);
                }
            }
            Section::End => {
                return Err(LpFormatError::Syntax {
                    line: lineno,
                    message: "content after `End`".into(),
                })
            }
        }
    }
    flush(section, &mut buffer, &mut b, buffer_line)?;
    if section != Section::End {
        return Err(LpFormatError::Syntax {
            line: text.lines().count(),
            message: "missing `End`".into(),
        });
    }

    // Variables listed in Bounds come first, in that order.
    let mut order: Vec<usize> = Vec::with_capacity(b.names.len());
    let mut placed = vec![false; b.names.len()];
    for &v in &b.bound_order {
        if !placed[v] {
            placed[v] = true;
            order.push(v);
        }
    }
    for (v, done) in placed.iter().enumerate() {
        if !done {
            order.push(v);
        }
    }
    let mut problem = MilpProblem::new(name);
    let mut ids = vec![VarId(0); b.names.len()];
    for &v in &order {
        let kind = b.kinds.get(&v).copied().unwrap_or(VarKind::Continuous);
        let default = match kind {
            VarKind::Binary => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        };
        let (l, u) = b.bounds.get(&v).copied().unwrap_or(default);
        ids[v] = problem.add_var(b.names[v].clone(), l, u, kind)?;
    }
    let remap = |terms: &[(usize, f64)]| -> Vec<(VarId, f64)> {
        terms.iter().map(|&(v, c)| (ids[v], c)).collect()
    };
    problem.set_objective(&remap(&b.objective))?;
    problem.set_objective_offset(offset);
    for (rname, terms, sense, rhs) in &b.rows {
        problem.add_constraint(rname.clone(), &remap(terms), *sense, *rhs)?;
    }
    Ok(problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpProblem {
        let mut p = MilpProblem::new("sample");
        let x = p.add_continuous("x", 3.0, f64::INFINITY).unwrap();
        let y = p.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let b = p.add_binary("b").unwrap();
        let n = p.add_var("n", -2.0, 7.0, VarKind::Integer).unwrap();
        let w = p.add_continuous("w", f64::NEG_INFINITY, 1.25e-7).unwrap();
        p.set_objective(&[(x, 1.0), (y, -0.1), (b, 1e20), (n, 3.0)]).unwrap();
        p.add_constraint("c1", &[(x, 1.0), (y, 2.5)], Sense::Ge, -1.0).unwrap();
        p.add_constraint("c2", &[(b, 1.0), (n, -1.0), (w, 1.0 / 3.0)], Sense::Le, 0.0)
            .unwrap();
        p.add_constraint("c3", &[(y, 1.0)], Sense::Eq, 1e-9).unwrap();
        p
    }

    #[test]
    fn single_var_round_trip() {
        let mut p = MilpProblem::new("one");
        let x = p.add_continuous("x", 3.0, f64::INFINITY).unwrap();
        p.set_objective(&[(x, 1.0)]).unwrap();
        let back = parse_lp(&to_lp_string(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn mixed_round_trip_exact() {
        let p = sample();
        let text = to_lp_string(&p);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(to_lp_string(&back), text);
    }

    #[test]
    fn binaries_section_lists_binary() {
        let text = to_lp_string(&sample());
        let bin = text.split("Binaries\n").nth(1).unwrap();
        assert!(bin.lines().next().unwrap().split_whitespace().any(|t| t == "b"));
        assert!(text.contains("Generals\n n\n"));
        assert!(text.trim_end().ends_with("End"));
    }

    #[test]
    fn reads_foreign_layout() {
        let text = "\\ hand written\nMINIMIZE\n obj: 2 x\n + 3 y\nSUBJECT TO\n c1: x + y\n >= 2\n x - y <= 1\nBOUNDS\n y <= 4\nEND\n";
        let p = parse_lp(text).unwrap();
        assert_eq!(p.num_vars(), 2);
        assert_eq!(p.num_constraints(), 2);
        assert_eq!(p.constraints()[1].name, "R2");
        let y = p.var_by_name("y").unwrap();
        assert_eq!(p.variable(y).upper, 4.0);
        assert_eq!(p.variable(y).lower, 0.0);
    }

    #[test]
    fn missing_end_is_error() {
        assert!(parse_lp("Minimize\n obj: x\nSubject To\n c: x >= 1\n").is_err());
    }
}
