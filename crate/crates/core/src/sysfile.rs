//! Line-oriented system files.
//!
//! ```text
//! # comment
//! name: example
//! states: x1, x2
//! inputs: u
//! dynamics:
//!   x1+ = x2
//!   x2+ = u
//! equilibrium: x1 = 0, x2 = 0, u = 0
//! hints:
//!   xi = x1
//!   inverse x2 = th1
//!   integrals = x1
//! ```
//!
//! `states` and `inputs` may be omitted: states are then the left-hand
//! sides of `dynamics` in order, inputs the remaining identifiers sorted by
//! name. `equilibrium` also accepts a tuple `(x0..., u0...)`; missing
//! entries are zero.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::dtsystem::{AdaptedChartHint, DiscreteSystem, SystemError};
use crate::symexpr::{parse_scalar_with, ParseError, ParseErrorKind, Rational, Scalar, Var};

#[derive(Debug, Error)]
pub enum SysFileError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: non-rational expression `{name}(...)`; only + - * / ^ over variables and rational numbers are supported")]
    NonRational {
        line: usize,
        column: usize,
        name: String,
    },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl SysFileError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        SysFileError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}

impl From<ParseError> for SysFileError {
    fn from(e: ParseError) -> Self {
        match e.kind {
            ParseErrorKind::NonRational(name) => SysFileError::NonRational {
                line: e.line,
                column: e.column,
                name,
            },
            ParseErrorKind::Syntax(msg) => SysFileError::at(e.line, e.column, msg),
            ParseErrorKind::Arithmetic(err) => SysFileError::at(e.line, e.column, err.to_string()),
        }
    }
}

/// Hints given in the file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FileHints {
    pub xi: Option<Vec<Var>>,
    pub inverse: Option<Vec<(Var, Scalar)>>,
    pub integrals: Option<Vec<Scalar>>,
}

/// A parsed system file before validation of the dynamics.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemFile {
    pub name: String,
    pub states: Vec<Var>,
    pub inputs: Vec<Var>,
    pub equations: Vec<Scalar>,
    pub equilibrium: BTreeMap<Var, Rational>,
    pub hints: FileHints,
}

impl SystemFile {
    /// Validates the file content as a system.
    pub fn to_system(&self) -> Result<DiscreteSystem, SystemError> {
        DiscreteSystem::new(
            self.name.clone(),
            self.states.clone(),
            self.inputs.clone(),
            self.equations.clone(),
            self.equilibrium.clone(),
            AdaptedChartHint {
                xi: self.hints.xi.clone(),
                inverse: self.hints.inverse.clone(),
            },
        )
    }
}

/// A piece of text with the 1-based position of its first character.
#[derive(Clone, Debug)]
struct Span<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Span<'a> {
    fn trim(&self) -> Span<'a> {
        let start = self.text.len() - self.text.trim_start().len();
        Span {
            text: self.text.trim(),
            line: self.line,
            column: self.column + self.text[..start].chars().count(),
        }
    }

    fn split_at_char(&self, c: char) -> Option<(Span<'a>, Span<'a>)> {
        let i = self.text.find(c)?;
        let left = Span {
            text: &self.text[..i],
            line: self.line,
            column: self.column,
        };
        let right = Span {
            text: &self.text[i + c.len_utf8()..],
            line: self.line,
            column: self.column + self.text[..i].chars().count() + 1,
        };
        Some((left, right))
    }

    fn split_commas(&self) -> Vec<Span<'a>> {
        let mut out = Vec::new();
        let mut rest = self.clone();
        while let Some((l, r)) = rest.split_at_char(',') {
            out.push(l.trim());
            rest = r;
        }
        out.push(rest.trim());
        out
    }

    fn err(&self, message: impl Into<String>) -> SysFileError {
        SysFileError::at(self.line, self.column, message)
    }
}

const SECTIONS: [&str; 6] = ["name", "states", "inputs", "dynamics", "equilibrium", "hints"];

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Sort key placing `u2` before `u10`.
fn natural_key(name: &str) -> (String, u64, String) {
    let digits = name.len() - name.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let (head, tail) = name.split_at(name.len() - digits);
    (head.to_string(), tail.parse().unwrap_or(0), name.to_string())
}

fn parse_var_list(span: &Span) -> Result<Vec<Var>, SysFileError> {
    let mut out: Vec<Var> = Vec::new();
    if span.text.trim().is_empty() {
        return Ok(out);
    }
    for item in span.split_commas() {
        if !is_ident(item.text) {
            return Err(item.err(format!("`{}` is not a valid variable name", item.text)));
        }
        let v = Var::new(item.text);
        if out.contains(&v) {
            return Err(item.err(format!("variable `{}` is listed twice", item.text)));
        }
        out.push(v);
    }
    Ok(out)
}

fn parse_expr(span: &Span, declared: Option<&BTreeSet<Var>>) -> Result<Scalar, SysFileError> {
    if span.text.trim().is_empty() {
        return Err(span.err("missing expression"));
    }
    let resolve = |name: &str| {
        let v = Var::new(name);
        match declared {
            Some(d) if !d.contains(&v) => None,
            _ => Some(v),
        }
    };
    Ok(parse_scalar_with(span.text, span.line, span.column, &resolve)?)
}

fn parse_rational_at(span: &Span) -> Result<Rational, SysFileError> {
    let s = parse_scalar_with(span.text, span.line, span.column, &|_| None)?;
    s.constant_value()
        .ok_or_else(|| span.err("expected a rational number"))
}

/// Splits `src` into sections, keeping every content line with its position.
fn sections(src: &str) -> Result<BTreeMap<&'static str, Vec<Span<'_>>>, SysFileError> {
    let mut out: BTreeMap<&'static str, Vec<Span>> = BTreeMap::new();
    let mut current: Option<&'static str> = None;
    for (i, raw) in src.lines().enumerate() {
        let text = raw.split('#').next().unwrap_or("");
        let span = Span {
            text,
            line: i + 1,
            column: 1,
        };
        if text.trim().is_empty() {
            continue;
        }
        let indented = text.starts_with(' ') || text.starts_with('\t');
        if !indented {
            if let Some((key, rest)) = span.split_at_char(':') {
                let k = key.text.trim();
                if is_ident(k) {
                    let Some(&name) = SECTIONS.iter().find(|s| **s == k) else {
                        return Err(key.err(format!(
                            "unknown section `{k}`; expected one of {}",
                            SECTIONS.join(", ")
                        )));
                    };
                    if out.contains_key(name) {
                        return Err(key.err(format!("section `{name}` appears twice")));
                    }
                    let entry = out.entry(name).or_default();
                    if !rest.text.trim().is_empty() {
                        entry.push(rest.trim());
                    }
                    current = Some(name);
                    continue;
                }
            }
        }
        match current {
            Some(name) => out.entry(name).or_default().push(span.trim()),
            None => return Err(span.trim().err("expected a section header such as `dynamics:`")),
        }
    }
    Ok(out)
}

fn single<'a>(lines: &[Span<'a>], section: &str) -> Result<Option<Span<'a>>, SysFileError> {
    match lines {
        [] => Ok(None),
        [one] => Ok(Some(one.clone())),
        [_, second, ..] => Err(second.err(format!("section `{section}` takes a single line"))),
    }
}

/// Parses the text of a system file.
pub fn parse_system_str(src: &str, default_name: &str) -> Result<SystemFile, SysFileError> {
    let secs = sections(src)?;
    let empty = Vec::new();
    let get = |k: &str| secs.get(k).unwrap_or(&empty);

    let name = match single(get("name"), "name")? {
        Some(s) => s.text.to_string(),
        None => default_name.to_string(),
    };
    let declared_states = single(get("states"), "states")?
        .map(|s| parse_var_list(&s))
        .transpose()?;
    let declared_inputs = single(get("inputs"), "inputs")?
        .map(|s| parse_var_list(&s))
        .transpose()?;

    // dynamics: `x+ = expr`
    let mut lhs: Vec<(Var, Span)> = Vec::new();
    let mut rhs: Vec<Span> = Vec::new();
    for line in get("dynamics") {
        let Some((l, r)) = line.split_at_char('=') else {
            return Err(line.err("expected `<state>+ = <expression>`"));
        };
        let l = l.trim();
        let Some(state) = l.text.strip_suffix('+').or_else(|| l.text.strip_suffix('⁺')) else {
            return Err(l.err("left-hand side must be a state followed by `+`, as in `x1+`"));
        };
        let state = state.trim();
        if !is_ident(state) {
            return Err(l.err(format!("`{state}` is not a valid state name")));
        }
        let v = Var::new(state);
        if lhs.iter().any(|(w, _)| *w == v) {
            return Err(l.err(format!("state `{state}` has two equations")));
        }
        lhs.push((v, l));
        rhs.push(r);
    }
    if lhs.is_empty() {
        return Err(SysFileError::at(1, 1, "no `dynamics:` section with equations"));
    }

    let states = match declared_states {
        Some(s) => {
            for (v, span) in &lhs {
                if !s.contains(v) {
                    return Err(span.err(format!("`{v}` is not listed under `states`")));
                }
            }
            if let Some(missing) = s.iter().find(|v| !lhs.iter().any(|(w, _)| w == *v)) {
                let at = &get("states")[0];
                return Err(at.err(format!("state `{missing}` has no equation")));
            }
            s
        }
        None => lhs.iter().map(|(v, _)| v.clone()).collect(),
    };
    let inputs = match declared_inputs {
        Some(i) => i,
        None => {
            let mut found: BTreeSet<Var> = BTreeSet::new();
            for r in &rhs {
                found.extend(parse_expr(&r.trim(), None)?.vars());
            }
            let mut inputs: Vec<Var> = found.into_iter().filter(|v| !states.contains(v)).collect();
            inputs.sort_by_key(|v| natural_key(v.name()));
            inputs
        }
    };
    let declared: BTreeSet<Var> = states.iter().chain(&inputs).cloned().collect();
    let mut by_state: BTreeMap<Var, Scalar> = BTreeMap::new();
    for ((v, _), r) in lhs.iter().zip(&rhs) {
        by_state.insert(v.clone(), parse_expr(&r.trim(), Some(&declared))?);
    }
    let equations: Vec<Scalar> = states.iter().map(|v| by_state[v].clone()).collect();

    let mut equilibrium = BTreeMap::new();
    let eq_lines = get("equilibrium");
    let joined: Vec<Span> = eq_lines.iter().flat_map(|l| l.split_commas()).filter(|s| !s.text.is_empty()).collect();
    let tuple = eq_lines.first().is_some_and(|l| l.text.starts_with('('));
    if tuple {
        let line = &eq_lines[0];
        let inner = line
            .text
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| line.err("expected `(v1, v2, ...)`"))?;
        let span = Span {
            text: inner,
            line: line.line,
            column: line.column + 1,
        };
        let values = span.split_commas();
        let all: Vec<&Var> = states.iter().chain(&inputs).collect();
        if values.len() != all.len() {
            return Err(line.err(format!(
                "equilibrium tuple has {} entries, expected {} (states then inputs)",
                values.len(),
                all.len()
            )));
        }
        for (v, s) in all.into_iter().zip(&values) {
            equilibrium.insert(v.clone(), parse_rational_at(s)?);
        }
    } else {
        for item in joined {
            let Some((k, val)) = item.split_at_char('=') else {
                return Err(item.err("expected `<variable> = <rational>`"));
            };
            let k = k.trim();
            let v = Var::new(k.text);
            if !declared.contains(&v) {
                return Err(k.err(format!("`{}` is not a state or input", k.text)));
            }
            equilibrium.insert(v, parse_rational_at(&val.trim())?);
        }
    }

    let mut hints = FileHints::default();
    for line in get("hints") {
        let t = line.text;
        if let Some(rest) = t.strip_prefix("inverse") {
            let span = Span {
                text: rest,
                line: line.line,
                column: line.column + "inverse".len(),
            };
            let Some((k, e)) = span.split_at_char('=') else {
                return Err(line.err("expected `inverse <variable> = <expression>`"));
            };
            let k = k.trim();
            if !declared.contains(&Var::new(k.text)) {
                return Err(k.err(format!("`{}` is not a state or input", k.text)));
            }
            hints
                .inverse
                .get_or_insert_with(Vec::new)
                .push((Var::new(k.text), parse_expr(&e.trim(), None)?));
            continue;
        }
        let Some((k, rest)) = line.split_at_char('=') else {
            return Err(line.err("expected `xi = ...`, `inverse <variable> = ...` or `integrals = ...`"));
        };
        match k.text.trim() {
            "xi" => {
                let vars = parse_var_list(&rest.trim())?;
                if let Some(v) = vars.iter().find(|v| !declared.contains(v)) {
                    return Err(rest.trim().err(format!("`{v}` is not a state or input")));
                }
                hints.xi = Some(vars);
            }
            "integrals" => {
                let list = rest
                    .trim()
                    .split_commas()
                    .iter()
                    .map(|s| parse_expr(s, Some(&declared)))
                    .collect::<Result<Vec<_>, _>>()?;
                hints.integrals = Some(list);
            }
            other => return Err(k.trim().err(format!("unknown hint `{other}`"))),
        }
    }

    Ok(SystemFile {
        name,
        states,
        inputs,
        equations,
        equilibrium,
        hints,
    })
}

/// Reads and parses a system file; the default name is the file stem.
pub fn parse_system_file(path: &Path) -> Result<SystemFile, SysFileError> {
    let src = std::fs::read_to_string(path).map_err(|source| SysFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("system");
    parse_system_str(&src, stem)
}

/// Reads, parses and validates a system file.
pub fn parse_system(path: &Path) -> Result<DiscreteSystem, SysFileError> {
    Ok(parse_system_file(path)?.to_system()?)
}

/// `x1, x3` as given on the command line.
pub fn parse_xi_hint(src: &str) -> Result<Vec<Var>, SysFileError> {
    let text = src.trim().strip_prefix("xi").map(|r| r.trim_start().trim_start_matches('=')).unwrap_or(src);
    parse_var_list(&Span {
        text,
        line: 1,
        column: 1,
    })
}

/// `x1, x3, x2 + 3x4` as given on the command line.
pub fn parse_integrals_hint(src: &str, declared: &[Var]) -> Result<Vec<Scalar>, SysFileError> {
    let set: BTreeSet<Var> = declared.iter().cloned().collect();
    Span {
        text: src,
        line: 1,
        column: 1,
    }
    .split_commas()
    .iter()
    .map(|s| parse_expr(s, Some(&set)))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::parse_scalar;

    const EXAMPLE: &str = "\
# four states, two inputs
name: paper example
states: x1, x2, x3, x4
inputs: u1, u2
dynamics:
  x1+ = (x2+x3+3x4)/(u1+2u2+1)
  x2+ = x1(x3+1)(u1+2u2-3)+x4-3u2
  x3+ = u1+2u2
  x4+ = x1(x3+1)+u2
equilibrium: (0, 0, 0, 0, 0, 0)
";

    #[test]
    fn example_file() {
        let f = parse_system_str(EXAMPLE, "x").unwrap();
        assert_eq!(f.name, "paper example");
        let sys = f.to_system().unwrap();
        assert_eq!((sys.n(), sys.m()), (4, 2));
        assert_eq!(sys.f()[1], parse_scalar("x1*x3*u1 + 2x1*x3*u2 - 3x1*x3 + x1*u1 + 2x1*u2 - 3x1 + x4 - 3u2").unwrap());
    }

    #[test]
    fn inferred_declarations() {
        let f = parse_system_str("dynamics:\n  x1+ = x1 + u1\n", "one").unwrap();
        assert_eq!(f.name, "one");
        assert_eq!(f.states, vec![Var::new("x1")]);
        assert_eq!(f.inputs, vec![Var::new("u1")]);
        assert!(f.to_system().is_ok());
        let f = parse_system_str("dynamics:\n x+ = u10 + u2 + x\n", "s").unwrap();
        assert_eq!(f.inputs, vec![Var::new("u2"), Var::new("u10")]);
    }

    #[test]
    fn non_rational_is_located() {
        let err = parse_system_str("states: x1\ninputs: u\ndynamics:\n  x1+ = u + sin(x1)\n", "s").unwrap_err();
        match err {
            SysFileError::NonRational { line, column, name } => {
                assert_eq!((line, column, name.as_str()), (4, 13, "sin"));
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_system_str("states: x1\ninputs: u\ndynamics:\n  x1+ = u + y\n", "s").unwrap_err();
        assert!(matches!(err, SysFileError::Syntax { line: 4, column: 13, .. }), "{err}");
        let err = parse_system_str("states: x1\nfoo: 1\n", "s").unwrap_err();
        assert!(matches!(err, SysFileError::Syntax { line: 2, column: 1, .. }), "{err}");
        let err = parse_system_str("states: x1, x2\ninputs: u\ndynamics:\n x1+ = u\n", "s").unwrap_err();
        assert!(err.to_string().contains("x2"), "{err}");
    }

    #[test]
    fn equilibrium_and_hints() {
        let src = "\
dynamics:
  x1+ = u
  x2+ = x1 + x2*u
equilibrium: x1 = 1, u = 1, x2 = -1/2
hints:
  xi = x2
  inverse x1 = th2 - xi1*th1
  inverse u = th1
  integrals = x1
";
        let f = parse_system_str(src, "s").unwrap();
        assert_eq!(f.equilibrium[&Var::new("x2")], Rational::new((-1).into(), 2.into()));
        assert_eq!(f.hints.xi, Some(vec![Var::new("x2")]));
        assert_eq!(f.hints.inverse.as_ref().unwrap().len(), 2);
        assert_eq!(f.hints.integrals, Some(vec![parse_scalar("x1").unwrap()]));
        assert!(matches!(f.to_system(), Err(SystemError::EquilibriumMismatch { .. })));
    }

    #[test]
    fn submersivity_is_checked() {
        let src = "states: x1, x2\ninputs: u\ndynamics:\n  x1+ = u\n  x2+ = u^2\n";
        let f = parse_system_str(src, "s").unwrap();
        assert!(matches!(f.to_system(), Err(SystemError::NotSubmersive { rank: 1, n: 2 })));
    }

    #[test]
    fn command_line_hints() {
        assert_eq!(parse_xi_hint("xi = x1, x3").unwrap(), vec![Var::new("x1"), Var::new("x3")]);
        assert_eq!(parse_xi_hint("x1").unwrap(), vec![Var::new("x1")]);
        let vars = [Var::new("x1"), Var::new("x2")];
        assert_eq!(parse_integrals_hint("x1, x2 + 3x1", &vars).unwrap().len(), 2);
        assert!(parse_integrals_hint("x3", &vars).is_err());
    }
}
