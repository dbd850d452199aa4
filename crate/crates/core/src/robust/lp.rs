//! A small linear/mixed-integer program representation with a writer and
//! reader for the CPLEX LP text format.

use std::collections::HashMap;
use std::fmt::Write as _;

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpVar {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LpRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, k)| k * x[j]).sum()
    }

    /// Distance to the boundary, negative when violated.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => self.rhs - a,
            Sense::Ge => a - self.rhs,
            Sense::Eq => -(a - self.rhs).abs(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub minimize: bool,
    pub objective: Vec<(usize, f64)>,
    pub vars: Vec<LpVar>,
    pub rows: Vec<LpRow>,
    /// Written as `\` comment lines before the objective.
    pub comments: Vec<String>,
}

impl LinearProgram {
    pub fn new(minimize: bool) -> Self {
        Self {
            minimize,
            ..Self::default()
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> usize {
        self.vars.push(LpVar {
            name: name.into(),
            lower,
            upper,
            kind,
        });
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(LpRow {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn var_id(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn row(&self, name: &str) -> Option<&LpRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, k)| k * x[j]).sum()
    }

    /// Largest violation of a row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| (-r.slack(x)).max(0.0));
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Solves the program with the bundled simplex/branch-and-bound solver.
    /// Meant for small programs and cross-checks.
    pub fn solve(&self) -> Result<(f64, Vec<f64>)> {
        let dir = if self.minimize {
            OptimizationDirection::Minimize
        } else {
            OptimizationDirection::Maximize
        };
        let mut obj = vec![0.0; self.vars.len()];
        for &(j, k) in &self.objective {
            obj[j] += k;
        }
        let mut p = Problem::new(dir);
        let vars: Vec<_> = self
            .vars
            .iter()
            .zip(&obj)
            .map(|(v, &c)| match v.kind {
                VarKind::Binary => p.add_binary_var(c),
                VarKind::Continuous => p.add_var(c, (v.lower, v.upper)),
            })
            .collect();
        for r in &self.rows {
            let op = match r.sense {
                Sense::Le => ComparisonOp::Le,
                Sense::Ge => ComparisonOp::Ge,
                Sense::Eq => ComparisonOp::Eq,
            };
            let terms: Vec<_> = r.terms.iter().map(|&(j, k)| (vars[j], k)).collect();
            p.add_constraint(terms, op, r.rhs);
        }
        let sol = p
            .solve()
            .map_err(|e| Error::Internal(format!("solver: {e}")))?
            .into_solution()
            .map_err(|_| Error::Internal("solver interrupted".into()))?;
        let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
        Ok((self.objective_value(&x), x))
    }
}

fn num(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

fn terms_text(out: &mut String, vars: &[LpVar], terms: &[(usize, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
    }
    for &(j, k) in terms {
        let sign = if k.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(k.abs()), vars[j].name);
    }
}

/// Renders the program in LP format. Output is a pure function of the program.
pub fn write_lp(lp: &LinearProgram) -> String {
    let mut out = String::new();
    for c in &lp.comments {
        let _ = writeln!(out, "\\ {c}");
    }
    out.push_str(if lp.minimize { "Minimize\n" } else { "Maximize\n" });
    out.push_str(" obj:");
    terms_text(&mut out, &lp.vars, &lp.objective);
    out.push_str("\nSubject To\n");
    for r in &lp.rows {
        let _ = write!(out, " {}:", r.name);
        terms_text(&mut out, &lp.vars, &r.terms);
        let _ = writeln!(out, " {} {}", r.sense.symbol(), num(r.rhs));
    }
    out.push_str("Bounds\n");
    for v in lp.vars.iter().filter(|v| v.kind == VarKind::Continuous) {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
    }
    let binaries: Vec<&str> = lp
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for b in binaries {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Done,
}

struct Reader {
    lp: LinearProgram,
    index: HashMap<String, usize>,
}

impl Reader {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.index.get(name) {
            return j;
        }
        // LP default bounds are [0, inf).
        let j = self.lp.add_var(name, 0.0, f64::INFINITY, VarKind::Continuous);
        self.index.insert(name.to_string(), j);
        j
    }

    fn parse_num(tok: &str) -> Result<f64> {
        match tok.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            _ => tok
                .parse()
                .map_err(|_| Error::Malformed(format!("LP: expected a number, found `{tok}`"))),
        }
    }

    fn linear(&mut self, toks: &[&str]) -> Result<Vec<(usize, f64)>> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for &t in toks {
            match t {
                "+" => sign = 1.0,
                "-" => sign = -1.0,
                _ => match t.parse::<f64>() {
                    Ok(v) => coef = Some(coef.unwrap_or(1.0) * v),
                    Err(_) => {
                        let j = self.var(t);
                        terms.push((j, sign * coef.take().unwrap_or(1.0)));
                        sign = 1.0;
                    }
                },
            }
        }
        if coef.is_some_and(|c| c != 0.0) {
            return Err(Error::Malformed("LP: constant terms are not supported".into()));
        }
        Ok(terms)
    }
}

/// Reads an LP-format document. Supports the subset produced by
/// [`write_lp`]: one row per line, `free` and two-sided bounds, binaries.
pub fn parse_lp(text: &str) -> Result<LinearProgram> {
    let mut rd = Reader {
        lp: LinearProgram::new(true),
        index: HashMap::new(),
    };
    let mut section = None;
    for raw in text.lines() {
        let line = raw.trim();
        if let Some(c) = line.strip_prefix('\\') {
            rd.lp.comments.push(c.trim().to_string());
            continue;
        }
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "minimize" | "minimum" | "min" => {
                rd.lp.minimize = true;
                section = Some(Section::Objective);
                continue;
            }
            "maximize" | "maximum" | "max" => {
                rd.lp.minimize = false;
                section = Some(Section::Objective);
                continue;
            }
            "subject to" | "such that" | "st" | "s.t." => {
                section = Some(Section::Constraints);
                continue;
            }
            "bounds" => {
                section = Some(Section::Bounds);
                continue;
            }
            "binaries" | "binary" | "bin" => {
                section = Some(Section::Binaries);
                continue;
            }
            "end" => {
                section = Some(Section::Done);
                continue;
            }
            _ => {}
        }
        let (label, body) = match line.split_once(':') {
            Some((l, b)) => (Some(l.trim()), b),
            None => (None, line),
        };
        let toks: Vec<&str> = body.split_whitespace().collect();
        match section {
            Some(Section::Objective) => {
                let terms = rd.linear(&toks)?;
                rd.lp.objective.extend(terms);
            }
            Some(Section::Constraints) => {
                let pos = toks
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "=" | "=<" | "=>" | "<" | ">"))
                    .ok_or_else(|| Error::Malformed(format!("LP: row without a sense: `{line}`")))?;
                let sense = match toks[pos] {
                    "<=" | "=<" | "<" => Sense::Le,
                    ">=" | "=>" | ">" => Sense::Ge,
                    _ => Sense::Eq,
                };
                let [rhs] = &toks[pos + 1..] else {
                    return Err(Error::Malformed(format!("LP: bad right-hand side: `{line}`")));
                };
                let rhs = Reader::parse_num(rhs)?;
                let terms = rd.linear(&toks[..pos])?;
                let name = label.map_or_else(|| format!("r{}", rd.lp.rows.len()), str::to_string);
                rd.lp.add_row(name, terms, sense, rhs);
            }
            Some(Section::Bounds) => match toks.as_slice() {
                [v, f] if f.eq_ignore_ascii_case("free") => {
                    let j = rd.var(v);
                    rd.lp.vars[j].lower = f64::NEG_INFINITY;
                    rd.lp.vars[j].upper = f64::INFINITY;
                }
                [lo, "<=", v, "<=", hi] => {
                    let (lo, hi) = (Reader::parse_num(lo)?, Reader::parse_num(hi)?);
                    let j = rd.var(v);
                    rd.lp.vars[j].lower = lo;
                    rd.lp.vars[j].upper = hi;
                }
                [v, "<=", hi] => {
                    let hi = Reader::parse_num(hi)?;
                    let j = rd.var(v);
                    rd.lp.vars[j].upper = hi;
                }
                [v, ">=", lo] => {
                    let lo = Reader::parse_num(lo)?;
                    let j = rd.var(v);
                    rd.lp.vars[j].lower = lo;
                }
                _ => return Err(Error::Malformed(format!("LP: unsupported bound `{line}`"))),
            },
            Some(Section::Binaries) => {
                for t in toks {
                    let j = rd.var(t);
                    let v = &mut rd.lp.vars[j];
                    v.kind = VarKind::Binary;
                    v.lower = 0.0;
                    v.upper = 1.0;
                }
            }
            Some(Section::Done) => return Err(Error::Malformed("LP: text after End".into())),
            None => return Err(Error::Malformed(format!("LP: text before the objective: `{line}`"))),
        }
    }
    if section != Some(Section::Done) {
        return Err(Error::Malformed("LP: missing End".into()));
    }
    Ok(rd.lp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack() -> LinearProgram {
        let mut lp = LinearProgram::new(false);
        let x = lp.add_var("x", 0.0, 1.0, VarKind::Binary);
        let y = lp.add_var("y", 0.0, 1.0, VarKind::Binary);
        let z = lp.add_var("z", f64::NEG_INFINITY, f64::INFINITY, VarKind::Continuous);
        lp.objective = vec![(x, 3.0), (y, 2.0), (z, -1.0)];
        lp.add_row("cap", vec![(x, 2.0), (y, 2.0)], Sense::Le, 3.0);
        lp.add_row("link", vec![(z, 1.0), (x, -0.1)], Sense::Ge, -0.25);
        lp
    }

    #[test]
    fn text_round_trip() {
        let lp = knapsack();
        let text = write_lp(&lp);
        let back = parse_lp(&text).unwrap();
        assert_eq!(back.vars, lp.vars);
        assert_eq!(back.rows, lp.rows);
        assert_eq!(back.objective, lp.objective);
        assert_eq!(write_lp(&back), text);
    }

    #[test]
    fn bundled_solver_handles_binaries() {
        let (v, x) = knapsack().solve().unwrap();
        assert_eq!(x[0].round(), 1.0);
        assert_eq!(x[1].round(), 0.0);
        assert!((v - (3.0 - (-0.15))).abs() < 1e-9, "{v}");
    }

    #[test]
    fn rejects_rows_without_sense() {
        let text = "Minimize\n obj: x\nSubject To\n c1: + 1 x 3\nEnd\n";
        assert!(matches!(parse_lp(text), Err(Error::Malformed(_))));
    }
}
