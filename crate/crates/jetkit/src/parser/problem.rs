//! Sectioned problem files: variables, rules, forms, fields, morphisms,
//! searches, a soliton recipe and assertions.

use std::collections::HashMap;
use std::sync::Arc;

use super::{parse_expr_at, ParseError, Scope};
use crate::covering::Covering;
use crate::expr::{Atom, Coef, Expr, MultiIndex};
use crate::forms::{HForm, Mat, ZcrConvention};
use crate::jet::{EqSystem, Param, Rule, SystemSpec, Var};
use crate::morphism::Morphism;
use crate::numeric::Grid;
use crate::pseudosym::{FieldForm, PseudoField};
use crate::search::{Ansatz, Slot};

/// Form a field is pseudo-prolonged against, by name.
#[derive(Clone, Debug, PartialEq)]
pub enum FormRef {
    None,
    Scalar { mu: String, c: Coef },
    Matrix(String),
}

/// Field as written: base components, vector components and explicit generators.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub form: FormRef,
    pub a: Vec<Vec<Expr>>,
    pub b: Vec<(String, Vec<Expr>)>,
    pub phi: Vec<(String, Vec<Expr>)>,
}

#[derive(Clone, Debug)]
pub struct NamedField {
    pub name: String,
    pub decl: FieldDecl,
    pub field: PseudoField,
    /// Nonlocal variables of the sub-covering the field lives on; empty means all.
    pub on: Vec<String>,
    pub system: Option<Arc<EqSystem>>,
}

#[derive(Clone, Debug)]
pub struct NamedMorphism {
    pub name: String,
    pub target: String,
    pub morphism: Morphism,
}

pub struct Target {
    pub name: String,
    pub system: EqSystem,
}

#[derive(Clone, Debug)]
pub struct SearchDecl {
    pub name: String,
    pub mu: String,
    pub c_values: Vec<Coef>,
    pub slots: Vec<Slot>,
    pub bounds: Vec<(String, u32)>,
}

#[derive(Clone, Debug)]
pub struct SolitonDecl {
    pub morphism: String,
    pub seed: Vec<(String, Expr)>,
    pub params: Vec<(String, f64)>,
    pub ic: Vec<(String, f64)>,
    pub origin: (f64, f64),
    pub grid: Grid,
    /// Closed-form expectations for target components.
    pub exact: Vec<(String, Expr)>,
    /// Source text of each line, kept for rendering.
    pub lines: Vec<String>,
}

/// One `[assert]` line.
#[derive(Clone, Debug, PartialEq)]
pub enum Assertion {
    Valid,
    Conservation(String),
    Zcr(String, ZcrForm),
    Flat(String),
    Riccati { form: String, pivot: usize, mu: String },
    Pseudosymmetry(String),
    RPseudosymmetry(String),
    Invariant { field: String, expr: Expr },
    Morphism { morphism: String, target: String },
    Regular(String),
    Factor { field: String, morphism: String, target: String },
    Zero(Expr),
    Search { search: String, dim: usize },
    Relations { field: Option<String>, morphism: String, target: String, basis: Vec<Expr> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZcrForm {
    Convention(ZcrConvention),
    Wedge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssertLine {
    pub text: String,
    pub line: usize,
    pub kind: Assertion,
}

impl AssertLine {
    pub fn keyword(&self) -> &str {
        self.text.split_whitespace().next().unwrap_or("").trim_end_matches(':')
    }
}

/// Parsed and validated problem file.
pub struct Problem {
    /// Base equation merged with its covering.
    pub system: EqSystem,
    pub forms: Vec<(String, HForm)>,
    pub fields: Vec<NamedField>,
    pub morphisms: Vec<NamedMorphism>,
    pub targets: Vec<Target>,
    pub searches: Vec<SearchDecl>,
    pub soliton: Option<SolitonDecl>,
    pub assertions: Vec<AssertLine>,
}

impl Problem {
    pub fn scope(&self) -> Scope {
        scope_of(self.system.spec())
    }

    /// The base equation without nonlocal variables.
    pub fn base_system(&self) -> Result<EqSystem, crate::jet::JetError> {
        EqSystem::new(Covering::new(self.system.spec().clone()).base())
    }

    pub fn covering(&self) -> Covering {
        Covering::new(self.system.spec().clone())
    }

    pub fn form(&self, name: &str) -> Option<&HForm> {
        self.forms.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn field(&self, name: &str) -> Option<&PseudoField> {
        self.fields.iter().find(|f| f.name == name).map(|f| &f.field)
    }

    /// System a field is defined on: its sub-covering, or the whole problem.
    pub fn field_system(&self, name: &str) -> &EqSystem {
        self.fields.iter().find(|f| f.name == name).and_then(|f| f.system.as_deref()).unwrap_or(&self.system)
    }

    pub fn morphism(&self, name: &str) -> Option<&Morphism> {
        self.morphisms.iter().find(|m| m.name == name).map(|m| &m.morphism)
    }

    pub fn target(&self, name: &str) -> Option<&EqSystem> {
        self.targets.iter().find(|t| t.name == name).map(|t| &t.system)
    }

    pub fn search(&self, name: &str) -> Option<&SearchDecl> {
        self.searches.iter().find(|s| s.name == name)
    }

    /// Ansatz of a declared search.
    pub fn ansatz(&self, s: &SearchDecl) -> Option<Ansatz> {
        let mu = self.form(&s.mu)?.clone();
        let spec = self.system.spec();
        let bounds: Vec<(Expr, u32)> = s.bounds.iter().map(|(v, d)| (spec.coord(v), *d)).collect();
        Some(Ansatz { mu, c_values: s.c_values.clone(), slots: s.slots.clone(), monomials: Ansatz::monomials_upto(&bounds) })
    }
}

/// Scope with every declared name of a system.
pub fn scope_of(spec: &SystemSpec) -> Scope {
    Scope {
        independent: spec.independent.clone(),
        dependent: spec.vars.iter().map(|v| v.name.clone()).collect(),
        params: spec.params.iter().map(|p| p.name.clone()).collect(),
        strict: true,
        aliases: HashMap::new(),
    }
}

/// Logical line: comment stripped, continuation lines joined while brackets are open.
#[derive(Clone, Debug)]
struct Ln {
    no: usize,
    /// 0-based column of the first character of `text`.
    col: usize,
    text: String,
}

impl Ln {
    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.no, col: self.col + 1, msg: msg.into() }
    }

    fn err_at(&self, offset: usize, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.no, col: self.col + offset + 1, msg: msg.into() }
    }

    /// Sub-line starting at a char offset, trimmed.
    fn slice(&self, from: usize) -> Ln {
        let rest: String = self.text.chars().skip(from).collect();
        let lead = rest.chars().take_while(|c| c.is_whitespace()).count();
        Ln { no: self.no, col: self.col + from + lead, text: rest.trim().to_string() }
    }

    /// Splits at the first occurrence of `sep` outside brackets.
    fn split_once(&self, sep: char) -> Option<(Ln, Ln)> {
        let mut depth = 0i32;
        for (i, c) in self.text.chars().enumerate() {
            match c {
                '(' | '[' => depth += 1,
                ')' | ']' => depth -= 1,
                _ if c == sep && depth == 0 => {
                    let head: String = self.text.chars().take(i).collect();
                    let head = Ln { no: self.no, col: self.col, text: head.trim_end().to_string() };
                    return Some((head, self.slice(i + 1)));
                }
                _ => {}
            }
        }
        None
    }

    fn words(&self) -> Vec<&str> {
        self.text.split_whitespace().collect()
    }
}

fn logical_lines(text: &str) -> Vec<Ln> {
    let mut out: Vec<Ln> = Vec::new();
    let mut pending: Option<(Ln, i32)> = None;
    for (k, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let depth: i32 = body.chars().map(|c| match c {
            '(' | '[' => 1,
            ')' | ']' => -1,
            _ => 0,
        }).sum();
        if let Some((mut ln, d)) = pending.take() {
            ln.text.push(' ');
            ln.text.push_str(body.trim());
            let d = d + depth;
            if d > 0 {
                pending = Some((ln, d));
            } else {
                out.push(ln);
            }
            continue;
        }
        if body.trim().is_empty() {
            continue;
        }
        // a line opening with a binary operator continues the previous one
        if body.trim_start().starts_with(['+', '-', '*', '/', '^']) {
            if let Some(last) = out.last_mut() {
                last.text.push(' ');
                last.text.push_str(body.trim());
                if depth > 0 {
                    pending = Some((out.pop().unwrap(), depth));
                }
                continue;
            }
        }
        let col = body.chars().take_while(|c| c.is_whitespace()).count();
        let ln = Ln { no: k + 1, col, text: body.trim().to_string() };
        if depth > 0 {
            pending = Some((ln, depth));
        } else {
            out.push(ln);
        }
    }
    if let Some((ln, _)) = pending {
        out.push(ln);
    }
    out
}

struct Section {
    header: Ln,
    name: String,
    arg: Option<String>,
    lines: Vec<Ln>,
}

fn sections(lines: Vec<Ln>) -> Result<Vec<Section>, ParseError> {
    let mut out: Vec<Section> = Vec::new();
    for ln in lines {
        if ln.text.starts_with('[') && !ln.text.starts_with("[[") {
            let inner = ln.text.strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(|| ln.err("malformed section header"))?;
            let mut w = inner.split_whitespace();
            let name = w.next().ok_or_else(|| ln.err("empty section header"))?.to_string();
            let arg = w.next().map(|s| s.to_string());
            const KNOWN: [&str; 11] =
                ["vars", "params", "equations", "covering", "forms", "fields", "morphisms", "target", "search", "soliton", "assert"];
            if !KNOWN.contains(&name.as_str()) {
                return Err(ln.err(format!("unknown section `{name}`")));
            }
            if (name == "target") != arg.is_some() {
                return Err(ln.err("`[target NAME]` needs exactly one name; other sections take none"));
            }
            out.push(Section { header: ln, name, arg, lines: Vec::new() });
        } else {
            match out.last_mut() {
                Some(s) => s.lines.push(ln),
                None => return Err(ln.err("content before the first section header")),
            }
        }
    }
    Ok(out)
}

fn expr(ln: &Ln, scope: &Scope) -> Result<Expr, ParseError> {
    if ln.text.is_empty() {
        return Err(ln.err("missing expression"));
    }
    parse_expr_at(&ln.text, scope, ln.no, ln.col)
}

fn rational(ln: &Ln) -> Result<Coef, ParseError> {
    expr(ln, &Scope { strict: true, ..Scope::default() })?.as_rational().ok_or_else(|| ln.err("expected a rational number"))
}

fn real(ln: &Ln) -> Result<f64, ParseError> {
    let e = expr(ln, &Scope { strict: true, ..Scope::default() })?;
    let v = e.eval_f64(&|_| None);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ln.err("expected a finite number"))
    }
}

fn word_ln(ln: &Ln, w: &str) -> Ln {
    let off = ln.text.find(w).map(|b| ln.text[..b].chars().count()).unwrap_or(0);
    Ln { no: ln.no, col: ln.col + off, text: w.to_string() }
}

/// Splits a bracketed list `[a, b, …]` into its top-level entries.
fn bracket_items(ln: &Ln) -> Result<Vec<Ln>, ParseError> {
    let t = &ln.text;
    if !t.starts_with('[') || !t.ends_with(']') {
        return Err(ln.err("expected a bracketed list"));
    }
    let chars: Vec<char> = t.chars().collect();
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 1;
    for (i, &c) in chars.iter().enumerate().take(chars.len() - 1).skip(1) {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                items.push(sub(ln, &chars, start, i));
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err(ln.err_at(i, "unbalanced brackets"));
        }
    }
    items.push(sub(ln, &chars, start, chars.len() - 1));
    if items.iter().any(|x| x.text.is_empty()) {
        return Err(ln.err("empty list entry"));
    }
    Ok(items)
}

fn sub(ln: &Ln, chars: &[char], a: usize, b: usize) -> Ln {
    let s: String = chars[a..b].iter().collect();
    let lead = s.chars().take_while(|c| c.is_whitespace()).count();
    Ln { no: ln.no, col: ln.col + a + lead, text: s.trim().to_string() }
}

fn matrix(ln: &Ln, dim: usize, scope: &Scope) -> Result<Mat, ParseError> {
    let rows = bracket_items(ln)?;
    if rows.len() != dim {
        return Err(ln.err(format!("expected {dim} rows, found {}", rows.len())));
    }
    let mut out = Vec::with_capacity(dim);
    for r in &rows {
        let cells = bracket_items(r)?;
        if cells.len() != dim {
            return Err(r.err(format!("expected {dim} entries, found {}", cells.len())));
        }
        out.push(cells.iter().map(|c| expr(c, scope)).collect::<Result<Vec<_>, _>>()?);
    }
    Mat::new(out).map_err(|e| ln.err(e.to_string()))
}

/// Square matrix written `[[a, b], [c, d]]` on one line.
pub fn parse_matrix(text: &str, scope: &Scope) -> Result<Mat, ParseError> {
    let ln = Ln { no: 1, col: 0, text: text.trim().to_string() };
    let dim = bracket_items(&ln)?.len();
    matrix(&ln, dim, scope)
}

fn vector(ln: &Ln, r: usize, scope: &Scope) -> Result<Vec<Expr>, ParseError> {
    if r == 1 && !ln.text.starts_with('[') {
        return Ok(vec![expr(ln, scope)?]);
    }
    let items = bracket_items(ln)?;
    if items.len() != r {
        return Err(ln.err(format!("expected {r} entries, found {}", items.len())));
    }
    items.iter().map(|c| expr(c, scope)).collect()
}

/// `var_lead = rhs` with the lead a single jet coordinate.
fn rule(ln: &Ln, scope: &Scope, n: usize) -> Result<Rule, ParseError> {
    let (lhs, rhs) = ln.split_once('=').ok_or_else(|| ln.err("expected `lead = rhs`"))?;
    let lead = expr(&lhs, scope)?;
    let Some(Atom::Jet(var, idx)) = lead.as_atom().map(|a| a.atom()) else {
        return Err(lhs.err("left-hand side must be a single jet coordinate"));
    };
    if idx.len() != n || idx.is_zero() {
        return Err(lhs.err("rule lead must be a derivative"));
    }
    Ok(Rule { var: var.to_string(), lead: idx, rhs: expr(&rhs, scope)? })
}

fn check_name(ln: &Ln, name: &str, taken: &mut Vec<String>) -> Result<(), ParseError> {
    let ok = name.chars().next().is_some_and(|c| c.is_alphabetic())
        && name.chars().all(|c| c.is_alphanumeric() || c == '\'')
        && !name.contains('_');
    if !ok {
        return Err(word_ln(ln, name).err(format!("invalid name `{name}`")));
    }
    if taken.iter().any(|t| t == name) {
        return Err(word_ln(ln, name).err(format!("duplicate name `{name}`")));
    }
    taken.push(name.to_string());
    Ok(())
}

/// Local and nonlocal declarations shared by `[vars]` and `[target]`.
fn var_line(ln: &Ln, vars: &mut Vec<Var>, taken: &mut Vec<String>) -> Result<bool, ParseError> {
    let w = ln.words();
    let nonlocal = match w[0] {
        "local" => false,
        "nonlocal" => true,
        _ => return Ok(false),
    };
    if w.len() < 2 {
        return Err(ln.err("expected at least one variable name"));
    }
    for name in &w[1..] {
        check_name(ln, name, taken)?;
        vars.push(Var { name: name.to_string(), nonlocal });
    }
    Ok(true)
}

/// Rules with duplicate and missing-direction checks, then ranking validation.
fn build_system(spec: SystemSpec, rule_lines: &[(Ln, Rule)], header: &Ln) -> Result<EqSystem, ParseError> {
    for (k, (ln, r)) in rule_lines.iter().enumerate() {
        if rule_lines[..k].iter().any(|(_, o)| o.var == r.var && o.lead == r.lead) {
            return Err(ln.err(format!("duplicate rule for the same leading coordinate of `{}`", r.var)));
        }
    }
    let n = spec.n();
    for v in spec.nonlocal_vars() {
        for i in 0..n {
            let lead = MultiIndex::zero(n).inc(i);
            if !spec.rules.iter().any(|r| r.var == v.name && r.lead == lead) {
                return Err(header.err(format!("nonlocal `{}` has no rule along `{}`", v.name, spec.independent[i])));
            }
        }
        if spec.rules.iter().filter(|r| r.var == v.name).count() != n {
            return Err(header.err(format!("nonlocal `{}` needs exactly one rule per independent variable", v.name)));
        }
    }
    EqSystem::new(spec).map_err(|e| {
        let at = rule_lines.first().map(|(l, _)| l).unwrap_or(header);
        at.err(e.to_string())
    })
}

/// Parses a problem file into a validated [`Problem`].
pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let secs = sections(logical_lines(text))?;
    let mut used = vec![false; secs.len()];
    let find = |name: &'static str| secs.iter().enumerate().filter(move |(_, s)| s.name == name);
    for name in ["vars", "params", "equations", "covering", "forms", "fields", "morphisms", "search", "soliton", "assert"] {
        if let Some((_, s)) = find(name).nth(1) {
            return Err(s.header.err(format!("section `[{name}]` appears twice")));
        }
    }
    let eof = Ln { no: text.lines().count().max(1), col: 0, text: String::new() };

    // [vars]
    let mut independent: Vec<String> = Vec::new();
    let mut vars: Vec<Var> = Vec::new();
    let mut taken: Vec<String> = Vec::new();
    let (vi, vs) = find("vars").next().ok_or_else(|| eof.err("missing `[vars]` section"))?;
    used[vi] = true;
    for ln in &vs.lines {
        let w = ln.words();
        if w[0] == "independent" {
            if !independent.is_empty() {
                return Err(ln.err("independent variables declared twice"));
            }
            for name in &w[1..] {
                check_name(ln, name, &mut taken)?;
                independent.push(name.to_string());
            }
        } else if !var_line(ln, &mut vars, &mut taken)? {
            return Err(ln.err(format!("unknown declaration `{}`", w[0])));
        }
    }
    if independent.is_empty() {
        independent = vec!["x".into(), "t".into()];
        taken.extend(independent.iter().cloned());
    }
    let n = independent.len();

    // [params]
    let mut params: Vec<Param> = Vec::new();
    let mut distinct: Vec<(String, String)> = Vec::new();
    let mut distinct_lines: Vec<Ln> = Vec::new();
    if let Some((pi, ps)) = find("params").next() {
        used[pi] = true;
        for ln in &ps.lines {
            let w = ln.words();
            if w[0] == "distinct" {
                if w.len() != 3 {
                    return Err(ln.err("expected `distinct a b`"));
                }
                distinct.push((w[1].to_string(), w[2].to_string()));
                distinct_lines.push(ln.clone());
                continue;
            }
            let nonzero = w.last() == Some(&"nonzero");
            let names = if nonzero { &w[..w.len() - 1] } else { &w[..] };
            if names.is_empty() {
                return Err(ln.err("expected parameter names"));
            }
            for name in names {
                check_name(ln, name, &mut taken)?;
                params.push(Param { name: name.to_string(), nonzero });
            }
        }
    }
    for ((a, b), ln) in distinct.iter().zip(&distinct_lines) {
        for p in [a, b] {
            if !params.iter().any(|q| &q.name == p) {
                return Err(word_ln(ln, p).err(format!("`{p}` is not a declared parameter")));
            }
        }
    }

    let mut spec = SystemSpec { independent: independent.clone(), vars, params, distinct, rules: Vec::new() };
    let scope = scope_of(&spec);

    // [equations] and [covering]
    let mut rule_lines: Vec<(Ln, Rule)> = Vec::new();
    if let Some((ei, es)) = find("equations").next() {
        used[ei] = true;
        for ln in &es.lines {
            let r = rule(ln, &scope, n)?;
            if spec.var(&r.var).is_some_and(|v| v.nonlocal) {
                return Err(ln.err(format!("`{}` is nonlocal; its rules belong in [covering]", r.var)));
            }
            rule_lines.push((ln.clone(), r));
        }
    }
    let mut doubles: Vec<(Ln, Vec<(String, String)>)> = Vec::new();
    let mut cov_header = vs.header.clone();
    if let Some((ci, cs)) = find("covering").next() {
        used[ci] = true;
        cov_header = cs.header.clone();
        for ln in &cs.lines {
            if let Some(rest) = ln.text.strip_prefix("double ") {
                let mut pairs = Vec::new();
                for part in rest.split(',') {
                    let p: Vec<&str> = part.split("->").map(str::trim).collect();
                    if p.len() != 2 || p[0].is_empty() || p[1].is_empty() {
                        return Err(ln.err("expected `double a -> b, c -> d`"));
                    }
                    pairs.push((p[0].to_string(), p[1].to_string()));
                }
                doubles.push((ln.clone(), pairs));
                continue;
            }
            let r = rule(ln, &scope, n)?;
            if !spec.var(&r.var).is_some_and(|v| v.nonlocal) {
                return Err(ln.err(format!("`{}` is not a nonlocal variable", r.var)));
            }
            rule_lines.push((ln.clone(), r));
        }
    }
    spec.rules = rule_lines.iter().map(|(_, r)| r.clone()).collect();
    // validates the undoubled covering first so errors point at the written rules
    let system = build_system(spec.clone(), &rule_lines, &cov_header)?;
    let written = system.spec().clone();
    let mut system = system;
    for (ln, pairs) in &doubles {
        let refs: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let doubled = Covering::new(system.spec().clone()).double(&refs).map_err(|e| ln.err(e.to_string()))?;
        system = EqSystem::new(doubled.spec().clone()).map_err(|e| ln.err(e.to_string()))?;
    }
    let spec = system.spec().clone();
    let scope = scope_of(&spec);

    // [target NAME]
    let mut targets: Vec<Target> = Vec::new();
    for (ti, ts) in find("target") {
        used[ti] = true;
        let name = ts.arg.clone().unwrap();
        if targets.iter().any(|t| t.name == name) {
            return Err(ts.header.err(format!("target `{name}` declared twice")));
        }
        let mut tvars = Vec::new();
        let mut ttaken: Vec<String> = spec.independent.iter().chain(spec.params.iter().map(|p| &p.name)).cloned().collect();
        let mut trules: Vec<(Ln, Rule)> = Vec::new();
        for ln in &ts.lines {
            match ln.words()[0] {
                "local" | "nonlocal" => {
                    var_line(ln, &mut tvars, &mut ttaken)?;
                }
                "copy" => copy_rules(ln, &written, &mut tvars, &mut ttaken, &mut trules)?,
                _ => {}
            }
        }
        let mut tspec = SystemSpec {
            independent: spec.independent.clone(),
            vars: tvars,
            params: spec.params.clone(),
            distinct: spec.distinct.clone(),
            rules: vec![],
        };
        let tscope = scope_of(&tspec);
        for ln in &ts.lines {
            if matches!(ln.words()[0], "local" | "nonlocal" | "copy") {
                continue;
            }
            trules.push((ln.clone(), rule(ln, &tscope, n)?));
        }
        tspec.rules = trules.iter().map(|(_, r)| r.clone()).collect();
        let system = build_system(tspec, &trules, &ts.header)?;
        targets.push(Target { name, system });
    }

    // [forms]
    let mut forms: Vec<(String, HForm)> = Vec::new();
    if let Some((fi, fs)) = find("forms").next() {
        used[fi] = true;
        for (head, items) in blocks(fs, "form")? {
            let w = head.words();
            let name = w.get(1).ok_or_else(|| head.err("expected `form NAME`"))?.to_string();
            if forms.iter().any(|(n, _)| *n == name) {
                return Err(head.err(format!("form `{name}` declared twice")));
            }
            let dim = match w.get(2) {
                None => None,
                Some(&"matrix") => {
                    let d = w.get(3).ok_or_else(|| head.err("expected `matrix LxL`"))?;
                    let (a, b) = d.split_once('x').ok_or_else(|| head.err("expected `matrix LxL`"))?;
                    let (a, b): (usize, usize) = (a.parse().map_err(|_| head.err("bad size"))?, b.parse().map_err(|_| head.err("bad size"))?);
                    if a != b || a == 0 {
                        return Err(head.err("matrix forms must be square"));
                    }
                    Some(a)
                }
                Some(other) => return Err(head.err(format!("unexpected `{other}`"))),
            };
            let mut comps: Vec<Option<Mat>> = vec![None; n];
            for ln in &items {
                let (key, val) = ln.split_once(':').ok_or_else(|| ln.err("expected `dX: value`"))?;
                let i = key
                    .text
                    .strip_prefix('d')
                    .and_then(|v| spec.independent.iter().position(|s| s == v))
                    .ok_or_else(|| key.err(format!("`{}` is not d<independent variable>", key.text)))?;
                if comps[i].is_some() {
                    return Err(key.err("component given twice"));
                }
                comps[i] = Some(match dim {
                    None => Mat::scalar(expr(&val, &scope)?),
                    Some(d) => matrix(&val, d, &scope)?,
                });
            }
            let d = dim.unwrap_or(1);
            let comps: Vec<Mat> = comps.into_iter().map(|c| c.unwrap_or_else(|| Mat::zeros(d, d))).collect();
            let form = if dim.is_none() {
                HForm::scalar(comps.iter().map(|m| m.get(0, 0).clone()).collect())
            } else {
                HForm::matrix(comps).map_err(|e| head.err(e.to_string()))?
            };
            forms.push((name, form));
        }
    }
    let form_of = |ln: &Ln, name: &str| -> Result<HForm, ParseError> {
        forms.iter().find(|(n, _)| n == name).map(|(_, f)| f.clone()).ok_or_else(|| word_ln(ln, name).err(format!("unknown form `{name}`")))
    };

    // [fields]
    let mut fields: Vec<NamedField> = Vec::new();
    if let Some((fi, fs)) = find("fields").next() {
        used[fi] = true;
        for (head, items) in blocks(fs, "field")? {
            let all = head.words();
            let (w, on) = match all.iter().position(|x| *x == "on") {
                Some(k) => (all[..k].to_vec(), all[k + 1..].iter().map(|s| s.to_string()).collect::<Vec<_>>()),
                None => (all.clone(), Vec::new()),
            };
            for v in &on {
                if !spec.var(v).is_some_and(|x| x.nonlocal) {
                    return Err(word_ln(&head, v).err(format!("`{v}` is not a nonlocal variable")));
                }
            }
            let name = w.get(1).ok_or_else(|| head.err("expected `field NAME …`"))?.to_string();
            if fields.iter().any(|f| f.name == name) {
                return Err(head.err(format!("field `{name}` declared twice")));
            }
            let (form, field_form) = match (w.get(2).copied(), w.get(3).copied()) {
                (Some("form"), Some("none")) => (FormRef::None, FieldForm::none(n)),
                (Some("form"), Some(mu)) => {
                    if w.get(4) != Some(&"c") || w.len() != 6 {
                        return Err(head.err("expected `field NAME form MU c VALUE`"));
                    }
                    let c = rational(&word_ln(&head, w[5]))?;
                    let f = form_of(&head, mu)?;
                    if !f.is_scalar() {
                        return Err(head.err(format!("`{mu}` is a matrix form; use `gamma`")));
                    }
                    (FormRef::Scalar { mu: mu.to_string(), c: c.clone() }, FieldForm::Scalar { c, mu: f })
                }
                (Some("gamma"), Some(g)) => {
                    let f = form_of(&head, g)?;
                    (FormRef::Matrix(g.to_string()), FieldForm::Matrix(f))
                }
                _ => return Err(head.err("expected `form MU c VALUE`, `form none` or `gamma G`")),
            };
            let r = field_form.rank();
            let mut decl = FieldDecl { form, a: vec![vec![Expr::zero(); n]; r], b: vec![], phi: vec![] };
            for ln in &items {
                let (key, val) = ln.split_once(':').ok_or_else(|| ln.err("expected `name: value`"))?;
                let kw = key.words();
                let v = vector(&val, r, &scope)?;
                if kw.len() == 2 && kw[0] == "phi" {
                    if spec.var(kw[1]).is_none() {
                        return Err(key.err(format!("unknown variable `{}`", kw[1])));
                    }
                    decl.phi.push((kw[1].to_string(), v));
                } else if let Some(i) = spec.independent.iter().position(|s| s == &key.text) {
                    for (k, e) in v.into_iter().enumerate() {
                        decl.a[k][i] = e;
                    }
                } else if spec.var(&key.text).is_some() {
                    decl.b.push((key.text.clone(), v));
                } else {
                    return Err(key.err(format!("`{}` is neither an independent nor a dependent variable", key.text)));
                }
            }
            let sub = if on.is_empty() {
                None
            } else {
                let keep: Vec<&str> = on.iter().map(|s| s.as_str()).collect();
                let spec = Covering::new(spec.clone()).project(&keep).spec().clone();
                Some(Arc::new(EqSystem::new(spec).map_err(|e| head.err(e.to_string()))?))
            };
            let field = build_field(&decl, field_form, sub.as_deref().unwrap_or(&system)).map_err(|e| head.err(e.to_string()))?;
            fields.push(NamedField { name, decl, field, on, system: sub });
        }
    }

    // [morphisms]
    let mut morphisms: Vec<NamedMorphism> = Vec::new();
    if let Some((mi, ms)) = find("morphisms").next() {
        used[mi] = true;
        for (head, items) in blocks(ms, "morphism")? {
            let w = head.words();
            if w.len() != 4 || w[2] != "->" {
                return Err(head.err("expected `morphism NAME -> TARGET`"));
            }
            let name = w[1].to_string();
            if morphisms.iter().any(|m| m.name == name) {
                return Err(head.err(format!("morphism `{name}` declared twice")));
            }
            let target = w[3].trim_start_matches("target.").to_string();
            let tsys = targets
                .iter()
                .find(|t| t.name == target)
                .map(|t| &t.system)
                .ok_or_else(|| word_ln(&head, w[3]).err(format!("unknown target `{target}`")))?;
            let mut xi: Vec<Expr> = spec.independent.iter().map(|s| Expr::sym(s)).collect();
            let mut nu: Vec<(String, Expr)> = Vec::new();
            for ln in &items {
                let (lhs, rhs) = ln.split_once('=').ok_or_else(|| ln.err("expected `name = value`"))?;
                let e = expr(&rhs, &scope)?;
                if let Some(i) = lhs.text.strip_suffix('\'').and_then(|b| spec.independent.iter().position(|s| s == b)) {
                    xi[i] = e;
                } else if tsys.var_index(&lhs.text).is_some() {
                    if nu.iter().any(|(v, _)| *v == lhs.text) {
                        return Err(lhs.err("component given twice"));
                    }
                    nu.push((lhs.text.clone(), e));
                } else {
                    return Err(lhs.err(format!("`{}` is not a variable of target `{target}`", lhs.text)));
                }
            }
            morphisms.push(NamedMorphism { name, target, morphism: Morphism { xi, nu } });
        }
    }

    // [search]
    let mut searches: Vec<SearchDecl> = Vec::new();
    if let Some((si, ss)) = find("search").next() {
        used[si] = true;
        for (head, items) in blocks(ss, "search")? {
            let w = head.words();
            if w.len() < 6 || w[2] != "form" || w[4] != "c" {
                return Err(head.err("expected `search NAME form MU c VALUES…`"));
            }
            let mu = form_of(&head, w[3])?;
            if !mu.is_scalar() {
                return Err(head.err("searches need a scalar form"));
            }
            let c_values = if w[5] == "default" {
                Ansatz::default_c()
            } else {
                w[5..].iter().map(|s| rational(&word_ln(&head, s))).collect::<Result<_, _>>()?
            };
            let mut decl = SearchDecl { name: w[1].to_string(), mu: w[3].to_string(), c_values, slots: vec![], bounds: vec![] };
            for ln in &items {
                let iw = ln.words();
                match iw[0] {
                    "slots" => {
                        for s in &iw[1..] {
                            decl.slots.push(if let Some(i) = spec.independent.iter().position(|x| x == s) {
                                Slot::Base(i)
                            } else if spec.var(s).is_some() {
                                Slot::Var(s.to_string())
                            } else {
                                return Err(word_ln(ln, s).err(format!("unknown slot `{s}`")));
                            });
                        }
                    }
                    "monomials" => {
                        let rest = ln.slice(iw[0].chars().count());
                        for part in rest.text.split(',') {
                            let (v, d) = part.split_once(':').ok_or_else(|| rest.err("expected `var: degree`"))?;
                            let (v, d) = (v.trim(), d.trim());
                            if spec.var(v).is_none() {
                                return Err(word_ln(ln, v).err(format!("unknown variable `{v}`")));
                            }
                            let d: u32 = d.parse().map_err(|_| word_ln(ln, d).err("degree must be a nonnegative integer"))?;
                            decl.bounds.push((v.to_string(), d));
                        }
                    }
                    other => return Err(ln.err(format!("unknown search item `{other}`"))),
                }
            }
            if decl.slots.is_empty() {
                return Err(head.err("search needs a `slots` line"));
            }
            searches.push(decl);
        }
    }

    // [soliton]
    let mut soliton = None;
    if let Some((si, ss)) = find("soliton").next() {
        used[si] = true;
        soliton = Some(parse_soliton(ss, &spec, &morphisms, &targets)?);
    }

    // [assert]
    let mut assertions = Vec::new();
    if let Some((ai, asec)) = find("assert").next() {
        used[ai] = true;
        let ctx = Ctx { spec: &spec, forms: &forms, fields: &fields, morphisms: &morphisms, targets: &targets, searches: &searches };
        for ln in &asec.lines {
            assertions.push(AssertLine { text: ln.text.clone(), line: ln.no, kind: parse_assertion(ln, &ctx)? });
        }
    }
    debug_assert!(used.iter().all(|u| *u));
    Ok(Problem { system, forms, fields, morphisms, targets, searches, soliton, assertions })
}

/// `copy equations|covering [p -> q, …]`: primed copies of the written rules.
fn copy_rules(ln: &Ln, src: &SystemSpec, vars: &mut Vec<Var>, taken: &mut Vec<String>, rules: &mut Vec<(Ln, Rule)>) -> Result<(), ParseError> {
    let w = ln.words();
    let nonlocal = match w.get(1) {
        Some(&"equations") => false,
        Some(&"covering") => true,
        _ => return Err(ln.err("expected `copy equations` or `copy covering`")),
    };
    let mut map: HashMap<String, String> = HashMap::new();
    let rest = ln.slice(w[0].len() + 1 + w[1].len());
    if !rest.text.is_empty() {
        for part in rest.text.split(',') {
            let (a, b) = part.split_once("->").ok_or_else(|| rest.err("expected `param -> param`"))?;
            let (a, b) = (a.trim(), b.trim());
            for p in [a, b] {
                if !src.params.iter().any(|q| q.name == p) && !taken.iter().any(|t| t == p) {
                    return Err(word_ln(ln, p).err(format!("`{p}` is not a parameter")));
                }
            }
            map.insert(a.to_string(), b.to_string());
        }
    }
    // every variable gets primed, copied or not, so expressions stay in target names
    for v in &src.vars {
        map.insert(v.name.clone(), format!("{}'", v.name));
    }
    for v in src.vars.iter().filter(|v| v.nonlocal == nonlocal) {
        let name = format!("{}'", v.name);
        if !vars.iter().any(|x| x.name == name) {
            check_name(ln, &name, taken)?;
            vars.push(Var { name, nonlocal });
        }
    }
    for r in src.rules.iter().filter(|r| src.var(&r.var).is_some_and(|v| v.nonlocal == nonlocal)) {
        rules.push((ln.clone(), Rule { var: format!("{}'", r.var), lead: r.lead.clone(), rhs: r.rhs.rename(&map) }));
    }
    Ok(())
}

/// Headers starting with `keyword` open a block; following lines belong to it.
fn blocks(s: &Section, keyword: &str) -> Result<Vec<(Ln, Vec<Ln>)>, ParseError> {
    let mut out: Vec<(Ln, Vec<Ln>)> = Vec::new();
    for ln in &s.lines {
        if ln.words()[0] == keyword {
            out.push((ln.clone(), Vec::new()));
        } else {
            match out.last_mut() {
                Some((_, items)) => items.push(ln.clone()),
                None => return Err(ln.err(format!("expected `{keyword} NAME` before block items"))),
            }
        }
    }
    Ok(out)
}

fn build_field(decl: &FieldDecl, form: FieldForm, sys: &EqSystem) -> Result<PseudoField, crate::pseudosym::PseudoError> {
    let mut f = PseudoField::from_vector_field(sys, decl.a.clone(), decl.b.clone(), form)?;
    for (v, col) in &decl.phi {
        let col = col.iter().map(|e| sys.reduce(e)).collect::<Result<Vec<_>, _>>()?;
        if let Some(slot) = f.phi.iter_mut().find(|(n, _)| n == v) {
            slot.1 = col;
        }
    }
    Ok(f)
}

fn parse_soliton(s: &Section, spec: &SystemSpec, morphisms: &[NamedMorphism], targets: &[Target]) -> Result<SolitonDecl, ParseError> {
    let mut sd = SolitonDecl {
        morphism: String::new(),
        seed: vec![],
        params: vec![],
        ic: vec![],
        origin: (0.0, 0.0),
        grid: Grid::square(-2.0, 2.0, 1.0 / 64.0),
        exact: vec![],
        lines: s.lines.iter().map(|l| l.text.clone()).collect(),
    };
    let seed_scope = Scope {
        independent: spec.independent.clone(),
        params: spec.params.iter().map(|p| p.name.clone()).collect(),
        strict: true,
        ..Scope::default()
    };
    let mut target: Option<&Target> = None;
    for ln in &s.lines {
        let w = ln.words();
        let rest = ln.slice(w[0].chars().count());
        match w[0] {
            "morphism" => {
                let m = morphisms.iter().find(|m| m.name == rest.text).ok_or_else(|| rest.err(format!("unknown morphism `{}`", rest.text)))?;
                sd.morphism = m.name.clone();
                target = targets.iter().find(|t| t.name == m.target);
            }
            "seed" | "param" | "ic" | "exact" => {
                let (lhs, rhs) = rest.split_once('=').ok_or_else(|| rest.err("expected `name = value`"))?;
                let name = lhs.text.clone();
                match w[0] {
                    "seed" => {
                        if !spec.var(&name).is_some_and(|v| !v.nonlocal) {
                            return Err(lhs.err(format!("`{name}` is not a local variable")));
                        }
                        sd.seed.push((name, expr(&rhs, &seed_scope)?));
                    }
                    "param" => {
                        if !spec.params.iter().any(|p| p.name == name) {
                            return Err(lhs.err(format!("`{name}` is not a parameter")));
                        }
                        sd.params.push((name, real(&rhs)?));
                    }
                    "ic" => {
                        if !spec.var(&name).is_some_and(|v| v.nonlocal) {
                            return Err(lhs.err(format!("`{name}` is not a nonlocal variable")));
                        }
                        sd.ic.push((name, real(&rhs)?));
                    }
                    _ => {
                        let t = target.ok_or_else(|| ln.err("`exact` needs a preceding `morphism` line"))?;
                        if t.system.var_index(&name).is_none() {
                            return Err(lhs.err(format!("`{name}` is not a target variable")));
                        }
                        sd.exact.push((name, expr(&rhs, &seed_scope)?));
                    }
                }
            }
            "origin" => {
                let v = rest.words();
                if v.len() != 2 {
                    return Err(rest.err("expected `origin X T`"));
                }
                sd.origin = (real(&word_ln(ln, v[0]))?, real(&word_ln(ln, v[1]))?);
            }
            "grid" => {
                let v: Vec<f64> = rest.words().iter().map(|x| real(&word_ln(ln, x))).collect::<Result<_, _>>()?;
                sd.grid = match v.as_slice() {
                    [lo, hi, h] if *h > 0.0 => Grid::square(*lo, *hi, *h),
                    [x0, x1, t0, t1, h] if *h > 0.0 => Grid {
                        x0: *x0,
                        x1: *x1,
                        nx: ((x1 - x0) / h).round() as usize,
                        t0: *t0,
                        t1: *t1,
                        nt: ((t1 - t0) / h).round() as usize,
                    },
                    _ => return Err(rest.err("expected `grid LO HI H` or `grid X0 X1 T0 T1 H`")),
                };
            }
            other => return Err(ln.err(format!("unknown soliton item `{other}`"))),
        }
    }
    if sd.morphism.is_empty() {
        return Err(s.header.err("soliton needs a `morphism` line"));
    }
    Ok(sd)
}

struct Ctx<'a> {
    spec: &'a SystemSpec,
    forms: &'a [(String, HForm)],
    fields: &'a [NamedField],
    morphisms: &'a [NamedMorphism],
    targets: &'a [Target],
    searches: &'a [SearchDecl],
}

impl Ctx<'_> {
    fn form(&self, ln: &Ln, name: &str) -> Result<String, ParseError> {
        self.forms.iter().any(|(n, _)| n == name).then(|| name.to_string()).ok_or_else(|| word_ln(ln, name).err(format!("unknown form `{name}`")))
    }

    fn field(&self, ln: &Ln, name: &str) -> Result<String, ParseError> {
        self.fields.iter().any(|f| f.name == name).then(|| name.to_string()).ok_or_else(|| word_ln(ln, name).err(format!("unknown field `{name}`")))
    }

    fn morphism(&self, ln: &Ln, name: &str) -> Result<String, ParseError> {
        self.morphisms.iter().any(|m| m.name == name).then(|| name.to_string()).ok_or_else(|| word_ln(ln, name).err(format!("unknown morphism `{name}`")))
    }

    fn target(&self, ln: &Ln, name: &str) -> Result<String, ParseError> {
        let t = name.strip_prefix("target.").ok_or_else(|| word_ln(ln, name).err("expected `target.NAME`"))?;
        self.targets.iter().any(|x| x.name == t).then(|| t.to_string()).ok_or_else(|| word_ln(ln, name).err(format!("unknown target `{t}`")))
    }
}

fn parse_assertion(ln: &Ln, c: &Ctx) -> Result<Assertion, ParseError> {
    let w = ln.words();
    let arity = |k: usize| -> Result<(), ParseError> {
        if w.len() != k {
            Err(ln.err(format!("`{}` takes {} argument(s)", w[0], k - 1)))
        } else {
            Ok(())
        }
    };
    let scope = scope_of(c.spec);
    Ok(match w[0] {
        "valid" => {
            arity(1)?;
            Assertion::Valid
        }
        "conservation" => {
            arity(2)?;
            Assertion::Conservation(c.form(ln, w[1])?)
        }
        "zcr" => {
            let mode = match w.get(2).copied() {
                None | Some("standard") => ZcrForm::Convention(ZcrConvention::Standard),
                Some("flipped") => ZcrForm::Convention(ZcrConvention::Flipped),
                Some("wedge") => ZcrForm::Wedge,
                Some(o) => return Err(word_ln(ln, o).err(format!("unknown convention `{o}`"))),
            };
            if w.len() > 3 || w.len() < 2 {
                return Err(ln.err("expected `zcr FORM [standard|flipped|wedge]`"));
            }
            Assertion::Zcr(c.form(ln, w[1])?, mode)
        }
        "flat" => {
            arity(2)?;
            Assertion::Flat(c.form(ln, w[1])?)
        }
        "riccati" => {
            if w.len() != 6 || w[2] != "pivot" || w[4] != "->" {
                return Err(ln.err("expected `riccati FORM pivot H -> MU`"));
            }
            let pivot = w[3].parse().map_err(|_| word_ln(ln, w[3]).err("pivot must be a positive integer"))?;
            Assertion::Riccati { form: c.form(ln, w[1])?, pivot, mu: c.form(ln, w[5])? }
        }
        "pseudosymmetry" => {
            arity(2)?;
            Assertion::Pseudosymmetry(c.field(ln, w[1])?)
        }
        "r-pseudosymmetry" => {
            arity(2)?;
            Assertion::RPseudosymmetry(c.field(ln, w[1])?)
        }
        "invariant" => {
            let (head, e) = ln.split_once(':').ok_or_else(|| ln.err("expected `invariant FIELD: expr`"))?;
            let hw = head.words();
            if hw.len() != 2 {
                return Err(head.err("expected `invariant FIELD: expr`"));
            }
            Assertion::Invariant { field: c.field(ln, hw[1])?, expr: expr(&e, &scope)? }
        }
        "morphism" => {
            if w.len() != 4 || w[2] != "->" {
                return Err(ln.err("expected `morphism B -> target.NAME`"));
            }
            Assertion::Morphism { morphism: c.morphism(ln, w[1])?, target: c.target(ln, w[3])? }
        }
        "regular" => {
            arity(2)?;
            Assertion::Regular(c.morphism(ln, w[1])?)
        }
        "factor" => {
            if w.len() != 5 || w[3] != "->" {
                return Err(ln.err("expected `factor FIELD MORPHISM -> target.NAME`"));
            }
            Assertion::Factor { field: c.field(ln, w[1])?, morphism: c.morphism(ln, w[2])?, target: c.target(ln, w[4])? }
        }
        "zero" | "zero:" => {
            let (_, e) = ln.split_once(':').ok_or_else(|| ln.err("expected `zero: expr`"))?;
            Assertion::Zero(expr(&e, &scope)?)
        }
        "search" => {
            if w.len() != 4 || w[2] != "dim" {
                return Err(ln.err("expected `search NAME dim K`"));
            }
            if !c.searches.iter().any(|s| s.name == w[1]) {
                return Err(word_ln(ln, w[1]).err(format!("unknown search `{}`", w[1])));
            }
            let dim = w[3].parse().map_err(|_| word_ln(ln, w[3]).err("dimension must be an integer"))?;
            Assertion::Search { search: w[1].to_string(), dim }
        }
        "relations" => {
            let (head, basis) = ln.split_once(':').ok_or_else(|| ln.err("expected `relations [FIELD] MORPHISM -> target.NAME: basis…`"))?;
            let hw = head.words();
            let (field, m, arrow, t) = match hw.as_slice() {
                [_, m, a, t] => (None, *m, *a, *t),
                [_, f, m, a, t] => (Some(c.field(ln, f)?), *m, *a, *t),
                _ => return Err(head.err("expected `relations [FIELD] MORPHISM -> target.NAME`")),
            };
            if arrow != "->" {
                return Err(head.err("expected `->`"));
            }
            let target = c.target(ln, t)?;
            let tsys = &c.targets.iter().find(|x| x.name == target).unwrap().system;
            let tscope = scope_of(tsys.spec());
            let wrapped = Ln { no: basis.no, col: basis.col.saturating_sub(1), text: format!("[{}]", basis.text) };
            let items = bracket_items(&wrapped)?;
            let basis = items.iter().map(|b| expr(b, &tscope)).collect::<Result<Vec<_>, _>>()?;
            Assertion::Relations { field, morphism: c.morphism(ln, m)?, target, basis }
        }
        other => return Err(ln.err(format!("unknown assertion `{other}`"))),
    })
}

fn rule_text(sys: &EqSystem, r: &Rule) -> String {
    format!("{} = {}", sys.render(&Expr::jet(&r.var, r.lead.clone())), sys.render(&r.rhs))
}

fn vec_text(sys: &EqSystem, v: &[Expr]) -> String {
    if v.len() == 1 {
        sys.render(&v[0])
    } else {
        format!("[{}]", v.iter().map(|e| sys.render(e)).collect::<Vec<_>>().join(", "))
    }
}

fn var_lines(spec: &SystemSpec, out: &mut String) {
    for v in &spec.vars {
        out.push_str(&format!("{} {}\n", if v.nonlocal { "nonlocal" } else { "local" }, v.name));
    }
}

/// Rules of a system as `[equations]` and `[covering]` lines.
pub fn render_rules(sys: &EqSystem) -> String {
    let spec = sys.spec();
    let mut out = String::new();
    let local: Vec<&Rule> = spec.rules.iter().filter(|r| !spec.var(&r.var).is_some_and(|v| v.nonlocal)).collect();
    let nonlocal: Vec<&Rule> = spec.rules.iter().filter(|r| spec.var(&r.var).is_some_and(|v| v.nonlocal)).collect();
    out.push_str("[equations]\n");
    for r in local {
        out.push_str(&rule_text(sys, r));
        out.push('\n');
    }
    if !nonlocal.is_empty() {
        out.push_str("\n[covering]\n");
        for r in nonlocal {
            out.push_str(&rule_text(sys, r));
            out.push('\n');
        }
    }
    out
}

/// One `form` block.
pub fn render_form(name: &str, f: &HForm, sys: &EqSystem) -> String {
    let mut out = String::new();
    if f.is_scalar() {
        out.push_str(&format!("form {name}\n"));
    } else {
        out.push_str(&format!("form {name} matrix {0}x{0}\n", f.dim()));
    }
    for (i, v) in sys.spec().independent.iter().enumerate() {
        let m = f.comp(i);
        let text = if f.is_scalar() {
            sys.render(m.get(0, 0))
        } else {
            let rows: Vec<String> =
                m.to_rows().iter().map(|r| format!("[{}]", r.iter().map(|e| sys.render(e)).collect::<Vec<_>>().join(", "))).collect();
            format!("[{}]", rows.join(", "))
        };
        out.push_str(&format!("  d{v}: {text}\n"));
    }
    out
}

/// Problem as text; parsing the output yields an equal problem.
pub fn render_problem(p: &Problem) -> String {
    let sys = &p.system;
    let spec = sys.spec();
    let mut out = String::from("[vars]\n");
    out.push_str(&format!("independent {}\n", spec.independent.join(" ")));
    var_lines(spec, &mut out);
    if !spec.params.is_empty() {
        out.push_str("\n[params]\n");
        for q in &spec.params {
            out.push_str(&format!("{}{}\n", q.name, if q.nonzero { " nonzero" } else { "" }));
        }
        for (a, b) in &spec.distinct {
            out.push_str(&format!("distinct {a} {b}\n"));
        }
    }
    out.push('\n');
    out.push_str(&render_rules(sys));
    for t in &p.targets {
        out.push_str(&format!("\n[target {}]\n", t.name));
        var_lines(t.system.spec(), &mut out);
        for r in t.system.rules() {
            out.push_str(&rule_text(&t.system, r));
            out.push('\n');
        }
    }
    if !p.forms.is_empty() {
        out.push_str("\n[forms]\n");
        for (name, f) in &p.forms {
            out.push_str(&render_form(name, f, sys));
        }
    }
    if !p.fields.is_empty() {
        out.push_str("\n[fields]\n");
        for f in &p.fields {
            let head = match &f.decl.form {
                FormRef::None => "form none".to_string(),
                FormRef::Scalar { mu, c } => format!("form {mu} c {c}"),
                FormRef::Matrix(g) => format!("gamma {g}"),
            };
            let on = if f.on.is_empty() { String::new() } else { format!(" on {}", f.on.join(" ")) };
            out.push_str(&format!("field {} {head}{on}\n", f.name));
            for (i, v) in spec.independent.iter().enumerate() {
                let col: Vec<Expr> = f.decl.a.iter().map(|row| row[i].clone()).collect();
                if col.iter().any(|e| !e.is_zero()) {
                    out.push_str(&format!("  {v}: {}\n", vec_text(sys, &col)));
                }
            }
            for (v, col) in &f.decl.b {
                out.push_str(&format!("  {v}: {}\n", vec_text(sys, col)));
            }
            for (v, col) in &f.decl.phi {
                out.push_str(&format!("  phi {v}: {}\n", vec_text(sys, col)));
            }
        }
    }
    if !p.morphisms.is_empty() {
        out.push_str("\n[morphisms]\n");
        for m in &p.morphisms {
            out.push_str(&format!("morphism {} -> {}\n", m.name, m.target));
            for (i, v) in spec.independent.iter().enumerate() {
                if m.morphism.xi[i] != Expr::sym(v) {
                    out.push_str(&format!("  {v}' = {}\n", sys.render(&m.morphism.xi[i])));
                }
            }
            for (v, e) in &m.morphism.nu {
                out.push_str(&format!("  {v} = {}\n", sys.render(e)));
            }
        }
    }
    if !p.searches.is_empty() {
        out.push_str("\n[search]\n");
        for s in &p.searches {
            let cs: Vec<String> = s.c_values.iter().map(|c| c.to_string()).collect();
            out.push_str(&format!("search {} form {} c {}\n", s.name, s.mu, cs.join(" ")));
            let slots: Vec<String> = s
                .slots
                .iter()
                .map(|x| match x {
                    Slot::Base(i) => spec.independent[*i].clone(),
                    Slot::Var(v) => v.clone(),
                })
                .collect();
            out.push_str(&format!("  slots {}\n", slots.join(" ")));
            if !s.bounds.is_empty() {
                let b: Vec<String> = s.bounds.iter().map(|(v, d)| format!("{v}: {d}")).collect();
                out.push_str(&format!("  monomials {}\n", b.join(", ")));
            }
        }
    }
    if let Some(s) = &p.soliton {
        out.push_str("\n[soliton]\n");
        for l in &s.lines {
            out.push_str(l);
            out.push('\n');
        }
    }
    if !p.assertions.is_empty() {
        out.push_str("\n[assert]\n");
        for a in &p.assertions {
            out.push_str(&a.text);
            out.push('\n');
        }
    }
    out
}
