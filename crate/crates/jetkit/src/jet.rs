//! Jet coordinates, ranked solved forms, total derivatives and reduction.

use std::cell::{Cell, RefCell};
use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::Arc;

use dashmap::DashMap;
use thiserror::Error;

use crate::expr::{sym_id, Atom, AtomId, Expr, ExprError, JetNaming, Oracle, Verdict};
pub use crate::expr::MultiIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("ranking violation in rule for {lead}: right-hand side contains {offending}")]
    RankingViolation { lead: String, offending: String },
    #[error("duplicate or comparable leads for `{0}`")]
    DuplicateLead(String),
    #[error("rule lead {0} has order zero")]
    AlgebraicRule(String),
    #[error("unknown dependent variable `{0}`")]
    UnknownVariable(String),
    #[error("nonlocal `{0}` needs exactly one rule per independent variable")]
    NonlocalRules(String),
    #[error("reduction did not terminate: {0}")]
    NonTerminating(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Var {
    pub name: String,
    pub nonlocal: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub nonzero: bool,
}

/// Solved-form rule `var_lead = rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub var: String,
    pub lead: MultiIndex,
    pub rhs: Expr,
}

/// Plain declaration data of an equation system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SystemSpec {
    pub independent: Vec<String>,
    pub vars: Vec<Var>,
    pub params: Vec<Param>,
    pub distinct: Vec<(String, String)>,
    pub rules: Vec<Rule>,
}

impl SystemSpec {
    pub fn n(&self) -> usize {
        self.independent.len()
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn local_vars(&self) -> impl Iterator<Item = &Var> {
        self.vars.iter().filter(|v| !v.nonlocal)
    }

    pub fn nonlocal_vars(&self) -> impl Iterator<Item = &Var> {
        self.vars.iter().filter(|v| v.nonlocal)
    }

    pub fn jet(&self, var: &str, idx: &[u32]) -> Expr {
        Expr::jet(var, MultiIndex::from_slice(idx))
    }

    pub fn coord(&self, var: &str) -> Expr {
        Expr::jet(var, MultiIndex::zero(self.n()))
    }
}

/// Ranking key; larger ranks higher.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct RankKey {
    nonlocal: bool,
    order: u32,
    last: u32,
    lex: Vec<u32>,
    var: usize,
}

/// One line of a validation report.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.verdict.is_zero()
    }
}

/// Validated system with memoized reduction.
pub struct EqSystem {
    spec: SystemSpec,
    var_index: HashMap<Arc<str>, usize>,
    rules_by_var: Vec<Vec<usize>>,
    indep: Vec<AtomId>,
    memo: DashMap<(usize, MultiIndex), Expr>,
    naming: JetNaming,
}

const MAX_DEPTH: usize = 400;

thread_local! {
    static DEPTH: Cell<usize> = const { Cell::new(0) };
}

struct DepthGuard;

impl DepthGuard {
    fn enter(what: impl FnOnce() -> String) -> Result<DepthGuard, JetError> {
        let d = DEPTH.with(|c| {
            c.set(c.get() + 1);
            c.get()
        });
        if d > MAX_DEPTH {
            DEPTH.with(|c| c.set(c.get() - 1));
            return Err(JetError::NonTerminating(what()));
        }
        Ok(DepthGuard)
    }
}

impl Drop for DepthGuard {
    fn drop(&mut self) {
        DEPTH.with(|c| c.set(c.get() - 1));
    }
}

impl Clone for EqSystem {
    fn clone(&self) -> Self {
        EqSystem::new(self.spec.clone()).expect("already validated")
    }
}

impl std::fmt::Debug for EqSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EqSystem").field("spec", &self.spec).finish()
    }
}

impl EqSystem {
    pub fn new(spec: SystemSpec) -> Result<EqSystem, JetError> {
        let n = spec.n();
        let mut var_index = HashMap::new();
        for (i, v) in spec.vars.iter().enumerate() {
            var_index.insert(Arc::<str>::from(v.name.as_str()), i);
        }
        let mut rules_by_var = vec![Vec::new(); spec.vars.len()];
        for (k, r) in spec.rules.iter().enumerate() {
            let Some(&vi) = var_index.get(r.var.as_str()) else {
                return Err(JetError::UnknownVariable(r.var.clone()));
            };
            if r.lead.len() != n {
                return Err(JetError::UnknownVariable(format!("{} (index length)", r.var)));
            }
            if r.lead.is_zero() {
                return Err(JetError::AlgebraicRule(r.var.clone()));
            }
            rules_by_var[vi].push(k);
        }
        let naming = JetNaming::new(&spec.independent);
        let sys = EqSystem {
            indep: spec.independent.iter().map(|s| sym_id(s)).collect(),
            spec,
            var_index,
            rules_by_var,
            memo: DashMap::new(),
            naming,
        };
        sys.check_structure()?;
        Ok(sys)
    }

    fn check_structure(&self) -> Result<(), JetError> {
        for (vi, rs) in self.rules_by_var.iter().enumerate() {
            let v = &self.spec.vars[vi];
            if v.nonlocal {
                let mut dirs = vec![0; self.n()];
                for &k in rs {
                    let l = &self.spec.rules[k].lead;
                    if l.order() != 1 {
                        return Err(JetError::NonlocalRules(v.name.clone()));
                    }
                    let i = (0..self.n()).find(|&i| l.get(i) == 1).unwrap();
                    dirs[i] += 1;
                }
                if dirs.iter().any(|&d| d != 1) {
                    return Err(JetError::NonlocalRules(v.name.clone()));
                }
            } else {
                for (a, &ka) in rs.iter().enumerate() {
                    for &kb in &rs[a + 1..] {
                        let (la, lb) = (&self.spec.rules[ka].lead, &self.spec.rules[kb].lead);
                        if la.le(lb) || lb.le(la) {
                            return Err(JetError::DuplicateLead(v.name.clone()));
                        }
                    }
                }
            }
        }
        for r in &self.spec.rules {
            let vi = self.var_index[r.var.as_str()];
            let lead_rank = self.rank(vi, &r.lead);
            for a in r.rhs.leaves() {
                if let Atom::Jet(name, idx) = a.atom() {
                    let Some(&wi) = self.var_index.get(&*name) else {
                        return Err(JetError::UnknownVariable(name.to_string()));
                    };
                    let bad_nonlocal = self.spec.vars[wi].nonlocal && !idx.is_zero();
                    if bad_nonlocal || self.rank(wi, &idx) >= lead_rank {
                        return Err(JetError::RankingViolation {
                            lead: self.render(&Expr::jet(&r.var, r.lead.clone())),
                            offending: self.render(&Expr::atom(a)),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn naming(&self) -> &JetNaming {
        &self.naming
    }

    pub fn render(&self, e: &Expr) -> String {
        crate::expr::render_with(e, &self.naming)
    }

    pub fn independent_atom(&self, i: usize) -> AtomId {
        self.indep[i]
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.spec.rules
    }

    pub fn rank(&self, var: usize, idx: &MultiIndex) -> RankKey {
        RankKey {
            nonlocal: self.spec.vars[var].nonlocal,
            order: idx.order(),
            last: idx.as_slice().last().copied().unwrap_or(0),
            lex: idx.as_slice().to_vec(),
            var,
        }
    }

    pub fn compare(&self, a: (usize, &MultiIndex), b: (usize, &MultiIndex)) -> Ordering {
        self.rank(a.0, a.1).cmp(&self.rank(b.0, b.1))
    }

    /// Oracle whose sampling honors declared `distinct` pairs.
    pub fn oracle(&self, base: &Oracle) -> Oracle {
        let mut o = base.clone();
        o.distinct = self.spec.distinct.iter().map(|(a, b)| (sym_id(a), sym_id(b))).collect();
        o
    }

    fn rule_for(&self, var: usize, tau: &MultiIndex) -> Option<usize> {
        self.rules_by_var[var].iter().copied().find(|&k| self.spec.rules[k].lead.le(tau))
    }

    fn reducible(&self, var: usize, tau: &MultiIndex) -> bool {
        if self.spec.vars[var].nonlocal {
            return !tau.is_zero();
        }
        self.rule_for(var, tau).is_some()
    }

    /// Reduced value of the coordinate `var_tau` modulo the prolonged system.
    pub fn coord_value(&self, var: usize, tau: &MultiIndex) -> Result<Expr, JetError> {
        if let Some(v) = self.memo.get(&(var, tau.clone())) {
            return Ok(v.clone());
        }
        let name = &self.spec.vars[var].name;
        let Some(k) = self.rule_for(var, tau) else {
            return Ok(Expr::jet(name, tau.clone()));
        };
        let _g = DepthGuard::enter(|| self.render(&Expr::jet(name, tau.clone())))?;
        let rule = &self.spec.rules[k];
        let v = if &rule.lead == tau {
            self.reduce(&rule.rhs)?
        } else {
            let diff = tau.sub(&rule.lead).unwrap();
            let i = (0..self.n()).rev().find(|&i| diff.get(i) > 0).unwrap();
            let prev = self.coord_value(var, &tau.dec(i).unwrap())?;
            self.derive_reduced(&prev, i)?
        };
        self.memo.insert((var, tau.clone()), v.clone());
        Ok(v)
    }

    /// Normal form modulo the infinite prolongation.
    pub fn reduce(&self, e: &Expr) -> Result<Expr, JetError> {
        let err: RefCell<Option<JetError>> = RefCell::new(None);
        let out = e.map_atoms(&|a| {
            if err.borrow().is_some() {
                return None;
            }
            let (vi, idx) = self.jet_of(a)?;
            if !self.reducible(vi, &idx) {
                return None;
            }
            match self.coord_value(vi, &idx) {
                Ok(v) => Some(v),
                Err(x) => {
                    *err.borrow_mut() = Some(x);
                    None
                }
            }
        })?;
        match err.into_inner() {
            Some(x) => Err(x),
            None => Ok(out),
        }
    }

    /// (variable index, multi-index) of a jet atom of this system.
    pub fn jet_of(&self, a: AtomId) -> Option<(usize, MultiIndex)> {
        if !matches!(a.atom(), Atom::Jet(..)) {
            return None;
        }
        match a.atom() {
            Atom::Jet(name, idx) => self.var_index.get(&*name).map(|&i| (i, idx)),
            _ => None,
        }
    }

    pub fn is_reduced(&self, e: &Expr) -> bool {
        e.leaves().into_iter().all(|a| self.jet_of(a).is_none_or(|(v, idx)| !self.reducible(v, &idx)))
    }

    fn derive_reduced(&self, e: &Expr, i: usize) -> Result<Expr, JetError> {
        let err: RefCell<Option<JetError>> = RefCell::new(None);
        let xi = self.indep[i];
        let out = e.derive(&|a| {
            if a == xi {
                return Some(Expr::one());
            }
            match a.atom() {
                Atom::Sym(_) => None,
                Atom::Jet(name, idx) => match self.var_index.get(&*name) {
                    Some(&vi) => {
                        let target = if self.spec.vars[vi].nonlocal { MultiIndex::zero(self.n()).inc(i) } else { idx.inc(i) };
                        if self.spec.vars[vi].nonlocal && !idx.is_zero() {
                            return Some(Expr::jet(&name, idx.inc(i)));
                        }
                        match self.coord_value(vi, &target) {
                            Ok(v) => Some(v),
                            Err(x) => {
                                err.borrow_mut().get_or_insert(x);
                                None
                            }
                        }
                    }
                    None => Some(Expr::jet(&name, idx.inc(i))),
                },
                Atom::App(..) => None,
            }
        });
        match err.into_inner() {
            Some(x) => Err(x),
            None => Ok(out),
        }
    }

    /// Total derivative in direction `i`, reduced.
    pub fn total_derivative(&self, e: &Expr, i: usize) -> Result<Expr, JetError> {
        if self.is_reduced(e) {
            self.derive_reduced(e, i)
        } else {
            self.derive_reduced(&self.reduce(e)?, i)
        }
    }

    /// D_σ = D_1^{σ1} ∘ … ∘ D_n^{σn}.
    pub fn total_derivative_multi(&self, e: &Expr, sigma: &MultiIndex) -> Result<Expr, JetError> {
        let mut v = self.reduce(e)?;
        for i in (0..self.n()).rev() {
            for _ in 0..sigma.get(i) {
                v = self.derive_reduced(&v, i)?;
            }
        }
        Ok(v)
    }

    /// Ranking, lead disjointness and cross-derivative compatibility.
    pub fn validate(&self, oracle: &Oracle) -> Vec<Check> {
        let oracle = self.oracle(oracle);
        let mut out = Vec::new();
        for r in &self.spec.rules {
            out.push(Check {
                name: format!("ranking {}", self.render(&Expr::jet(&r.var, r.lead.clone()))),
                verdict: Verdict::Symbolic,
                detail: "right-hand side ranked below its lead".into(),
            });
        }
        for (vi, rs) in self.rules_by_var.iter().enumerate() {
            for (a, &ka) in rs.iter().enumerate() {
                for &kb in &rs[a + 1..] {
                    let (ra, rb) = (&self.spec.rules[ka], &self.spec.rules[kb]);
                    let name = format!(
                        "compatibility {} / {}",
                        self.render(&Expr::jet(&ra.var, ra.lead.clone())),
                        self.render(&Expr::jet(&rb.var, rb.lead.clone()))
                    );
                    out.push(self.check(name, self.cross_residual(vi, ra, rb), &oracle));
                }
            }
        }
        out
    }

    fn cross_residual(&self, _vi: usize, ra: &Rule, rb: &Rule) -> Result<Expr, JetError> {
        let n = self.n();
        let top: Vec<u32> = (0..n).map(|i| ra.lead.get(i).max(rb.lead.get(i))).collect();
        let top = MultiIndex::from_slice(&top);
        let da = self.total_derivative_multi(&ra.rhs, &top.sub(&ra.lead).unwrap())?;
        let db = self.total_derivative_multi(&rb.rhs, &top.sub(&rb.lead).unwrap())?;
        Ok(da.sub(&db))
    }

    /// Zero test of a residual, rendered into a report line.
    pub fn check(&self, name: impl Into<String>, residual: Result<Expr, JetError>, oracle: &Oracle) -> Check {
        let name = name.into();
        match residual {
            Ok(r) => {
                let verdict = self.oracle(oracle).check(&r);
                let detail = if verdict.is_zero() { String::new() } else { self.render(&r) };
                Check { name, verdict, detail }
            }
            Err(e) => Check { name, verdict: Verdict::Undecidable(e.to_string()), detail: e.to_string() },
        }
    }

    /// Names of every symbol the system declares.
    pub fn declared_symbols(&self) -> Vec<String> {
        let mut v: Vec<String> = self.spec.independent.clone();
        v.extend(self.spec.params.iter().map(|p| p.name.clone()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_expr_in, Scope};

    fn kdv_cov() -> EqSystem {
        let spec = SystemSpec {
            independent: vec!["x".into(), "t".into()],
            vars: vec![Var { name: "z".into(), nonlocal: false }, Var { name: "rho".into(), nonlocal: true }],
            params: vec![Param { name: "lambda".into(), nonzero: true }],
            distinct: vec![],
            rules: vec![],
        };
        let sc = scope(&spec);
        let p = |s: &str| parse_expr_in(s, &sc).unwrap();
        let rules = vec![
            Rule { var: "z".into(), lead: MultiIndex::from_slice(&[3, 0]), rhs: p("-z_t - 6*z*z_x") },
            Rule { var: "rho".into(), lead: MultiIndex::from_slice(&[1, 0]), rhs: p("-rho^2 - z - lambda") },
            Rule {
                var: "rho".into(),
                lead: MultiIndex::from_slice(&[0, 1]),
                rhs: p("-z_xx - 2*z^2 + 2*lambda*z + 4*lambda^2 + 2*z_x*rho + (4*lambda - 2*z)*(-rho^2 - z - lambda) + 2*z*(-rho^2-z-lambda) - 4*lambda*(-rho^2-z-lambda)"),
            },
        ];
        EqSystem::new(SystemSpec { rules, ..spec }).unwrap()
    }

    fn scope(spec: &SystemSpec) -> Scope {
        Scope {
            independent: spec.independent.clone(),
            dependent: spec.vars.iter().map(|v| v.name.clone()).collect(),
            params: spec.params.iter().map(|p| p.name.clone()).collect(),
            strict: true,
            ..Scope::default()
        }
    }

    #[test]
    fn nonlocal_derivative_routes_through_rule() {
        let s = kdv_cov();
        let rho = s.spec().coord("rho");
        let d = s.total_derivative(&rho, 0).unwrap();
        assert_eq!(s.render(&d), "-lambda - rho^2 - z");
    }

    #[test]
    fn reduce_kdv() {
        let s = kdv_cov();
        let sc = scope(s.spec());
        let e = parse_expr_in("z_xxx + z_t + 6*z*z_x", &sc).unwrap();
        assert!(s.reduce(&e).unwrap().is_zero());
        let xt = parse_expr_in("x*t", &Scope::free()).unwrap();
        assert_eq!(s.total_derivative(&xt, 0).unwrap(), Expr::sym("t"));
    }

    #[test]
    fn constructed_incompatibility() {
        let sc = Scope::free();
        let spec = SystemSpec {
            independent: vec!["x".into(), "t".into()],
            vars: vec![Var { name: "z".into(), nonlocal: false }],
            rules: vec![
                Rule { var: "z".into(), lead: MultiIndex::from_slice(&[1, 0]), rhs: parse_expr_in("t", &sc).unwrap() },
                Rule { var: "z".into(), lead: MultiIndex::from_slice(&[0, 1]), rhs: parse_expr_in("2*x", &sc).unwrap() },
            ],
            ..SystemSpec::default()
        };
        let s = EqSystem::new(spec).unwrap();
        let rep = s.validate(&Oracle::default());
        assert!(rep.iter().any(|c| !c.pass()));
    }

    #[test]
    fn ranking_violation_rejected() {
        let sc = Scope { dependent: vec!["z".into()], ..Scope::free() };
        let spec = SystemSpec {
            independent: vec!["x".into(), "t".into()],
            vars: vec![Var { name: "z".into(), nonlocal: false }],
            rules: vec![Rule { var: "z".into(), lead: MultiIndex::from_slice(&[0, 1]), rhs: parse_expr_in("z_xx", &sc).unwrap() }],
            ..SystemSpec::default()
        };
        assert!(matches!(EqSystem::new(spec), Err(JetError::RankingViolation { .. })));
    }
}
