//! Runs the assertions of a problem and classifies their outcomes.

use std::time::Instant;

use crate::expr::{Expr, Oracle, Verdict};
use crate::forms::{flatness_checks, is_conservation_law, is_zcr, is_zcr_wedge, riccati_covering};
use crate::jet::{Check, EqSystem};
use crate::morphism::{check_regularity, factor_check, verify_morphism};
use crate::parser::{AssertLine, Assertion, Problem, ZcrForm};
use crate::pseudosym::{check_pseudosymmetry, check_r_pseudosymmetry, is_invariant};
use crate::search::{hunt_relations, search_pseudosymmetry, spans};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    ProbabilisticPass,
    Fail,
    Undecidable,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::ProbabilisticPass => "probabilistic-pass",
            Status::Fail => "fail",
            Status::Undecidable => "undecidable",
        }
    }

    pub fn is_pass(self) -> bool {
        matches!(self, Status::Pass | Status::ProbabilisticPass)
    }
}

/// Worst verdict over a list of checks; an empty list passes.
pub fn status_of(checks: &[Check]) -> Status {
    let mut s = Status::Pass;
    for c in checks {
        s = match (&c.verdict, s) {
            (Verdict::NonZero(_), _) | (_, Status::Fail) => Status::Fail,
            (Verdict::Undecidable(_), _) | (_, Status::Undecidable) => Status::Undecidable,
            (Verdict::Probabilistic, _) | (_, Status::ProbabilisticPass) => Status::ProbabilisticPass,
            _ => Status::Pass,
        };
    }
    s
}

#[derive(Clone, Debug)]
pub struct AssertionReport {
    pub name: String,
    pub kind: String,
    pub line: usize,
    pub status: Status,
    pub checks: Vec<Check>,
    pub error: Option<String>,
    pub seconds: f64,
}

/// Exit status: 0 all pass, 1 a failure, 3 undecided results under strict mode.
///
/// Strict mode accepts only symbolic zeros; probabilistic passes count as undecided.
pub fn exit_code(reports: &[AssertionReport], strict: bool) -> i32 {
    if reports.iter().any(|r| r.status == Status::Fail) {
        return 1;
    }
    let undecided = reports.iter().any(|r| r.status == Status::Undecidable);
    let probabilistic = reports.iter().any(|r| r.status == Status::ProbabilisticPass);
    match (strict, undecided, probabilistic) {
        (true, true, _) | (true, _, true) => 3,
        (false, true, _) => 1,
        _ => 0,
    }
}

fn exact(name: String, diff: Expr, sys: &EqSystem) -> Check {
    if diff.is_zero() {
        Check { name, verdict: Verdict::Symbolic, detail: String::new() }
    } else {
        let r = sys.render(&diff);
        Check { name, verdict: Verdict::NonZero(format!("difference {r}")), detail: r }
    }
}

fn fail(name: &str, detail: String) -> Check {
    Check { name: name.to_string(), verdict: Verdict::NonZero(detail.clone()), detail }
}

fn run(p: &Problem, a: &Assertion, oracle: &Oracle) -> Result<Vec<Check>, String> {
    let sys = &p.system;
    let e = |x: &dyn std::fmt::Display| x.to_string();
    let form = |n: &str| p.form(n).ok_or_else(|| format!("unknown form `{n}`"));
    let field = |n: &str| p.field(n).ok_or_else(|| format!("unknown field `{n}`"));
    let morph = |n: &str| p.morphism(n).ok_or_else(|| format!("unknown morphism `{n}`"));
    let target = |n: &str| p.target(n).ok_or_else(|| format!("unknown target `{n}`"));
    Ok(match a {
        Assertion::Valid => sys.validate(oracle),
        Assertion::Conservation(m) => is_conservation_law(form(m)?, sys, oracle).map_err(|x| e(&x))?,
        Assertion::Zcr(f, ZcrForm::Convention(c)) => is_zcr(form(f)?, sys, *c, oracle).map_err(|x| e(&x))?,
        Assertion::Zcr(f, ZcrForm::Wedge) => is_zcr_wedge(form(f)?, sys, oracle).map_err(|x| e(&x))?,
        Assertion::Flat(f) => flatness_checks(form(f)?, sys, oracle).map_err(|x| e(&x))?,
        Assertion::Riccati { form: f, pivot, mu } => {
            let alpha = form(f)?;
            let base = p.base_system().map_err(|x| e(&x))?;
            let names: Vec<String> = sys.spec().nonlocal_vars().map(|v| v.name.clone()).take(alpha.dim().saturating_sub(1)).collect();
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let r = riccati_covering(alpha, *pivot, &refs, &base, oracle).map_err(|x| e(&x))?;
            let mut out = r.checks;
            for rule in &r.covering.spec().rules {
                if !names.contains(&rule.var) {
                    continue;
                }
                let lead = sys.render(&Expr::jet(&rule.var, rule.lead.clone()));
                let name = format!("covering rule {lead}");
                match sys.rules().iter().find(|q| q.var == rule.var && q.lead == rule.lead) {
                    Some(q) => out.push(exact(name, rule.rhs.sub(&q.rhs), sys)),
                    None => out.push(fail(&name, "not declared in the problem".into())),
                }
            }
            let want = form(mu)?;
            for (i, v) in sys.spec().independent.iter().enumerate() {
                out.push(exact(format!("conservation law d{v}"), r.mu.scalar_comp(i).sub(want.scalar_comp(i)), sys));
            }
            out
        }
        Assertion::Pseudosymmetry(y) => check_pseudosymmetry(field(y)?, p.field_system(y), oracle).map_err(|x| e(&x))?,
        Assertion::RPseudosymmetry(y) => check_r_pseudosymmetry(field(y)?, p.field_system(y), oracle).map_err(|x| e(&x))?,
        Assertion::Invariant { field: y, expr } => is_invariant(field(y)?, expr, p.field_system(y), oracle).map_err(|x| e(&x))?,
        Assertion::Morphism { morphism, target: t } => {
            verify_morphism(morph(morphism)?, sys, target(t)?, oracle).map_err(|x| e(&x))?
        }
        Assertion::Regular(m) => vec![check_regularity(morph(m)?, sys, oracle)],
        Assertion::Factor { field: y, morphism, target: t } => {
            factor_check(field(y)?, morph(morphism)?, p.field_system(y), target(t)?, oracle).map_err(|x| e(&x))?
        }
        Assertion::Zero(x) => vec![sys.check(format!("zero {}", sys.render(x)), sys.reduce(x), oracle)],
        Assertion::Search { search, dim } => {
            let decl = p.search(search).ok_or_else(|| format!("unknown search `{search}`"))?;
            let ansatz = p.ansatz(decl).ok_or_else(|| format!("unknown form `{}`", decl.mu))?;
            let outcomes = search_pseudosymmetry(&ansatz, sys, oracle).map_err(|x| e(&x))?;
            let total: usize = outcomes.iter().map(|o| o.basis.len()).sum();
            let mut out = vec![if total == *dim {
                Check { name: "solution dimension".into(), verdict: Verdict::Symbolic, detail: total.to_string() }
            } else {
                fail("solution dimension", format!("found {total}, expected {dim}"))
            }];
            for o in &outcomes {
                for (k, checks) in o.checks.iter().enumerate() {
                    for c in checks {
                        out.push(Check { name: format!("c={} basis {}: {}", o.c, k + 1, c.name), ..c.clone() });
                    }
                }
            }
            out
        }
        Assertion::Relations { field: y, morphism, target: t, basis } => {
            let y = y.as_deref().map(field).transpose()?;
            let tsys = target(t)?;
            let rels = hunt_relations(y, morph(morphism)?, basis, sys, oracle).map_err(|x| e(&x))?;
            let mut out: Vec<Check> = rels.iter().map(|r| r.check.clone()).collect();
            for rule in tsys.rules() {
                let lead = Expr::jet(&rule.var, rule.lead.clone());
                let name = format!("recovers {}", tsys.render(&lead));
                let ok = spans(&rels, basis, &lead.sub(&rule.rhs)).map_err(|x| e(&x))?;
                out.push(if ok {
                    Check { name, verdict: Verdict::Symbolic, detail: String::new() }
                } else {
                    fail(&name, "rule is not a combination of the relations found".into())
                });
            }
            out
        }
    })
}

pub fn run_assertion(p: &Problem, a: &AssertLine, oracle: &Oracle) -> AssertionReport {
    let start = Instant::now();
    let o = p.system.oracle(oracle);
    let (checks, error) = match run(p, &a.kind, &o) {
        Ok(c) => (c, None),
        Err(msg) => (Vec::new(), Some(msg)),
    };
    let status = if error.is_some() { Status::Fail } else { status_of(&checks) };
    AssertionReport {
        name: a.text.clone(),
        kind: a.keyword().to_string(),
        line: a.line,
        status,
        checks,
        error,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// All assertions, run concurrently, reported in declaration order.
pub fn verify_problem(p: &Problem, oracle: &Oracle) -> Vec<AssertionReport> {
    std::thread::scope(|s| {
        let handles: Vec<_> = p.assertions.iter().map(|a| s.spawn(move || run_assertion(p, a, oracle))).collect();
        handles.into_iter().map(|h| h.join().expect("assertion thread panicked")).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(v: Verdict) -> Check {
        Check { name: String::new(), verdict: v, detail: String::new() }
    }

    #[test]
    fn worst_verdict_wins() {
        assert_eq!(status_of(&[]), Status::Pass);
        assert_eq!(status_of(&[check(Verdict::Symbolic), check(Verdict::Probabilistic)]), Status::ProbabilisticPass);
        assert_eq!(status_of(&[check(Verdict::Undecidable("x".into())), check(Verdict::Probabilistic)]), Status::Undecidable);
        assert_eq!(status_of(&[check(Verdict::NonZero("1".into())), check(Verdict::Undecidable("x".into()))]), Status::Fail);
    }

    #[test]
    fn exit_codes() {
        let rep = |s| AssertionReport { name: String::new(), kind: String::new(), line: 0, status: s, checks: vec![], error: None, seconds: 0.0 };
        assert_eq!(exit_code(&[rep(Status::Pass)], true), 0);
        assert_eq!(exit_code(&[rep(Status::ProbabilisticPass)], false), 0);
        assert_eq!(exit_code(&[rep(Status::ProbabilisticPass)], true), 3);
        assert_eq!(exit_code(&[rep(Status::Undecidable)], true), 3);
        assert_eq!(exit_code(&[rep(Status::Undecidable), rep(Status::Fail)], true), 1);
    }
}
