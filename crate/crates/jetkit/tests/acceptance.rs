//! Acceptance run: one line per criterion.
//!
//! A few printed formulas do not hold as written. Those claims are evaluated
//! literally, reported as `FAIL-as-stated`, and asserted verbatim by the ignored
//! tests at the end of this file; the corrected forms are asserted here.

mod common;

use common::*;
use jetkit::expr::Verdict;
use jetkit::forms::{flatness_checks, is_conservation_law, is_zcr, riccati_covering, ZcrConvention};
use jetkit::jet::{Check, EqSystem};
use jetkit::morphism::{factor_check, verify_morphism};
use jetkit::numeric::{run_soliton, Grid};
use jetkit::parser::{parse_expr_in, scope_of, Problem};
use jetkit::pseudosym::{check_pseudosymmetry, check_r_pseudosymmetry, FieldForm, PseudoField};
use jetkit::search::{hunt_relations, search_pseudosymmetry, spans};
use jetkit::{Expr, Oracle};
use proptest::prelude::*;
use proptest::test_runner::TestError;

#[derive(Clone, Copy, PartialEq, Debug)]
enum Mark {
    Pass,
    FailAsStated,
    Fail,
}

struct Line {
    id: u32,
    mark: Mark,
    detail: String,
}

fn all_symbolic(checks: &[Check]) -> bool {
    !checks.is_empty() && checks.iter().all(|c| c.verdict == Verdict::Symbolic)
}

fn all_pass(checks: &[Check]) -> bool {
    !checks.is_empty() && checks.iter().all(|c| c.pass())
}

fn first_failure(checks: &[Check]) -> String {
    checks.iter().find(|c| !c.pass()).map(|c| format!("{}: {}", c.name, c.detail)).unwrap_or_default()
}

fn morphism_checks(p: &Problem, m: &str) -> Vec<Check> {
    let named = p.morphisms.iter().find(|x| x.name == m).unwrap();
    let target = p.target(&named.target).unwrap();
    verify_morphism(&named.morphism, &p.system, target, &Oracle::default()).unwrap()
}

fn pseudosym(p: &Problem, f: &str) -> Vec<Check> {
    let sys = p.field_system(f);
    check_pseudosymmetry(p.field(f).unwrap(), sys, &sys.oracle(&Oracle::default())).unwrap()
}

fn scalar_multiple(y: &PseudoField) -> Option<String> {
    match &y.form {
        FieldForm::Scalar { c, .. } => Some(c.to_string()),
        FieldForm::Matrix(_) => None,
    }
}

/// Whether two rank-one fields agree up to a nonzero constant factor.
fn proportional(f: &PseudoField, g: &PseudoField, sys: &EqSystem) -> bool {
    let oracle = sys.oracle(&Oracle::default());
    let entries = |y: &PseudoField| -> Vec<Expr> {
        let mut v: Vec<Expr> = y.a.iter().flatten().cloned().collect();
        for var in &sys.spec().vars {
            v.push(y.phi.iter().find(|(n, _)| n == &var.name).map(|(_, c)| c[0].clone()).unwrap_or_else(Expr::zero));
        }
        v
    };
    let (ef, eg) = (entries(f), entries(g));
    let Some(k) = ef.iter().position(|e| !e.is_zero()) else { return false };
    let Ok(ratio) = eg[k].checked_div(&ef[k]) else { return false };
    if ratio.as_rational().is_none_or(|q| q == jetkit::expr::q(0)) {
        return false;
    }
    ef.iter().zip(&eg).all(|(a, b)| oracle.is_zero(&b.sub(&a.mul(&ratio))))
}

fn cole_hopf() -> Line {
    let p = load("heat_cole_hopf");
    let checks = morphism_checks(&p, "B");
    let ok = all_symbolic(&checks);
    Line { id: 1, mark: if ok { Mark::Pass } else { Mark::Fail }, detail: format!("Burgers pulls back to 0 mod heat ({} symbolic checks)", checks.len()) }
}

fn miura() -> Line {
    let p = load("mkdv_miura");
    let checks = morphism_checks(&p, "B");
    let ok = all_symbolic(&checks);
    Line { id: 2, mark: if ok { Mark::Pass } else { Mark::Fail }, detail: format!("KdV pulls back to 0 mod mKdV ({} symbolic checks)", checks.len()) }
}

fn kdv_riccati() -> Line {
    let p = load("kdv_abt");
    let base = p.base_system().unwrap();
    let oracle = base.oracle(&Oracle::default());
    let r = riccati_covering(p.form("alpha").unwrap(), 1, &["rho"], &base, &oracle).unwrap();
    let mut exact = 0;
    let mut total = 0;
    for rule in r.covering.spec().rules.iter().filter(|q| q.var == "rho") {
        total += 1;
        let want = p.system.rules().iter().find(|q| q.var == rule.var && q.lead == rule.lead).unwrap();
        if rule.rhs.sub(&want.rhs).is_zero() {
            exact += 1;
        }
    }
    let scope = p.scope();
    let mu = [parse_expr_in("rho", &scope).unwrap(), parse_expr_in("z_x + (4*lambda - 2*z)*rho", &scope).unwrap()];
    for (i, m) in mu.iter().enumerate() {
        total += 1;
        if r.mu.scalar_comp(i).sub(m).is_zero() {
            exact += 1;
        }
    }
    let ok = exact == total && total == 4;
    Line { id: 3, mark: if ok { Mark::Pass } else { Mark::Fail }, detail: format!("{exact}/{total} covering rules and conservation-law components equal term by term") }
}

const SCALAR_FIELDS: [&str; 5] = ["kdv_abt", "sine_gordon", "short_pulse", "camassa_holm", "harry_dym"];

fn scalar_fields() -> Line {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in SCALAR_FIELDS {
        let p = load(name);
        let c2 = scalar_multiple(p.field("Y").unwrap()).as_deref() == Some("2");
        let pass = c2 && all_pass(&pseudosym(&p, "Y"));
        ok &= pass;
        notes.push(format!("{name} {}", if pass { "ok" } else { "FAILED" }));
    }
    let literal = pseudosym(&load("sine_gordon"), "Yliteral");
    let literal_ok = all_pass(&literal);
    let mark = match (ok, literal_ok) {
        (false, _) => Mark::Fail,
        (true, false) => Mark::FailAsStated,
        (true, true) => Mark::Pass,
    };
    let mut detail = notes.join(", ");
    if !literal_ok {
        detail.push_str(&format!("; printed sine-Gordon field rejected ({}), corrected (rho^2+1)d_z - (rho^2+1)^2/4 d_rho passes", first_failure(&literal)));
    }
    Line { id: 4, mark, detail }
}

fn morphisms() -> Line {
    let cases = [
        ("kdv_abt", "B", false),
        ("kdv_darboux", "D", false),
        ("sine_gordon", "B", true),
        ("short_pulse", "B", false),
        ("camassa_holm", "B", false),
        ("camassa_holm", "D", false),
        ("harry_dym", "B", false),
        ("cnls", "B", false),
        ("tzitzeica", "B", true),
    ];
    let mut ok = true;
    let mut sampled = 0;
    for (name, m, kernel_heavy) in cases {
        let checks = morphism_checks(&load(name), m);
        let good = if kernel_heavy { all_pass(&checks) } else { all_symbolic(&checks) };
        sampled += checks.iter().filter(|c| c.verdict == Verdict::Probabilistic).count();
        if !good {
            eprintln!("  {name} {m}: {}", first_failure(&checks));
        }
        ok &= good;
    }
    Line { id: 5, mark: if ok { Mark::Pass } else { Mark::Fail }, detail: format!("{} morphisms verify, {sampled} checks needed sampling", cases.len()) }
}

fn tzitzeica() -> Line {
    let p = load("tzitzeica");
    let base = p.base_system().unwrap();
    let oracle = Oracle::default();
    let zcr = is_zcr(p.form("alpha").unwrap(), &base, ZcrConvention::Standard, &base.oracle(&oracle)).unwrap();
    let sys = p.field_system("Y");
    let so = sys.oracle(&oracle);
    let gamma = flatness_checks(p.form("gamma").unwrap(), sys, &so).unwrap();
    let literal = flatness_checks(p.form("gammaliteral").unwrap(), sys, &so).unwrap();
    let field = check_r_pseudosymmetry(p.field("Y").unwrap(), sys, &so).unwrap();
    let literal_field = check_r_pseudosymmetry(p.field("Yliteral").unwrap(), sys, &so).unwrap();
    let abt = morphism_checks(&p, "B");
    let ok = all_pass(&zcr) && all_pass(&gamma) && all_pass(&field) && all_pass(&abt);
    let literal_ok = all_pass(&literal) && all_pass(&literal_field);
    let mark = match (ok, literal_ok) {
        (false, _) => Mark::Fail,
        (true, false) => Mark::FailAsStated,
        (true, true) => Mark::Pass,
    };
    let bad = literal.iter().filter(|c| !c.pass()).count();
    Line {
        id: 6,
        mark,
        detail: format!(
            "3x3 form zero-curvature, ABT verifies; printed gamma with exp(3*z) has {bad} nonzero curvature entries, with exp(z) it is flat and Y is a 2-pseudosymmetry"
        ),
    }
}

fn quotient(p: &Problem, q: &str, target: &str) -> Vec<Check> {
    let sys = p.field_system("Y");
    factor_check(p.field("Y").unwrap(), p.morphism(q).unwrap(), sys, p.target(target).unwrap(), &sys.oracle(&Oracle::default())).unwrap()
}

fn recovers(p: &Problem, basis: &[&str]) -> bool {
    let target = p.target("q").unwrap();
    let scope = scope_of(target.spec());
    let basis: Vec<Expr> = basis.iter().map(|b| parse_expr_in(b, &scope).unwrap()).collect();
    let sys = p.field_system("Y");
    let rels = hunt_relations(p.field("Y"), p.morphism("Q").unwrap(), &basis, sys, &sys.oracle(&Oracle::default())).unwrap();
    basis.len() <= 6
        && target.rules().iter().all(|r| spans(&rels, &basis, &Expr::jet(&r.var, r.lead.clone()).sub(&r.rhs)).unwrap())
}

fn factorizations() -> Line {
    let heat = load("heat_cole_hopf");
    let mkdv = load("mkdv_miura");
    let ok = all_pass(&quotient(&heat, "Q", "q"))
        && all_pass(&quotient(&mkdv, "Q", "q"))
        && recovers(&heat, &["nu1_x", "nu1_t", "nu2", "nu2_x", "nu1^2", "nu1*nu2"])
        && recovers(&mkdv, &["nu1_xx", "nu2", "nu1^2", "nu1_t", "nu1*nu1_x", "nu2_x"]);
    let literal = quotient(&mkdv, "Qliteral", "qliteral");
    let literal_ok = all_pass(&literal);
    let mark = match (ok, literal_ok) {
        (false, _) => Mark::Fail,
        (true, false) => Mark::FailAsStated,
        (true, true) => Mark::Pass,
    };
    Line {
        id: 7,
        mark,
        detail: format!(
            "heat and mKdV quotients verify and are recovered from 6-monomial bases; printed 2*nu1 + nu1_xx - nu2 = 0 fails ({}), 2*nu1^2 + nu1_xx - nu2 = 0 holds",
            first_failure(&literal)
        ),
    }
}

/// Dimension of a declared search and whether every basis field is a multiple of `field`.
fn search_dim(p: &Problem, search: &str, field: &str) -> (usize, bool) {
    let decl = p.search(search).unwrap();
    let ansatz = p.ansatz(decl).unwrap();
    let out = search_pseudosymmetry(&ansatz, &p.system, &p.system.oracle(&Oracle::default())).unwrap();
    let dim = out.iter().map(|o| o.basis.len()).sum();
    let y = p.field(field).unwrap();
    let matches = out.iter().all(|o| o.verified() && o.fields.iter().all(|f| proportional(f, y, &p.system)));
    (dim, matches)
}

fn searches() -> Line {
    let kdv = load("kdv_abt");
    let sg = load("sine_gordon");
    let (dk, mk) = search_dim(&kdv, "S", "Y");
    let (ds, _) = search_dim(&sg, "S", "Y");
    let (d4, m4) = search_dim(&sg, "S4", "Y");
    let ok = dk == 1 && mk && d4 == 1 && m4;
    let mark = match (ok, ds == 1) {
        (false, _) => Mark::Fail,
        (true, false) => Mark::FailAsStated,
        (true, true) => Mark::Pass,
    };
    Line {
        id: 8,
        mark,
        detail: format!("KdV degree<=2 dim {dk} (matches Y: {mk}); sine-Gordon degree<=2 dim {ds}, degree<=4 dim {d4} (matches corrected Y: {m4})"),
    }
}

fn soliton() -> Line {
    let p = load("kdv_abt");
    let sd = p.soliton.clone().unwrap();
    let run = |h: f64| run_soliton(&p, &sd, Some(&Grid::square(-2.0, 2.0, h))).unwrap();
    let mid = run(1.0 / 64.0);
    let coarse = run(1.0 / 32.0);
    let dev = mid.deviations.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let (rc, rm) = (coarse.residual.unwrap(), mid.residual.unwrap());
    let ratio = rc / rm;
    let ok = dev < 1e-5 && rm < 5e-3 && ratio >= 4.0 * 0.8 && mid.image.masked_count() == 0;
    Line {
        id: 9,
        mark: if ok { Mark::Pass } else { Mark::Fail },
        detail: format!("max |z' - 2 sech^2(x - 4t)| = {dev:.2e} at h = 1/64; residual {rm:.2e}, {ratio:.1}x smaller than at h = 1/32"),
    }
}

fn text<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn properties() -> Line {
    let mut failures = Vec::new();
    let mut record = |name: &str, r: Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };
    record("normalize idempotence", text(runner(20).run(&kernel_expr(plain_symbols(), 8, 24), |e| normalize_idempotent(&e))));
    let names = ["a", "b", "c", "w"];
    record(
        "mixed partials",
        text(runner(20).run(&(kernel_expr(plain_symbols(), 4, 12), 0usize..4, 0usize..4), |(e, s, r)| mixed_partials(&e, names[s], names[r]))),
    );
    record("reduce projector", text(runner(20).run(&problem_exprs(&SOUND, 3, false, 2), |(n, es)| reduce_projector(n, &es[0], &es[1]))));
    record("on-shell commutation", text(runner(20).run(&problem_exprs(&SOUND, 2, true, 1), |(n, es)| on_shell_commutation(n, &es[0]))));
    record("factor order", text(runner(20).run(&field_case(), |(k, col)| factor_order(k, &col))));
    record(
        "prolongation consistency",
        text(runner(20).run(&(0..MORPHISMS.len(), prop::sample::select(vec![[0u32, 0], [1, 0], [0, 1]])), |(k, s)| {
            prolongation_consistency(k, &s)
        })),
    );
    record(
        "derived invariants",
        text(runner(20).run(&(0..INVARIANTS.len(), prop::collection::vec((-3i64..=3, -3i64..=3), 1..=3)), |(k, c)| {
            derived_invariance(k, &c)
        })),
    );
    let ok = failures.is_empty();
    Line {
        id: 10,
        mark: if ok { Mark::Pass } else { Mark::Fail },
        detail: if ok { "7 property suites, 20 random instances each".into() } else { failures.join("; ") },
    }
}

#[test]
fn acceptance() {
    let lines = [cole_hopf(), miura(), kdv_riccati(), scalar_fields(), morphisms(), tzitzeica(), factorizations(), searches(), soliton(), properties()];
    for l in &lines {
        let tag = match l.mark {
            Mark::Pass => "PASS",
            Mark::FailAsStated => "FAIL-as-stated",
            Mark::Fail => "FAIL",
        };
        println!("[{:>2}] {tag:<15} {}", l.id, l.detail);
    }
    let failed: Vec<u32> = lines.iter().filter(|l| l.mark == Mark::Fail).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}

// The printed formulas, asserted verbatim. They do not hold.

#[test]
#[ignore = "the printed sine-Gordon field is not tangent to the covering"]
fn printed_sine_gordon_field_is_a_pseudosymmetry() {
    assert!(all_pass(&pseudosym(&load("sine_gordon"), "Yliteral")));
}

#[test]
#[ignore = "the printed gamma with exp(3*z) is not flat"]
fn printed_tzitzeica_gamma_is_flat() {
    let p = load("tzitzeica");
    let sys = p.field_system("Yliteral");
    assert!(all_pass(&flatness_checks(p.form("gammaliteral").unwrap(), sys, &sys.oracle(&Oracle::default())).unwrap()));
    assert!(all_pass(&check_r_pseudosymmetry(p.field("Yliteral").unwrap(), sys, &sys.oracle(&Oracle::default())).unwrap()));
}

#[test]
#[ignore = "the printed relation 2*nu1 + nu1_xx - nu2 = 0 does not hold for the printed invariants"]
fn printed_miura_quotient_holds() {
    assert!(all_pass(&quotient(&load("mkdv_miura"), "Qliteral", "qliteral")));
}

#[test]
#[ignore = "no nonzero sine-Gordon pseudosymmetry is quadratic in rho"]
fn quadratic_sine_gordon_search_is_one_dimensional() {
    assert_eq!(search_dim(&load("sine_gordon"), "S", "Y").0, 1);
}

#[test]
fn conservation_laws_of_the_scalar_fields() {
    for name in SCALAR_FIELDS {
        let p = load(name);
        let Some(FieldForm::Scalar { mu, .. }) = p.field("Y").map(|y| &y.form) else { panic!("{name}") };
        let sys = p.field_system("Y");
        assert!(all_pass(&is_conservation_law(mu, sys, &sys.oracle(&Oracle::default())).unwrap()), "{name}");
    }
}
