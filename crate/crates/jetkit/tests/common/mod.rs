//! Strategies and property bodies shared by the property suites and the acceptance run.
#![allow(dead_code)]

use std::collections::HashMap;

use astro_float::{BigFloat, RoundingMode};
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use jetkit::corpus;
use jetkit::expr::{canonical, sym_id, EvalEnv};
use jetkit::forms::{
    gauge_transform, is_conservation_law, is_zcr, is_zcr_wedge, riccati_covering, HForm, Mat, ZcrConvention,
};
use jetkit::jet::{EqSystem, Param, SystemSpec, Var};
use jetkit::morphism::{Morphism, Prolongation};
use jetkit::parser::{parse_expr, parse_expr_in, Problem};
use jetkit::pseudosym::{apply_field, derived_invariants, Prolonger};
use jetkit::{Expr, MultiIndex, Oracle};

pub type Outcome = Result<(), TestCaseError>;

/// Problems whose every assertion holds.
pub const SOUND: [&str; 10] = [
    "heat_cole_hopf",
    "mkdv_miura",
    "kdv_abt",
    "kdv_darboux",
    "sine_gordon",
    "short_pulse",
    "camassa_holm",
    "harry_dym",
    "cnls",
    "tzitzeica",
];

pub fn load(name: &str) -> Problem {
    corpus::load(name).unwrap_or_else(|e| panic!("{e}"))
}

fn small_rational() -> impl Strategy<Value = Expr> {
    (-6i64..=6, 1i64..=4).prop_map(|(n, d)| Expr::frac(n, d))
}

/// Rational functions over the given leaves.
pub fn rational_expr(leaves: Vec<Expr>, depth: u32, size: u32) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![3 => prop::sample::select(leaves), 1 => small_rational()];
    leaf.prop_recursive(depth, size, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| capped(&[&a, &b], || a.mul(&b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| capped(&[&a, &b], || a.checked_div(&b).unwrap_or_else(|_| a.clone()))),
            (inner.clone(), -2i64..=2).prop_map(|(a, k)| capped(&[&a], || a.powi(k).unwrap_or_else(|_| a.clone()))),
        ]
    })
    .boxed()
}

/// Applies `grow` unless `base` is already large, keeping expansions within memory.
fn capped(parts: &[&Expr], grow: impl FnOnce() -> Expr) -> Expr {
    if parts.iter().map(|e| e.to_string().len()).sum::<usize>() > 300 {
        parts[0].clone()
    } else {
        grow()
    }
}

/// Trig of short arguments only; sums and integer multiples expand in full.
fn small_angle(a: &Expr, f: fn(&Expr) -> Expr) -> Expr {
    if a.to_string().len() > 40 {
        a.clone()
    } else {
        f(a)
    }
}

/// Rational functions with exp, sin, cos, arctan and sqrt applied to subterms.
pub fn kernel_expr(leaves: Vec<Expr>, depth: u32, size: u32) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![3 => prop::sample::select(leaves), 1 => small_rational()];
    leaf.prop_recursive(depth, size, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.sub(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| capped(&[&a, &b], || a.mul(&b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| capped(&[&a, &b], || a.checked_div(&b).unwrap_or_else(|_| a.clone()))),
            (inner.clone(), -2i64..=2).prop_map(|(a, k)| capped(&[&a], || a.powi(k).unwrap_or_else(|_| a.clone()))),
            inner.clone().prop_map(|a| Expr::exp(&a)),
            inner.clone().prop_map(|a| small_angle(&a, Expr::sin)),
            inner.clone().prop_map(|a| small_angle(&a, Expr::cos)),
            inner.clone().prop_map(|a| Expr::arctan(&a)),
            inner.clone().prop_map(|a| capped(&[&a, &a], || Expr::sqrt(&a.mul(&a).add(&Expr::one())))),
        ]
    })
    .boxed()
}

pub fn plain_symbols() -> Vec<Expr> {
    ["a", "b", "c", "w"].iter().map(|s| Expr::sym(s)).collect()
}

/// Coordinates of a system: independent variables, parameters, nonlocals and local jets up to `order`.
pub fn coordinates(sys: &EqSystem, order: u32, reduced: bool) -> Vec<Expr> {
    let spec = sys.spec();
    let n = spec.n();
    let mut out: Vec<Expr> = spec.independent.iter().map(|s| Expr::sym(s)).collect();
    out.extend(spec.params.iter().map(|p| Expr::sym(&p.name)));
    for v in &spec.vars {
        if v.nonlocal {
            out.push(spec.coord(&v.name));
            continue;
        }
        for idx in multi_indices(n, order) {
            let e = Expr::jet(&v.name, idx);
            match (reduced, sys.reduce(&e)) {
                (true, Ok(r)) => out.push(r),
                (false, _) => out.push(e),
                _ => {}
            }
        }
    }
    out
}

fn multi_indices(n: usize, order: u32) -> Vec<MultiIndex> {
    let mut out = vec![MultiIndex::zero(n)];
    let mut frontier = out.clone();
    for _ in 0..order {
        let mut next = Vec::new();
        for m in &frontier {
            for i in 0..n {
                let k = m.inc(i);
                if !next.contains(&k) {
                    next.push(k);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// A corpus problem index with expressions over its coordinates.
pub fn problem_exprs(names: &'static [&'static str], order: u32, reduced: bool, count: usize) -> BoxedStrategy<(&'static str, Vec<Expr>)> {
    prop::sample::select(names)
        .prop_flat_map(move |name| {
            let p = load(name);
            let leaves = coordinates(&p.system, order, reduced);
            (Just(name), prop::collection::vec(rational_expr(leaves, 3, 8), count))
        })
        .boxed()
}

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn fail(msg: String) -> Outcome {
    Err(TestCaseError::fail(msg))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Outcome {
    if ok {
        Ok(())
    } else {
        fail(msg())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

// expression layer

pub fn normalize_idempotent(e: &Expr) -> Outcome {
    let once = e.normalize();
    ensure(canonical(&once.normalize()) == canonical(&once), || format!("normalize moved {once}"))
}

pub fn mixed_partials(e: &Expr, s: &str, r: &str) -> Outcome {
    let (s, r) = (sym_id(s), sym_id(r));
    let sr = e.diff(s).diff(r).normalize();
    let rs = e.diff(r).diff(s).normalize();
    ensure(sr.sub(&rs).normalize().is_zero(), || format!("d/ds d/dr of {e} differ"))
}

pub fn substitute_identity(e: &Expr) -> Outcome {
    let id: HashMap<_, _> = e.leaves().into_iter().map(|a| (a, Expr::atom(a))).collect();
    let back = ok(e.substitute(&id))?;
    ensure(back.sub(e).is_zero(), || format!("identity substitution moved {e}"))
}

pub fn parse_render_round_trip(e: &Expr) -> Outcome {
    let text = e.to_string();
    let back = ok(parse_expr(&text))?;
    ensure(back.normalize().sub(&e.normalize()).is_zero(), || format!("{text} reparsed as {back}"))
}

/// Arithmetic tree over kernel expressions, kept unsimplified.
#[derive(Clone, Debug)]
pub enum Tree {
    Leaf(Expr),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
}

pub fn tree() -> BoxedStrategy<Tree> {
    kernel_expr(plain_symbols(), 2, 4)
        .prop_map(Tree::Leaf)
        .prop_recursive(4, 16, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Tree::Div(Box::new(a), Box::new(b))),
            ]
        })
        .boxed()
}

impl Tree {
    /// The simplified expression; `None` on a division by zero.
    fn symbolic(&self) -> Option<Expr> {
        Some(match self {
            Tree::Leaf(e) => e.clone(),
            Tree::Add(a, b) => a.symbolic()?.add(&b.symbolic()?),
            Tree::Sub(a, b) => a.symbolic()?.sub(&b.symbolic()?),
            Tree::Mul(a, b) => a.symbolic()?.mul(&b.symbolic()?),
            Tree::Div(a, b) => a.symbolic()?.checked_div(&b.symbolic()?).ok()?,
        })
    }

    /// Leaf values from the evaluator, combined operation by operation.
    fn numeric(&self, env: &mut EvalEnv) -> Option<BigFloat> {
        const P: usize = 256;
        let rm = RoundingMode::ToEven;
        Some(match self {
            Tree::Leaf(e) => env.eval(e).ok()?,
            Tree::Add(a, b) => a.numeric(env)?.add(&b.numeric(env)?, P, rm),
            Tree::Sub(a, b) => a.numeric(env)?.sub(&b.numeric(env)?, P, rm),
            Tree::Mul(a, b) => a.numeric(env)?.mul(&b.numeric(env)?, P, rm),
            Tree::Div(a, b) => {
                let d = b.numeric(env)?;
                if env.to_f64(&d).abs() < 1e-12 {
                    return None;
                }
                a.numeric(env)?.div(&d, P, rm)
            }
        })
    }
}

/// The simplified expression and the operation-by-operation value agree to 1e-30 at 50 digits.
pub fn numeric_soundness(t: &Tree, points: &[Vec<(i64, i64)>]) -> Outcome {
    let Some(e) = t.symbolic() else { return Ok(()) };
    let syms: Vec<_> = plain_symbols().iter().map(|s| s.as_atom().unwrap()).collect();
    for pt in points {
        let mut env = EvalEnv::new(50);
        for (s, (n, d)) in syms.iter().zip(pt) {
            env.bind(*s, &BigRational::new((*n).into(), (*d).into()));
        }
        let (Ok(fast), Some(slow)) = (env.eval(&e), t.numeric(&mut env)) else { continue };
        let diff = fast.sub(&slow, 256, RoundingMode::ToEven);
        let d = env.to_f64(&diff).abs();
        let scale = env.to_f64(&slow).abs().max(1.0);
        if d.is_nan() || d >= 1e-30 * scale {
            return fail(format!("{e} is off by {d:e} from its unsimplified value"));
        }
    }
    Ok(())
}

pub fn sample_points() -> impl Strategy<Value = Vec<Vec<(i64, i64)>>> {
    let q = (prop_oneof![-99i64..=-1, 1i64..=99], 1i64..=99).prop_filter("in [1/4, 4]", |(n, d)| {
        let v = (*n as f64 / *d as f64).abs();
        (0.25..=4.0).contains(&v)
    });
    prop::collection::vec(prop::collection::vec(q, 4), 20)
}

// jet layer

pub fn on_shell_commutation(name: &str, e: &Expr) -> Outcome {
    let p = load(name);
    let sys = &p.system;
    let e = ok(sys.reduce(e))?;
    let xt = ok(sys.total_derivative(&ok(sys.total_derivative(&e, 1))?, 0))?;
    let tx = ok(sys.total_derivative(&ok(sys.total_derivative(&e, 0))?, 1))?;
    let d = ok(sys.reduce(&xt.sub(&tx)))?;
    ensure(sys.oracle(&Oracle::default()).is_zero(&d), || format!("{name}: D_x D_t - D_t D_x of {} is {}", sys.render(&e), sys.render(&d)))
}

pub fn reduce_projector(name: &str, e1: &Expr, e2: &Expr) -> Outcome {
    let p = load(name);
    let sys = &p.system;
    let r1 = ok(sys.reduce(e1))?;
    ensure(ok(sys.reduce(&r1))?.sub(&r1).is_zero(), || format!("{name}: reduce not idempotent on {}", sys.render(e1)))?;
    let r2 = ok(sys.reduce(e2))?;
    let whole = ok(sys.reduce(&e1.add(e2)))?;
    let parts = ok(sys.reduce(&r1.add(&r2)))?;
    ensure(whole.sub(&parts).is_zero() || sys.oracle(&Oracle::default()).is_zero(&whole.sub(&parts)), || {
        format!("{name}: reduce is not additive on {} + {}", sys.render(e1), sys.render(e2))
    })?;
    ensure(sys.is_reduced(&r1), || format!("{name}: {} is not reduced", sys.render(&r1)))
}

/// Reduction in the doubled covering agrees with the single one on unhatted coordinates.
pub fn double_restricts(name: &str, e: &Expr) -> Outcome {
    let p = load(name);
    let cov = p.covering();
    let nonlocal = cov.nonlocal_names();
    let renames: Vec<(String, String)> = nonlocal.iter().map(|v| (v.clone(), format!("{v}hat"))).collect();
    let refs: Vec<(&str, &str)> = renames.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let doubled = ok(ok(cov.double(&refs))?.merge())?;
    for i in 0..p.system.n() {
        let single = ok(p.system.total_derivative(e, i))?;
        let twice = ok(doubled.total_derivative(e, i))?;
        ensure(single.sub(&twice).is_zero(), || format!("{name}: doubled D_{i} differs on {}", p.system.render(e)))?;
    }
    Ok(())
}

// forms layer

/// Commuting constant pair X, T = aX + bI; the Riccati covering is flat and μ is closed.
pub fn constant_riccati(entries: &[(i64, i64)], a: i64, b: i64, pivot: usize) -> Outcome {
    let l = (entries.len() as f64).sqrt() as usize;
    let x: Vec<Vec<Expr>> = (0..l).map(|i| (0..l).map(|j| Expr::frac(entries[i * l + j].0, entries[i * l + j].1)).collect()).collect();
    let xm = ok(Mat::new(x))?;
    let tm = ok(xm.scale(&Expr::int(a)).add(&Mat::identity(l).scale(&Expr::int(b))))?;
    let alpha = ok(HForm::matrix(vec![xm, tm]))?;
    let sys = free_system();
    let names: Vec<String> = (1..l).map(|k| format!("r{k}")).collect();
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let oracle = Oracle::default();
    let r = ok(riccati_covering(&alpha, pivot, &refs, &sys, &oracle))?;
    let merged = ok(r.covering.merge())?;
    let flat = merged.validate(&merged.oracle(&oracle));
    ensure(flat.iter().all(|c| c.pass()), || format!("covering not flat: {:?}", flat.iter().find(|c| !c.pass())))?;
    let law = ok(is_conservation_law(&r.mu, &merged, &merged.oracle(&oracle)))?;
    ensure(law.iter().all(|c| c.pass()), || "mu not closed".into())
}

/// Jet space over x, t with one free local variable z.
pub fn free_system() -> EqSystem {
    EqSystem::new(SystemSpec {
        independent: vec!["x".into(), "t".into()],
        vars: vec![Var { name: "z".into(), nonlocal: false }],
        params: vec![Param { name: "lambda".into(), nonzero: true }],
        distinct: vec![],
        rules: vec![],
    })
    .expect("free jet space")
}

/// S = [[1, p], [0, 1]]·[[1, 0], [q, 1]] has determinant one.
pub fn gauge_keeps_zcr(name: &str, p: &Expr, q: &Expr) -> Outcome {
    let prob = load(name);
    let sys = prob.base_system().unwrap();
    let oracle = sys.oracle(&Oracle::default());
    let alpha = prob.form("alpha").unwrap();
    let up = ok(Mat::new(vec![vec![Expr::one(), p.clone()], vec![Expr::zero(), Expr::one()]]))?;
    let lo = ok(Mat::new(vec![vec![Expr::one(), Expr::zero()], vec![q.clone(), Expr::one()]]))?;
    let s = ok(up.mul(&lo))?;
    let g = ok(gauge_transform(alpha, &s, &sys, &oracle))?;
    let std = ok(is_zcr(&g, &sys, ZcrConvention::Standard, &oracle))?;
    let wedge = ok(is_zcr_wedge(&g, &sys, &oracle))?;
    ensure(std.iter().all(|c| c.pass()), || format!("{name}: gauged form lost zero curvature"))?;
    ensure(wedge.iter().all(|c| c.pass()), || format!("{name}: wedge checker disagrees"))
}

// pseudosymmetry layer

/// (problem, field) pairs and the rank of the field.
pub const FIELDS: [(&str, &str); 8] = [
    ("kdv_abt", "Y"),
    ("sine_gordon", "Y"),
    ("mkdv_miura", "Y"),
    ("short_pulse", "Y"),
    ("camassa_holm", "Y"),
    ("harry_dym", "Y"),
    ("cnls", "Y"),
    ("tzitzeica", "Y"),
];

pub fn field_case() -> BoxedStrategy<(usize, Vec<Expr>)> {
    (0..FIELDS.len())
        .prop_flat_map(|k| {
            let (name, f) = FIELDS[k];
            let p = load(name);
            let r = p.field(f).unwrap().rank();
            let leaves = coordinates(p.field_system(f), 1, true);
            (Just(k), prop::collection::vec(rational_expr(leaves, 2, 6), r))
        })
        .boxed()
}

pub fn factor_order(k: usize, col: &[Expr]) -> Outcome {
    let (name, f) = FIELDS[k];
    let p = load(name);
    let sys = p.field_system(f);
    let y = p.field(f).unwrap();
    let pr = ok(Prolonger::new(y, sys))?;
    let col: Vec<Expr> = col.iter().map(|e| sys.reduce(e)).collect::<Result<_, _>>().map_err(|e| TestCaseError::fail(e.to_string()))?;
    let xt = ok(pr.along(&col, &[0, 1]))?;
    let tx = ok(pr.along(&col, &[1, 0]))?;
    let oracle = sys.oracle(&Oracle::default());
    for (a, b) in xt.iter().zip(&tx) {
        let d = ok(sys.reduce(&a.sub(b)))?;
        ensure(oracle.is_zero(&d), || format!("{name}: factor order matters: {}", sys.render(&d)))?;
    }
    Ok(())
}

/// (problem, field, basic invariant other than x and t).
pub const INVARIANTS: [(&str, &str, &str); 4] = [
    ("kdv_abt", "Y", "z + 2*rho^2"),
    ("sine_gordon", "Y", "z + 4*arctan(rho)"),
    ("heat_cole_hopf", "Y", "u_x/u"),
    ("mkdv_miura", "Y", "u_x - u^2"),
];

/// ν = polynomial in a basic invariant and t; every derived invariant is killed by Y.
pub fn derived_invariance(k: usize, coeffs: &[(i64, i64)]) -> Outcome {
    let (name, f, inv) = INVARIANTS[k];
    let p = load(name);
    let sys = p.field_system(f);
    let y = p.field(f).unwrap();
    let oracle = sys.oracle(&Oracle::default());
    let i = ok(parse_expr_in(inv, &p.scope()))?;
    let t = Expr::sym("t");
    let mut nu = Expr::zero();
    for (deg, (a, b)) in coeffs.iter().enumerate() {
        nu = nu.add(&Expr::int(*a).mul(&ok(i.powi(deg as i64 + 1))?)).add(&Expr::int(*b).mul(&ok(t.powi(deg as i64))?));
    }
    let xi = [Expr::sym("x"), t];
    let table = ok(derived_invariants(&xi, &[nu], sys, &oracle))?;
    for row in &table {
        for e in row {
            let moved = ok(apply_field(y, e, sys))?;
            ensure(moved.iter().all(|m| oracle.is_zero(m)), || format!("{name}: Y moves {}", sys.render(e)))?;
        }
    }
    Ok(())
}

// morphism layer

pub const MORPHISMS: [(&str, &str); 9] = [
    ("heat_cole_hopf", "B"),
    ("mkdv_miura", "B"),
    ("kdv_abt", "B"),
    ("kdv_darboux", "D"),
    ("sine_gordon", "B"),
    ("short_pulse", "B"),
    ("camassa_holm", "B"),
    ("harry_dym", "B"),
    ("tzitzeica", "B"),
];

/// D_s(ν_σ) = Σ_i (D_s ξ^i) ν_{σ+1_i} for |σ| ≤ 1.
pub fn prolongation_consistency(k: usize, sigma: &[u32]) -> Outcome {
    let (name, m) = MORPHISMS[k];
    let p = load(name);
    let sys = &p.system;
    let morph = p.morphism(m).unwrap();
    let oracle = sys.oracle(&Oracle::default());
    let pr = ok(Prolongation::new(morph, sys, &oracle))?;
    let sigma = MultiIndex::from_slice(sigma);
    let n = sys.n();
    for j in 0..morph.nu.len() {
        let v = ok(pr.prolong(j, &sigma))?;
        for s in 0..n {
            let lhs = ok(sys.total_derivative(&v, s))?;
            let mut rhs = Vec::new();
            for i in 0..n {
                rhs.push(ok(sys.total_derivative(&morph.xi[i], s))?.mul(&ok(pr.prolong(j, &sigma.inc(i)))?));
            }
            let d = ok(sys.reduce(&lhs.sub(&Expr::sum(rhs))))?;
            ensure(oracle.is_zero(&d), || format!("{name}: consistency fails for nu{j} at {sigma:?}"))?;
        }
    }
    Ok(())
}

pub fn morphism_case() -> BoxedStrategy<(usize, Expr)> {
    (0..MORPHISMS.len())
        .prop_flat_map(|k| {
            let (name, m) = MORPHISMS[k];
            let p = load(name);
            let target = p.target(&p.morphisms.iter().find(|x| x.name == m).unwrap().target).unwrap().clone();
            let leaves = coordinates(&target, 1, true);
            (Just(k), rational_expr(leaves, 2, 6))
        })
        .boxed()
}

/// B*(D'_j e') = Σ_s α^{js} D_s B*(e') with α the inverse Jacobian.
pub fn chain_property(k: usize, e: &Expr) -> Outcome {
    let (name, m) = MORPHISMS[k];
    let p = load(name);
    let sys = &p.system;
    let named = p.morphisms.iter().find(|x| x.name == m).unwrap();
    let target = p.target(&named.target).unwrap();
    let oracle = sys.oracle(&Oracle::default());
    let pr = ok(Prolongation::new(&named.morphism, sys, &oracle))?;
    let e = ok(target.reduce(e))?;
    let pulled = ok(pr.pullback(&e))?;
    for j in 0..sys.n() {
        let lhs = ok(pr.pullback(&ok(target.total_derivative(&e, j))?))?;
        let mut rhs = Vec::new();
        for s in 0..sys.n() {
            rhs.push(pr.inverse_jacobian().get(j, s).mul(&ok(sys.total_derivative(&pulled, s))?));
        }
        let d = ok(sys.reduce(&lhs.sub(&Expr::sum(rhs))))?;
        ensure(oracle.is_zero(&d), || format!("{name}: chain rule fails in direction {j} on {}", target.render(&e)))?;
    }
    Ok(())
}

pub fn identity_morphism(name: &str) -> Outcome {
    let p = load(name);
    let m = Morphism::identity(&p.system);
    let checks = ok(jetkit::morphism::verify_morphism(&m, &p.system, &p.system, &Oracle::default()))?;
    ensure(checks.iter().all(|c| c.pass()), || format!("{name}: identity fails"))
}
