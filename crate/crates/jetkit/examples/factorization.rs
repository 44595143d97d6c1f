// Quotients by pseudosymmetries: the heat equation by scaling and mKdV by its shift field.
//
// Run with `cargo run --example factorization`.

use std::error::Error;

use jetkit::corpus;
use jetkit::expr::Expr;
use jetkit::morphism::factor_check;
use jetkit::parser::{parse_expr_in, scope_of};
use jetkit::search::{hunt_relations, spans};
use jetkit::Oracle;

fn quotient(name: &str, basis: &[&str]) -> Result<(), Box<dyn Error>> {
    let p = corpus::load(name)?;
    let sys = p.field_system("Y");
    let oracle = sys.oracle(&Oracle::default());
    let y = p.field("Y").ok_or("missing field Y")?;
    let q = p.morphism("Q").ok_or("missing morphism Q")?;
    let target = p.target("q").ok_or("missing target q")?;

    let checks = factor_check(y, q, sys, target, &oracle)?;
    println!("{name}: {} invariance and quotient checks", checks.len());
    if let Some(c) = checks.iter().find(|c| !c.pass()) {
        return Err(format!("{name}: {} failed", c.name).into());
    }

    let scope = scope_of(target.spec());
    let basis: Vec<Expr> = basis.iter().map(|b| parse_expr_in(b, &scope)).collect::<Result<_, _>>()?;
    let rels = hunt_relations(Some(y), q, &basis, sys, &oracle)?;
    println!("  {} relation(s) among {} candidate monomials", rels.len(), basis.len());
    for r in &rels {
        println!("    {} = 0", target.render(&r.expr));
    }
    for rule in target.rules() {
        let lead = Expr::jet(&rule.var, rule.lead.clone());
        if !spans(&rels, &basis, &lead.sub(&rule.rhs))? {
            return Err(format!("{name}: relation for {} not recovered", target.render(&lead)).into());
        }
    }
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    quotient("heat_cole_hopf", &["nu1_x", "nu1_t", "nu2", "nu2_x", "nu1^2", "nu1*nu2"])?;
    quotient("mkdv_miura", &["nu1_xx", "nu2", "nu1^2", "nu1_t", "nu1*nu1_x", "nu2_x"])?;

    let p = corpus::load("mkdv_miura")?;
    let sys = p.field_system("Y");
    let oracle = sys.oracle(&Oracle::default());
    let literal = factor_check(p.field("Y").ok_or("missing field Y")?, p.morphism("Qliteral").ok_or("missing morphism")?, sys, p.target("qliteral").ok_or("missing target")?, &oracle)?;
    let bad: Vec<_> = literal.iter().filter(|c| !c.pass()).collect();
    println!("\nmkdv_miura with nu1_xx = nu2 - 2*nu1: {} failing check(s)", bad.len());
    for c in &bad {
        println!("  {}: {}", c.name, c.detail);
    }
    if bad.is_empty() {
        return Err("the linear relation was accepted".into());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
