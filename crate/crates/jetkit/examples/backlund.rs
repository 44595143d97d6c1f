// Backlund and Cole-Hopf maps checked as differential morphisms between equations.
//
// Run with `cargo run --example backlund`.

use std::error::Error;

use jetkit::corpus;
use jetkit::morphism::{check_regularity, pullback, verify_morphism, Morphism};
use jetkit::parser::{parse_expr_in, scope_of};
use jetkit::Oracle;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let base = Oracle::default();
    for (name, morph, target) in [("kdv_abt", "B", "kdv"), ("sine_gordon", "B", "sg"), ("heat_cole_hopf", "B", "burgers"), ("short_pulse", "B", "sp")] {
        let p = corpus::load(name)?;
        let sys = &p.system;
        let oracle = sys.oracle(&base);
        let m = p.morphism(morph).ok_or("missing morphism")?;
        let t = p.target(target).ok_or("missing target")?;
        let reg = check_regularity(m, sys, &oracle);
        let checks = verify_morphism(m, sys, t, &oracle)?;
        let ok = reg.pass() && checks.iter().all(|c| c.pass());
        println!("{name:16} {morph} -> {target:8} regular {:9} rules {}/{} {}", reg.verdict.label(), checks.iter().filter(|c| c.pass()).count(), checks.len(), if ok { "ok" } else { "FAILED" });
        if !ok {
            return Err(format!("{name}: morphism {morph} failed").into());
        }
    }

    let p = corpus::load("kdv_abt")?;
    let sys = &p.system;
    let oracle = sys.oracle(&base);
    let scope = p.scope();
    let m = p.morphism("B").ok_or("missing morphism")?;
    let kdv = p.target("kdv").ok_or("missing target")?;
    let u = parse_expr_in("z'_x", &scope_of(kdv.spec()))?;
    println!("\npullback of z'_x: {}", sys.render(&pullback(m, &u, sys, &oracle)?));

    let wrong = Morphism::with_identity_base(sys, vec![("z'".into(), parse_expr_in("-z - 2*rho^2", &scope)?)]);
    let bad: Vec<_> = verify_morphism(&wrong, sys, kdv, &oracle)?.into_iter().filter(|c| !c.pass()).collect();
    println!("dropping the -2*lambda shift leaves {} rule(s) unsatisfied:", bad.len());
    for c in &bad {
        println!("  {}: {}", c.name, c.detail);
    }
    if bad.is_empty() {
        return Err("the unshifted map was accepted".into());
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
