// Doubles the KdV Riccati covering and checks the Darboux map between its two copies.
//
// Run with `cargo run --example darboux`.

use std::error::Error;

use jetkit::corpus;
use jetkit::morphism::{check_regularity, verify_morphism};
use jetkit::parser::render_rules;
use jetkit::Oracle;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let single = corpus::load("kdv_abt")?;
    let doubled = single.covering().double(&[("rho", "q"), ("lambda", "lambdahat")])?;
    let sys = doubled.merge()?;
    println!("doubled covering:\n{}", render_rules(&sys).trim_end());
    println!("distinct parameters: {:?}\n", sys.spec().distinct);

    let back = doubled.project(&["rho"]);
    if back.spec().rules.len() != single.system.rules().len() {
        return Err("projection did not recover the single covering".into());
    }

    let p = corpus::load("kdv_darboux")?;
    let oracle = p.system.oracle(&Oracle::default());
    let d = p.morphism("D").ok_or("missing morphism D")?;
    for (v, e) in &d.nu {
        println!("{v} = {}", p.system.render(e));
    }
    let reg = check_regularity(d, &p.system, &oracle);
    let target = p.target("kdvrho").ok_or("missing target")?;
    for c in verify_morphism(d, &p.system, target, &oracle)? {
        println!("{:32} {}", c.name, c.verdict.label());
        if !c.pass() {
            return Err(format!("{} failed: {}", c.name, c.detail).into());
        }
    }
    if !reg.pass() {
        return Err("Darboux map is not regular".into());
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
