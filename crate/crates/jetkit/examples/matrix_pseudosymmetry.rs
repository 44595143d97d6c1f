// Tzitzeica: Riccati covering from a 3x3 form and a rank-two pseudosymmetry.
//
// Run with `cargo run --example matrix_pseudosymmetry`.

use std::error::Error;

use jetkit::corpus;
use jetkit::forms::{flatness_checks, riccati_covering};
use jetkit::parser::render_rules;
use jetkit::pseudosym::{check_r_pseudosymmetry, is_invariant};
use jetkit::Oracle;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let p = corpus::load("tzitzeica")?;
    let base = p.base_system()?;
    let oracle = base.oracle(&Oracle::default());
    let alpha = p.form("alpha").ok_or("missing form alpha")?;
    let r = riccati_covering(alpha, 3, &["rho1", "rho2"], &base, &oracle)?;
    println!("covering from pivot 3:\n{}\n", render_rules(&r.covering.merge()?).trim_end());

    let sys = p.field_system("Y");
    let oracle = sys.oracle(&Oracle::default());
    let y = p.field("Y").ok_or("missing field Y")?;
    let checks = check_r_pseudosymmetry(y, sys, &oracle)?;
    for c in &checks {
        println!("{:32} {}", c.name, c.verdict.label());
    }
    if !checks.iter().all(|c| c.pass()) {
        return Err("Y is not a 2-pseudosymmetry".into());
    }

    let image = &p.morphism("B").ok_or("missing morphism B")?.nu[0].1;
    if !is_invariant(y, image, sys, &oracle)?.iter().all(|c| c.pass()) {
        return Err("the Backlund image is not invariant".into());
    }
    println!("\nboth rows of Y annihilate {}", sys.render(image));

    let literal = p.form("gammaliteral").ok_or("missing form")?;
    let bad: Vec<_> = flatness_checks(literal, sys, &oracle)?.into_iter().filter(|c| !c.pass()).collect();
    println!("\nwith exp(3*z) in the last entry the form has {} nonzero curvature entries", bad.len());
    if bad.is_empty() {
        return Err("the exp(3*z) variant is flat".into());
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
