// Zero-curvature form of KdV, its Riccati covering and conservation law.
//
// Run with `cargo run --example zero_curvature`.

use std::error::Error;

use jetkit::corpus;
use jetkit::forms::{is_conservation_law, is_zcr, riccati_covering, ZcrConvention};
use jetkit::parser::render_rules;
use jetkit::Oracle;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let p = corpus::load("kdv_abt")?;
    let base = p.base_system()?;
    let oracle = base.oracle(&Oracle::default());
    let alpha = p.form("alpha").ok_or("kdv_abt has no form alpha")?;

    for c in is_zcr(alpha, &base, ZcrConvention::Standard, &oracle)? {
        println!("{:32} {}", c.name, c.verdict.label());
        if !c.pass() {
            return Err(format!("alpha is not a zero-curvature form: {}", c.detail).into());
        }
    }

    let r = riccati_covering(alpha, 1, &["rho"], &base, &oracle)?;
    let merged = r.covering.merge()?;
    println!("\ncovering from pivot 1:\n{}", render_rules(&merged).trim_end());
    for (i, x) in merged.spec().independent.iter().enumerate() {
        println!("mu d{x}: {}", merged.render(r.mu.scalar_comp(i)));
    }

    let declared = p.system.rules().iter().filter(|q| q.var == "rho");
    for q in declared {
        let built = r.covering.spec().rules.iter().find(|b| b.var == q.var && b.lead == q.lead).ok_or("missing rule")?;
        if !built.rhs.sub(&q.rhs).is_zero() {
            return Err("generated covering differs from the declared one".into());
        }
    }

    let law = is_conservation_law(&r.mu, &merged, &merged.oracle(&oracle))?;
    if !law.iter().all(|c| c.pass()) {
        return Err("mu is not conserved on the covering".into());
    }
    println!("\nmu is closed on the covering ({} checks)", law.len());

    let wrong = is_zcr(alpha, &base, ZcrConvention::Flipped, &oracle)?;
    println!("with the commutator sign flipped alpha {}", if wrong.iter().all(|c| c.pass()) { "still passes" } else { "fails" });
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
