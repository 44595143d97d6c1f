// Searches polynomial templates for pseudosymmetries of KdV and sine-Gordon.
//
// Run with `cargo run --example search`.

use std::error::Error;

use jetkit::corpus;
use jetkit::search::search_pseudosymmetry;
use jetkit::Oracle;

/// Total solution dimension over all scanned multiples c.
fn run(problem: &str, search: &str) -> Result<usize, Box<dyn Error>> {
    let p = corpus::load(problem)?;
    let sys = &p.system;
    let decl = p.search(search).ok_or("missing search")?;
    let ansatz = p.ansatz(decl).ok_or("missing form")?;
    let outcomes = search_pseudosymmetry(&ansatz, sys, &sys.oracle(&Oracle::default()))?;
    let dim: usize = outcomes.iter().map(|o| o.basis.len()).sum();
    println!("{problem} {search}: {} unknowns, {} monomials, solution dimension {dim}", ansatz.unknown_count(), ansatz.monomials.len());
    for o in &outcomes {
        for f in &o.fields {
            let comps: Vec<String> = f.phi.iter().map(|(v, col)| format!("phi_{v} = {}", sys.render(&col[0]))).collect();
            println!("  c = {}: {}", o.c, comps.join(", "));
        }
        if !o.verified() {
            return Err(format!("{problem} {search}: a basis field failed re-verification").into());
        }
    }
    Ok(dim)
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let expect = [("kdv_abt", "S", 1), ("sine_gordon", "S", 0), ("sine_gordon", "S4", 1)];
    for (problem, search, want) in expect {
        let dim = run(problem, search)?;
        if dim != want {
            return Err(format!("{problem} {search}: dimension {dim}, expected {want}").into());
        }
    }
    println!("\nquadratic templates miss the sine-Gordon field; quartic ones find it");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
