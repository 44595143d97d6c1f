// Pseudosymmetries of the KdV covering: prolongation, invariants, derived invariants.
//
// Run with `cargo run --example pseudosymmetry`.

use std::error::Error;

use jetkit::corpus;
use jetkit::parser::parse_expr_in;
use jetkit::pseudosym::{apply_field, check_pseudosymmetry, derived_invariants, is_invariant, pseudo_prolong};
use jetkit::{MultiIndex, Oracle};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let p = corpus::load("kdv_abt")?;
    let sys = p.field_system("Y");
    let oracle = sys.oracle(&Oracle::default());
    let y = p.field("Y").ok_or("kdv_abt has no field Y")?;

    for idx in [[1, 0], [2, 0], [0, 1]] {
        let col = pseudo_prolong(y, "z", &MultiIndex::from_slice(&idx), sys)?;
        let lead = sys.render(&sys.spec().jet("z", &idx));
        println!("Y on {lead:5} = {}", sys.render(&col[0]));
    }

    for c in check_pseudosymmetry(y, sys, &oracle)? {
        println!("{:28} {}", c.name, c.verdict.label());
        if !c.pass() {
            return Err(format!("{} failed: {}", c.name, c.detail).into());
        }
    }

    let scope = p.scope();
    let image = parse_expr_in("-z - 2*rho^2 - 2*lambda", &scope)?;
    if !is_invariant(y, &image, sys, &oracle)?.iter().all(|c| c.pass()) {
        return Err("the transformed potential is not invariant".into());
    }
    println!("\nY(-z - 2*rho^2 - 2*lambda) = 0");

    let xi = [parse_expr_in("x", &scope)?, parse_expr_in("t", &scope)?];
    let table = derived_invariants(&xi, &[image], sys, &oracle)?;
    for (i, row) in table.iter().enumerate() {
        let v = &row[0];
        let moved = apply_field(y, v, sys)?;
        let tag = if moved.iter().all(|e| oracle.is_zero(e)) { "invariant" } else { "NOT invariant" };
        println!("derived invariant d/d{}: {}  ({tag})", sys.spec().independent[i], sys.render(v));
        if tag != "invariant" {
            return Err("derived invariant is moved by Y".into());
        }
    }

    let plain = parse_expr_in("z", &scope)?;
    let moved = apply_field(y, &plain, sys)?;
    println!("\nY(z) = {} so z itself is not invariant", sys.render(&moved[0]));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
