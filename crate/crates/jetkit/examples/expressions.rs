// Parse, simplify and compare expressions; ask the oracle about zero-equivalence.
//
// Run with `cargo run --example expressions`.

use std::error::Error;

use jetkit::expr::{canonical, sym_id};
use jetkit::parser::parse_expr;
use jetkit::{Oracle, Verdict};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let e = parse_expr("(a + b)^2 - a^2 - 2*a*b")?;
    println!("(a + b)^2 - a^2 - 2*a*b  =  {e}");
    if canonical(&e) != canonical(&parse_expr("b^2")?) {
        return Err("expansion did not reduce to b^2".into());
    }

    let r = parse_expr("1/(x - 1) - 1/(x + 1)")?;
    println!("1/(x - 1) - 1/(x + 1)    =  {r}");
    let d = r.diff(sym_id("x"));
    println!("d/dx                     =  {d}");

    let oracle = Oracle::default();
    let cases = [
        ("sin(z)^2 + cos(z)^2 - 1", true),
        ("exp(a + b) - exp(a)*exp(b)", true),
        ("tan(4*arctan(r)) - 4*r*(1 - r^2)/(1 - 6*r^2 + r^4)", true),
        ("sin(z) - z", false),
    ];
    for (text, zero) in cases {
        let v = oracle.check(&parse_expr(text)?);
        println!("{:52} {}", text, v.label());
        if v.is_zero() != zero {
            return Err(format!("unexpected verdict for {text}: {v:?}").into());
        }
    }
    if !matches!(oracle.check(&parse_expr("x - x")?), Verdict::Symbolic) {
        return Err("x - x is not symbolically zero".into());
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
