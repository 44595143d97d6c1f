// Total derivatives on the KdV equation and reduction modulo its solved form.
//
// Run with `cargo run --example total_derivatives`.

use std::error::Error;

use jetkit::parser::{parse_expr_in, parse_problem};
use jetkit::Oracle;

const KDV: &str = "
[vars]
independent x t
local z

[equations]
z_xxx = -z_t - 6*z*z_x

[assert]
valid
";

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let p = parse_problem(KDV)?;
    let sys = &p.system;
    let scope = p.scope();

    let e = parse_expr_in("z*z_xx", &scope)?;
    let dx = sys.total_derivative(&e, 0)?;
    let dt = sys.total_derivative(&e, 1)?;
    println!("D_x(z*z_xx) = {}", sys.render(&dx));
    println!("D_t(z*z_xx) = {}", sys.render(&dt));

    let dxt = sys.total_derivative(&dx, 1)?;
    let dtx = sys.total_derivative(&dt, 0)?;
    if !dxt.sub(&dtx).is_zero() {
        return Err("total derivatives do not commute".into());
    }

    let raw = parse_expr_in("z_xxxx + z_xt + 6*z_x^2 + 6*z*z_xx", &scope)?;
    let red = sys.reduce(&raw)?;
    println!("D_x of the equation, reduced: {}", sys.render(&red));
    if !red.is_zero() {
        return Err("differential consequence did not reduce to zero".into());
    }

    let oracle = Oracle::default();
    for c in sys.validate(&oracle) {
        println!("{:40} {}", c.name, c.verdict.label());
        if !c.pass() {
            return Err(format!("{} failed", c.name).into());
        }
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
