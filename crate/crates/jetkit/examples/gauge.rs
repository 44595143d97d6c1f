// Gauge-transforms the KdV zero-curvature form and checks the result is still one.
//
// Run with `cargo run --example gauge`.

use std::error::Error;

use jetkit::corpus;
use jetkit::forms::{gauge_transform, is_zcr, ZcrConvention};
use jetkit::parser::{parse_matrix, render_form};
use jetkit::Oracle;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let p = corpus::load("kdv_abt")?;
    let base = p.base_system()?;
    let oracle = base.oracle(&Oracle::default());
    let alpha = p.form("alpha").ok_or("kdv_abt has no form alpha")?;

    for text in ["[[1, 0], [z, 1]]", "[[lambda, 0], [0, 1]]", "[[1, z_x], [0, 1]]"] {
        let s = parse_matrix(text, &p.scope())?;
        let g = gauge_transform(alpha, &s, &base, &oracle)?;
        println!("S = {text}\n{}", render_form("gauged", &g, &base).trim_end());
        let checks = is_zcr(&g, &base, ZcrConvention::Standard, &oracle)?;
        if !checks.iter().all(|c| c.pass()) {
            return Err(format!("gauge by {text} broke zero curvature").into());
        }
        println!("  still a zero-curvature form\n");
    }

    let singular = parse_matrix("[[1, z], [1, z]]", &p.scope())?;
    match gauge_transform(alpha, &singular, &base, &oracle) {
        Err(e) => println!("singular gauge rejected: {e}"),
        Ok(_) => return Err("singular gauge was accepted".into()),
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
