// Runs every assertion of the built-in problems, the way `jetkit verify` does.
//
// Run with `cargo run --release --example verify_corpus`.

use std::error::Error;

use jetkit::corpus;
use jetkit::verify::{exit_code, verify_problem, Status};
use jetkit::Oracle;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let oracle = Oracle::default();
    for name in corpus::names() {
        let p = corpus::load(name)?;
        let reports = verify_problem(&p, &oracle);
        let passed = reports.iter().filter(|r| r.status.is_pass()).count();
        let code = exit_code(&reports, true);
        println!("{name:16} {passed}/{} assertions  exit {code}", reports.len());
        for r in reports.iter().filter(|r| !r.status.is_pass()) {
            println!("    {} [{}]", r.name, r.status.label());
            for c in r.checks.iter().filter(|c| !c.pass()) {
                println!("      {}: {}", c.name, c.detail);
            }
        }
        let expect_fail = name == "broken";
        if expect_fail != (code != 0) {
            return Err(format!("{name}: unexpected exit code {code}").into());
        }
        if expect_fail && !reports.iter().any(|r| r.status == Status::Fail && r.kind == "pseudosymmetry") {
            return Err("broken: the pseudosymmetry assertion should fail".into());
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
