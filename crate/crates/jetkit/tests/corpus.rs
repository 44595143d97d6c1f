//! Golden runs of the built-in problems.

use jetkit::corpus;
use jetkit::expr::Verdict;
use jetkit::verify::{exit_code, verify_problem, Status};
use jetkit::Oracle;

#[test]
fn every_sound_problem_passes_symbolically() {
    let oracle = Oracle::default();
    for name in corpus::names().filter(|n| *n != "broken") {
        let p = corpus::load(name).unwrap();
        let reports = verify_problem(&p, &oracle);
        assert_eq!(reports.len(), p.assertions.len());
        for r in &reports {
            assert_eq!(r.status, Status::Pass, "{name}: {} {:?} {:?}", r.name, r.error, r.checks.iter().find(|c| !c.pass()));
            assert!(r.checks.iter().all(|c| c.verdict == Verdict::Symbolic), "{name}: {}", r.name);
        }
        assert_eq!(exit_code(&reports, true), 0, "{name}");
    }
}

#[test]
fn broken_problem_fails_only_its_field() {
    let p = corpus::load("broken").unwrap();
    let reports = verify_problem(&p, &Oracle::default());
    let failed: Vec<_> = reports.iter().filter(|r| !r.status.is_pass()).collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].kind, "pseudosymmetry");
    assert_eq!(failed[0].status, Status::Fail);
    let names: Vec<&str> = failed[0].checks.iter().filter(|c| !c.pass()).map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["tangency z_xxx", "tangency rho_x", "tangency rho_t"]);
    assert_eq!(exit_code(&reports, false), 1);
}

#[test]
fn verdicts_do_not_depend_on_the_seed() {
    let p = corpus::load("sine_gordon").unwrap();
    let a: Vec<Status> = verify_problem(&p, &Oracle::with_seed(0)).iter().map(|r| r.status).collect();
    let b: Vec<Status> = verify_problem(&p, &Oracle::with_seed(7)).iter().map(|r| r.status).collect();
    assert_eq!(a, b);
}
