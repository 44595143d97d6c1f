//! Properties of total derivatives, reduction and coverings on the built-in systems.

mod common;

use common::*;
use jetkit::Expr;
use proptest::prelude::*;

const WITH_COVERING: [&str; 7] = ["kdv_abt", "sine_gordon", "short_pulse", "camassa_holm", "harry_dym", "cnls", "tzitzeica"];

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn total_derivatives_commute_on_shell((name, es) in problem_exprs(&SOUND, 2, true, 1)) {
        on_shell_commutation(name, &es[0])?;
    }

    #[test]
    fn reduce_is_a_projector((name, es) in problem_exprs(&SOUND, 3, false, 2)) {
        reduce_projector(name, &es[0], &es[1])?;
    }

    #[test]
    fn doubling_leaves_the_original_covering_alone((name, es) in problem_exprs(&WITH_COVERING, 1, true, 1)) {
        double_restricts(name, &es[0])?;
    }
}

#[test]
fn every_rule_reduces_to_zero() {
    for name in SOUND {
        let p = load(name);
        let sys = &p.system;
        for r in sys.rules() {
            let lead = Expr::jet(&r.var, r.lead.clone());
            assert!(sys.reduce(&lead.sub(&r.rhs)).unwrap().is_zero(), "{name}: {}", sys.render(&lead));
        }
    }
}

#[test]
fn every_system_is_compatible() {
    for name in SOUND {
        let p = load(name);
        let checks = p.system.validate(&p.system.oracle(&jetkit::Oracle::default()));
        assert!(checks.iter().all(|c| c.pass()), "{name}");
    }
}
