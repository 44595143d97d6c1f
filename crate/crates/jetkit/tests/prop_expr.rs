//! Properties of the expression layer.

mod common;

use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn normalization_is_idempotent(e in kernel_expr(plain_symbols(), 8, 24)) {
        normalize_idempotent(&e)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn parse_inverts_render(e in kernel_expr(plain_symbols(), 5, 16)) {
        parse_render_round_trip(&e)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn partial_derivatives_commute(e in kernel_expr(plain_symbols(), 4, 12), s in 0usize..4, r in 0usize..4) {
        let names = ["a", "b", "c", "w"];
        mixed_partials(&e, names[s], names[r])?;
    }

    #[test]
    fn identity_substitution(e in kernel_expr(plain_symbols(), 5, 16)) {
        substitute_identity(&e)?;
    }

    #[test]
    fn simplification_is_numerically_sound(t in tree(), points in sample_points()) {
        numeric_soundness(&t, &points)?;
    }
}
