//! Properties of zero-curvature forms, Riccati coverings and gauge transformations.

mod common;

use common::*;
use proptest::prelude::*;

fn entries(l: usize) -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((-3i64..=3, 1i64..=3), l * l)
}

fn polynomial() -> BoxedStrategy<jetkit::Expr> {
    let p = load("kdv_abt");
    let base = p.base_system().unwrap();
    rational_expr(coordinates(&base, 1, true), 2, 4)
        .prop_filter("polynomial", |e| e.is_polynomial())
        .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn constant_riccati_coverings_are_flat(l in 2usize..=3, seed in entries(3), a in -2i64..=2, b in -2i64..=2, pivot in 1usize..=3) {
        let pivot = pivot.min(l);
        constant_riccati(&seed[..l * l], a, b, pivot)?;
    }

    #[test]
    fn gauge_preserves_zero_curvature(name in prop::sample::select(&["kdv_abt", "sine_gordon"][..]), p in polynomial(), q in polynomial()) {
        gauge_keeps_zcr(name, &p, &q)?;
    }
}
