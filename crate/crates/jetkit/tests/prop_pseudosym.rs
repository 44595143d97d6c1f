//! Properties of pseudo-prolongation and invariants.

mod common;

use common::*;
use jetkit::Expr;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn factor_order_is_immaterial_on_shell((k, col) in field_case()) {
        factor_order(k, &col)?;
    }

    #[test]
    fn derived_invariants_are_invariant(k in 0..INVARIANTS.len(), coeffs in prop::collection::vec((-3i64..=3, -3i64..=3), 1..=3)) {
        derived_invariance(k, &coeffs)?;
    }

    #[test]
    fn zero_form_gives_the_classical_symmetry_test(a in -3i64..=3, b in -3i64..=3, c in -3i64..=3, nonlinear in -2i64..=2) {
        classical_heat(a, b, c, nonlinear)?;
    }
}

/// On the heat equation with U = 0, tangency is exactly D_x²φ − D_tφ = 0.
fn classical_heat(a: i64, b: i64, c: i64, nonlinear: i64) -> Result<(), TestCaseError> {
    use jetkit::pseudosym::{check_pseudosymmetry, FieldForm, PseudoField};
    let p = load("heat_cole_hopf");
    let sys = &p.system;
    let scope = p.scope();
    let parse = |s: &str| jetkit::parser::parse_expr_in(s, &scope).unwrap();
    let phi = Expr::int(a)
        .mul(&parse("u"))
        .add(&Expr::int(b).mul(&parse("u_x")))
        .add(&Expr::int(c).mul(&parse("u_t")))
        .add(&Expr::int(nonlinear).mul(&parse("u^2")));
    let field = PseudoField { a: vec![vec![Expr::zero(), Expr::zero()]], phi: vec![("u".into(), vec![phi.clone()])], form: FieldForm::none(2) };
    let oracle = sys.oracle(&jetkit::Oracle::default());
    let verdict = check_pseudosymmetry(&field, sys, &oracle).unwrap().iter().all(|c| c.pass());
    let lin = sys.total_derivative(&sys.total_derivative(&phi, 0).unwrap(), 0).unwrap().sub(&sys.total_derivative(&phi, 1).unwrap());
    let classical = oracle.is_zero(&sys.reduce(&lin).unwrap());
    prop_assert_eq!(verdict, classical);
    prop_assert_eq!(verdict, nonlinear == 0);
    Ok(())
}
