//! Convergence order of the Runge-Kutta integrator on the KdV Riccati line.

mod common;

use common::*;
use jetkit::expr::{jet_id, sym_id, Compiled};
use jetkit::numeric::rk4_path;
use jetkit::MultiIndex;
use proptest::prelude::*;

/// Error ratio at x = 1 between steps 1/10 and 1/20 for ρ_x = −ρ² − λ with z = 0, λ = −k².
pub fn rk4_ratio(k: f64, rho0: f64) -> f64 {
    let p = load("kdv_abt");
    let rule = p.system.rules().iter().find(|r| r.var == "rho" && r.lead.get(0) == 1).unwrap();
    let slots = [jet_id("rho", MultiIndex::zero(2)), jet_id("z", MultiIndex::zero(2)), sym_id("lambda")];
    let rhs = Compiled::new(&rule.rhs, &slots).unwrap();
    let lambda = -k * k;
    let f = move |_: f64, y: &[f64]| vec![rhs.eval(&[y[0], 0.0, lambda])];
    let exact = k * (k + (rho0 / k).atanh()).tanh();
    let err = |steps: usize| {
        let path = rk4_path(&f, &[rho0], 0.0, 1.0 / steps as f64, steps, 1);
        (path[steps].as_ref().unwrap()[0] - exact).abs()
    };
    err(10) / err(20)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rk4_is_fourth_order(k in 0.5f64..1.5, frac in -0.5f64..0.5) {
        let ratio = rk4_ratio(k, frac * k);
        prop_assert!((ratio - 16.0).abs() <= 3.2, "ratio {}", ratio);
    }
}
