//! Every example runs to completion.

mod expressions {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/expressions.rs"));
}

#[test]
fn example_expressions() {
    expressions::run_example().expect("expressions example");
}

mod total_derivatives {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/total_derivatives.rs"));
}

#[test]
fn example_total_derivatives() {
    total_derivatives::run_example().expect("total_derivatives example");
}

mod zero_curvature {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/zero_curvature.rs"));
}

#[test]
fn example_zero_curvature() {
    zero_curvature::run_example().expect("zero_curvature example");
}

mod gauge {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/gauge.rs"));
}

#[test]
fn example_gauge() {
    gauge::run_example().expect("gauge example");
}

mod pseudosymmetry {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/pseudosymmetry.rs"));
}

#[test]
fn example_pseudosymmetry() {
    pseudosymmetry::run_example().expect("pseudosymmetry example");
}

mod backlund {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/backlund.rs"));
}

#[test]
fn example_backlund() {
    backlund::run_example().expect("backlund example");
}

mod factorization {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/factorization.rs"));
}

#[test]
fn example_factorization() {
    factorization::run_example().expect("factorization example");
}

mod search {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/search.rs"));
}

#[test]
fn example_search() {
    search::run_example().expect("search example");
}

mod soliton {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/soliton.rs"));
}

#[test]
fn example_soliton() {
    soliton::run_example().expect("soliton example");
}

mod darboux {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/darboux.rs"));
}

#[test]
fn example_darboux() {
    darboux::run_example().expect("darboux example");
}

mod matrix_pseudosymmetry {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/matrix_pseudosymmetry.rs"));
}

#[test]
fn example_matrix_pseudosymmetry() {
    matrix_pseudosymmetry::run_example().expect("matrix_pseudosymmetry example");
}

mod verify_corpus {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/verify_corpus.rs"));
}

#[test]
fn example_verify_corpus() {
    verify_corpus::run_example().expect("verify_corpus example");
}
