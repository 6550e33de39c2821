mod demo_cars {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/demo_cars.rs"));
}

#[test]
fn demo_cars_runs() {
    demo_cars::run_example().expect("demo_cars example should run");
}

mod selectors {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/selectors.rs"));
}

#[test]
fn selectors_runs() {
    selectors::run_example().expect("selectors example should run");
}

mod monthly_downloads {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/monthly_downloads.rs"));
}

#[test]
fn monthly_downloads_runs() {
    monthly_downloads::run_example().expect("monthly_downloads example should run");
}

mod sql_scripts {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/sql_scripts.rs"));
}

#[test]
fn sql_scripts_runs() {
    sql_scripts::run_example().expect("sql_scripts example should run");
}

mod schema_inference {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/schema_inference.rs"));
}

#[test]
fn schema_inference_runs() {
    schema_inference::run_example().expect("schema_inference example should run");
}

mod custom_source {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/custom_source.rs"));
}

#[test]
fn custom_source_runs() {
    custom_source::run_example().expect("custom_source example should run");
}

mod declarative_source {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/declarative_source.rs"));
}

#[test]
fn declarative_source_runs() {
    declarative_source::run_example().expect("declarative_source example should run");
}

mod porting {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/porting.rs"));
}

#[test]
fn porting_runs() {
    porting::run_example().expect("porting example should run");
}

mod manifest_verify {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/manifest_verify.rs"));
}

#[test]
fn manifest_verify_runs() {
    manifest_verify::run_example().expect("manifest_verify example should run");
}

mod pushdown_bench {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/pushdown_bench.rs"));
}

#[test]
fn pushdown_bench_runs() {
    pushdown_bench::run_example().expect("pushdown_bench example should run");
}

mod connection_profiles {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/connection_profiles.rs"));
}

#[test]
fn connection_profiles_runs() {
    connection_profiles::run_example().expect("connection_profiles example should run");
}
