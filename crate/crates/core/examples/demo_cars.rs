// The smallest pipeline: the bundled 1974 road-test data.
//
// `etl_create` runs the bundled schema, copies the CSV through `raw/` and
// `load/`, and appends it into `mtcars`.

use etl::{EtlContext, Registry};

pub fn run_example() -> etl::Result<()> {
    let registry = Registry::with_builtins();
    let mut cars = EtlContext::new(&registry, "demo-cars", None, None)?;
    cars.etl_create(None)?;

    let rows = cars
        .db()
        .query("SELECT cyl, COUNT(*) AS n, AVG(mpg) AS mean_mpg FROM mtcars GROUP BY cyl")?;
    println!("cyl  n  mean_mpg");
    for r in &rows {
        println!(
            "{:>3} {:>2}  {:.1}",
            r[0].render(),
            r[1].render(),
            r[2].as_f64().unwrap_or(f64::NAN)
        );
    }
    assert_eq!(rows.len(), 3);

    println!("{}", cars.status()?);
    for entry in cars.phase_log() {
        println!("{:<9} {:?}", entry.verb.to_string(), entry.outcome);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("demo-cars pipeline");
}
