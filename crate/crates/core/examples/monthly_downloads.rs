// A monthly zip source served by the local fixture server.
//
// Extract fetches each month once; a second run is answered from `raw/`.
// Transform and load can then work on a narrower selection.

use etl::fixture::FixtureServer;
use etl::{CleanupTarget, EtlContext, Registry, Selector};

pub fn run_example() -> etl::Result<()> {
    let server = FixtureServer::start()?;
    let mut registry = Registry::new();
    registry.register(server.descriptor())?;

    let work = tempfile::tempdir()?;
    let mut bikes = EtlContext::new(&registry, "fixture", None, Some(work.path().into()))?;
    bikes.set_jobs(8);

    let all = Selector::parse("2013:2014", None)?;
    bikes.etl_extract(Some(&all))?;
    let first = server.request_count();
    bikes.etl_extract(Some(&all))?;
    println!("requests: {first} on the first extract, {} on the second", server.request_count() - first);

    // only April to July 2014 go into the database
    let spring = Selector::parse("2014", Some("4:7"))?;
    bikes.etl_transform(Some(&spring))?.etl_load(Some(&spring))?;
    for t in bikes.db().list_tables()? {
        let n = bikes.db().query(&format!("SELECT COUNT(*) FROM \"{t}\""))?;
        println!("{t}: {} rows", n[0][0].render());
    }

    bikes.etl_cleanup(r"^2013", CleanupTarget::Raw)?;
    println!("{}", bikes.status()?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("monthly downloads");
}
