// Rebuilding a database from `load/` alone, and copying it elsewhere.
//
// After one full run the load directory holds everything the database
// needs. A new schema can be applied with `init` followed by `load`, and
// the same files can populate a second database.

use etl::db::{dump_all, SqlScript};
use etl::fixture::FixtureServer;
use etl::{ConnectionProfile, EtlContext, Registry, Selector};

pub fn run_example() -> etl::Result<()> {
    let server = FixtureServer::start()?;
    let mut registry = Registry::new();
    registry.register(server.descriptor())?;
    let work = tempfile::tempdir()?;
    let sel = Selector::parse("2013", Some("7:9"))?;

    let mut first = EtlContext::new(&registry, "fixture", None, Some(work.path().into()))?;
    first.etl_create(Some(&sel))?;
    let fetched = server.request_count();

    // reconfigure: typed tables with an index each, then reload from load/
    let mut schema = String::new();
    for ym in sel.expand() {
        let t = format!("{}{:02}-citibike-tripdata", ym.year(), ym.month());
        schema.push_str(&format!(
            "DROP TABLE IF EXISTS \"{t}\";\n\
             CREATE TABLE \"{t}\" (tripduration INTEGER, starttime TEXT, stoptime TEXT,\n\
               start_station_id INTEGER, end_station_id INTEGER, bikeid INTEGER,\n\
               usertype TEXT, gender INTEGER);\n\
             CREATE INDEX \"{t}_station\" ON \"{t}\" (start_station_id);\n"
        ));
    }
    first.etl_init(Some(SqlScript::new(schema)))?.etl_load(Some(&sel))?;
    println!("network requests during reload: {}", server.request_count() - fetched);

    // port the same load/ into a second database
    let other = work.path().join("ported.sqlite3");
    let mut second = EtlContext::new(
        &registry,
        "fixture",
        Some(ConnectionProfile::embedded(&other)),
        Some(work.path().into()),
    )?;
    second.etl_load(Some(&sel))?;

    let a = dump_all(first.db())?;
    let b = dump_all(second.db())?;
    println!("tables: {:?}", a.keys().collect::<Vec<_>>());
    println!("dumps identical: {}", a == b);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("porting");
}
