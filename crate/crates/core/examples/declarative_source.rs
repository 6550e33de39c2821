// Sources described in a `source.toml` instead of code.
//
// `scaffold_source` writes a starting descriptor; the registry finds it
// on a search path by name.

use std::fs;

use etl::fixture::FixtureServer;
use etl::sources::{load_descriptor_file, scaffold_source};
use etl::{EtlContext, Registry};

pub fn run_example() -> etl::Result<()> {
    let server = FixtureServer::start()?;
    let sources = tempfile::tempdir()?;

    let created = scaffold_source("houston", sources.path(), Some(&server.url("HoustonChronicle.csv")))?;
    for p in &created {
        println!("wrote {}", p.display());
    }
    println!("{}", fs::read_to_string(&created[0])?);

    // a hand-written descriptor with a bundled schema
    let cars = sources.path().join("cars");
    fs::create_dir_all(&cars)?;
    fs::write(cars.join("init.sql"), etl::sources::MTCARS_INIT_SQL)?;
    fs::write(
        cars.join("source.toml"),
        format!("name = \"cars\"\nurl_template = \"{}\"\n", server.url("mtcars.csv")),
    )?;
    let desc = load_descriptor_file(&cars.join("source.toml"))?;
    println!("cars init script:\n{}", desc.init_script.unwrap_or_default());

    let mut registry = Registry::new();
    registry.add_search_path(sources.path());
    for name in ["houston", "cars"] {
        let source = registry.resolve_or_discover(name)?;
        let work = tempfile::tempdir()?;
        let mut ctx = EtlContext::with_source(source, None, Some(work.path().into()))?;
        ctx.etl_create(None)?;
        println!("{name}: tables {:?}", ctx.db().list_tables()?);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("declarative source");
}
