// A source with its own extract and transform written in Rust.
//
// Extract downloads one CSV; transform keeps a single city and writes the
// result to `load/`. Load falls back to the default.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use etl::dates::Selector;
use etl::fetch::{smart_download, DownloadReport};
use etl::fixture::FixtureServer;
use etl::{EtlContext, Registry, SourceDescriptor, SourceHooks};

struct HousingHooks {
    url: String,
    city: String,
}

impl SourceHooks for HousingHooks {
    fn extract(&self, ctx: &mut EtlContext, _sel: Option<&Selector>) -> etl::Result<DownloadReport> {
        smart_download(ctx, &[self.url.clone()], None)
    }

    fn transform(&self, ctx: &mut EtlContext, _sel: Option<&Selector>) -> etl::Result<Vec<PathBuf>> {
        let raw = fs::read_to_string(ctx.raw_dir().join("HoustonChronicle.csv"))?;
        let mut lines = raw.lines();
        let mut out = String::from(lines.next().unwrap_or_default());
        out.push('\n');
        for line in lines.filter(|l| l.split(',').nth(2) == Some(self.city.as_str())) {
            out.push_str(line);
            out.push('\n');
        }
        let target = ctx.load_dir().join("housing.csv");
        fs::write(&target, out)?;
        Ok(vec![target])
    }
}

pub fn run_example() -> etl::Result<()> {
    let server = FixtureServer::start()?;
    let hooks = HousingHooks {
        url: server.url("HoustonChronicle.csv"),
        city: "Amarillo".into(),
    };
    let mut registry = Registry::new();
    registry.register(SourceDescriptor::new("housing").hooks(Arc::new(hooks)))?;

    let work = tempfile::tempdir()?;
    let mut housing = EtlContext::new(&registry, "housing", None, Some(work.path().into()))?;
    housing.etl_create(None)?;

    let rows = housing.db().query("SELECT month, sales, median FROM housing ORDER BY month")?;
    for r in &rows {
        let cells: Vec<String> = r.iter().map(|v| v.render()).collect();
        println!("{}", cells.join("\t"));
    }
    assert_eq!(rows.len(), 3);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("custom source");
}
