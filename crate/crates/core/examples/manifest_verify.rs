// Every fetched file is recorded with its size and sha256; verifying the
// manifest finds files that were changed or removed afterwards.

use std::fs;

use etl::fetch::{verify_manifest, Manifest, VerifyStatus};
use etl::fixture::FixtureServer;
use etl::{EtlContext, Registry, Selector};

pub fn run_example() -> etl::Result<()> {
    let server = FixtureServer::start()?;
    let mut registry = Registry::new();
    registry.register(server.descriptor())?;
    let work = tempfile::tempdir()?;
    let mut ctx = EtlContext::new(&registry, "fixture", None, Some(work.path().into()))?;
    ctx.etl_extract(Some(&Selector::parse("2014", Some("1:3"))?))?;

    let manifest = Manifest::load(&ctx.manifest_path())?;
    for rec in &manifest.records {
        println!("{} {:>6} {}", &rec.sha256[..12], rec.bytes, rec.local_path.display());
    }

    let victim = ctx.raw_dir().join("201402-citibike-tripdata.zip");
    let mut bytes = fs::read(&victim)?;
    bytes[10] ^= 0xff;
    fs::write(&victim, bytes)?;
    fs::remove_file(ctx.raw_dir().join("201403-citibike-tripdata.zip"))?;

    for (path, status) in verify_manifest(&ctx)? {
        println!("{status:<8} {}", path.display());
    }
    let bad = verify_manifest(&ctx)?
        .into_iter()
        .filter(|(_, s)| *s != VerifyStatus::Ok)
        .count();
    assert_eq!(bad, 2);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("manifest verify");
}
