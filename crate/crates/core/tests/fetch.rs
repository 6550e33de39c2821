use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use etl::fetch::{
    sha256_file, smart_download, smart_upload, verify_manifest, FetchErrorKind, Manifest,
    UploadTarget, VerifyStatus,
};
use etl::fixture::{trip_zip, FixtureServer};
use etl::{ConnectionProfile, EtlContext, Registry, Selector, YearMonth};

fn ctx(server: &FixtureServer, dir: &Path) -> EtlContext {
    EtlContext::open(Arc::new(server.descriptor()), None, Some(dir.to_path_buf()), true).unwrap()
}

#[test]
fn second_download_is_a_cache_hit() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let c = ctx(&srv, d.path());
    let urls: Vec<String> = ["201301", "201302", "201303"]
        .iter()
        .map(|m| srv.url(&format!("{m}-citibike-tripdata.zip")))
        .collect();
    let first = smart_download(&c, &urls, None).unwrap();
    assert_eq!((first.fetched.len(), first.skipped.len()), (3, 0));
    let second = smart_download(&c, &urls, None).unwrap();
    assert_eq!((second.fetched.len(), second.skipped.len()), (0, 3));
    assert_eq!(srv.request_count(), 3);
    assert_eq!(Manifest::load(&c.manifest_path()).unwrap().records.len(), 3);
}

#[test]
fn zero_byte_targets_are_refetched() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let c = ctx(&srv, d.path());
    fs::write(c.raw_dir().join("201305-citibike-tripdata.zip"), b"").unwrap();
    let url = srv.month_url(YearMonth::new(2013, 5).unwrap());
    let r = smart_download(&c, &[url], None).unwrap();
    assert_eq!(r.fetched.len(), 1);
    assert_eq!(
        fs::read(c.raw_dir().join("201305-citibike-tripdata.zip")).unwrap(),
        trip_zip(YearMonth::new(2013, 5).unwrap())
    );
}

#[test]
fn not_found_is_collected_per_file() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let c = ctx(&srv, d.path());
    let urls = vec![srv.url("HoustonChronicle.csv"), srv.url("nope.csv")];
    let r = smart_download(&c, &urls, None).unwrap();
    assert_eq!(r.fetched.len(), 1);
    assert_eq!(r.failed.len(), 1);
    assert_eq!(r.failed[0].kind, FetchErrorKind::Status(404));
    assert!(!c.raw_dir().join("nope.csv").exists());
}

#[test]
fn interrupted_body_leaves_nothing_behind() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let c = ctx(&srv, d.path());
    let r = smart_download(&c, &[srv.url("broken/cut.csv")], None).unwrap();
    assert_eq!(r.failed.len(), 1);
    assert_eq!(fs::read_dir(c.raw_dir()).unwrap().count(), 0);
    let manifest = Manifest::load(&c.manifest_path()).unwrap();
    assert!(manifest.records.is_empty());
}

#[test]
fn renamed_targets() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let c = ctx(&srv, d.path());
    let names = vec!["cars.csv".to_string()];
    let r = smart_download(&c, &[srv.url("mtcars.csv")], Some(&names)).unwrap();
    assert_eq!(r.fetched[0].local_path, Path::new("raw/cars.csv"));
    assert!(c.raw_dir().join("cars.csv").is_file());
}

#[test]
fn file_urls_are_copied() {
    let d = tempfile::tempdir().unwrap();
    let src = d.path().join("local.csv");
    fs::write(&src, "a,b\n1,2\n").unwrap();
    let work = d.path().join("work");
    let c = EtlContext::new(&Registry::with_builtins(), "demo-cars", None, Some(work))
        .unwrap()
        .quiet();
    let url = url::Url::from_file_path(&src).unwrap().to_string();
    let r = smart_download(&c, &[url], None).unwrap();
    assert_eq!(r.fetched[0].sha256, sha256_file(&src).unwrap());
}

#[test]
fn parallel_fetch_keeps_the_manifest_whole() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let mut c = ctx(&srv, d.path());
    c.set_jobs(16);
    c.etl_extract(None).unwrap();
    let text = fs::read_to_string(c.manifest_path()).unwrap();
    assert_eq!(text.lines().count(), 24);
    let m = Manifest::load(&c.manifest_path()).unwrap();
    let paths: BTreeSet<_> = m.records.iter().map(|r| r.local_path.clone()).collect();
    assert_eq!(paths.len(), 24);
    for rec in &m.records {
        assert_eq!(sha256_file(&c.dir().join(&rec.local_path)).unwrap(), rec.sha256);
        assert_eq!(fs::metadata(c.dir().join(&rec.local_path)).unwrap().len(), rec.bytes);
    }
}

#[test]
fn servers_hand_out_identical_bytes() {
    let a = FixtureServer::start().unwrap();
    let b = FixtureServer::start().unwrap();
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sel = Selector::parse("2013", Some("1:4")).unwrap();
    let mut ca = ctx(&a, da.path());
    let mut cb = ctx(&b, db.path());
    ca.etl_extract(Some(&sel)).unwrap();
    cb.etl_extract(Some(&sel)).unwrap();
    let shas = |c: &EtlContext| -> BTreeSet<String> {
        Manifest::load(&c.manifest_path())
            .unwrap()
            .records
            .into_iter()
            .map(|r| r.sha256)
            .collect()
    };
    assert_eq!(shas(&ca), shas(&cb));
    assert_eq!(shas(&ca).len(), 4);
}

#[test]
fn verify_tracks_edits_and_deletions() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let mut c = ctx(&srv, d.path());
    c.etl_extract(Some(&Selector::parse("2014", Some("1:2")).unwrap())).unwrap();
    assert!(verify_manifest(&c).unwrap().iter().all(|(_, s)| *s == VerifyStatus::Ok));
    fs::remove_file(c.raw_dir().join("201401-citibike-tripdata.zip")).unwrap();
    let statuses: Vec<VerifyStatus> = verify_manifest(&c).unwrap().into_iter().map(|(_, s)| s).collect();
    assert_eq!(statuses.iter().filter(|s| **s == VerifyStatus::Missing).count(), 1);

    // a re-fetch appends a fresh record and the file verifies again
    c.etl_extract(Some(&Selector::parse("2014", Some("1:2")).unwrap())).unwrap();
    assert!(verify_manifest(&c).unwrap().iter().all(|(_, s)| *s == VerifyStatus::Ok));
}

#[test]
fn upload_to_directory_and_database() {
    let srv = FixtureServer::start().unwrap();
    let d = tempfile::tempdir().unwrap();
    let mut c = ctx(&srv, d.path());
    c.etl_extract(Some(&Selector::parse("2013", Some("1:2")).unwrap()))
        .unwrap()
        .etl_transform(None)
        .unwrap();

    let mirror = d.path().join("mirror");
    let r = smart_upload(&c, &UploadTarget::Directory(mirror.clone()), None).unwrap();
    assert_eq!(r.copied.len(), 2);
    let r = smart_upload(&c, &UploadTarget::Directory(mirror), None).unwrap();
    assert_eq!((r.copied.len(), r.skipped.len()), (0, 2));

    let other = ConnectionProfile::embedded(d.path().join("other.sqlite3"));
    let pattern = regex::Regex::new("^201301").unwrap();
    let r = smart_upload(&c, &UploadTarget::Database(other.clone()), Some(&pattern)).unwrap();
    assert_eq!(r.copied, ["201301-citibike-tripdata.csv"]);
    let db = etl::db::connect(&other).unwrap();
    assert_eq!(db.list_tables().unwrap(), ["201301-citibike-tripdata"]);
}
