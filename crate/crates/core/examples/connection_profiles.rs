// Connection profiles from an INI option file.
//
// Keys in `[client]` apply to every group; the named group overrides
// them. `engine = sqlite` (or no host) means an embedded database file.

use std::fs;

use etl::db::{connect, profile_from_config, Engine};
use etl::EtlError;

const PROFILES: &str = "\
[client]
user = analyst
password = hunter2
port = 3306

[local]
engine = sqlite
database = warehouse.sqlite3

[remote]
host = 127.0.0.1
port = 9
database = airlines
";

pub fn run_example() -> etl::Result<()> {
    let dir = tempfile::tempdir()?;
    let ini = dir.path().join("profiles.ini");
    fs::write(&ini, PROFILES)?;

    let local = profile_from_config(&ini, "local")?;
    assert_eq!(local.engine, Engine::EmbeddedFile);
    println!("{local:?}");
    println!("{}", connect(&local)?.describe());

    let remote = profile_from_config(&ini, "remote")?;
    println!("{remote:?}");
    match connect(&remote) {
        Err(EtlError::DbUnreachable(why)) => println!("remote: {why}"),
        Ok(db) => println!("remote: {}", db.describe()),
        Err(e) => return Err(e),
    }

    match profile_from_config(&ini, "staging") {
        Err(e) => println!("staging: {e}"),
        Ok(p) => println!("staging: {p:?}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("connection profiles");
}
