// Column types inferred from CSV content, and appends into existing
// tables.

use std::fs;

use etl::db::{infer_schema, sanitize_header, Database, SqliteDatabase, DEFAULT_SAMPLE_ROWS};

const READINGS: &str = "\
Station ID,2019 reading,ok?,note,
A1,1.5,true,,x
A2,2,false,calibrated,
B7,-3.25,TRUE,,
";

pub fn run_example() -> etl::Result<()> {
    let header = ["Station ID", "2019 reading", "ok?", "note", ""];
    println!("{:?}", sanitize_header(header));

    let dir = tempfile::tempdir()?;
    let csv = dir.path().join("readings.csv");
    fs::write(&csv, READINGS)?;

    let schema = infer_schema(&csv, DEFAULT_SAMPLE_ROWS)?;
    println!("{}", schema.create_statement());

    let mut db = SqliteDatabase::open(&dir.path().join("inferred.sqlite3"))?;
    db.load_csv("readings", &csv, true)?;
    db.load_csv("readings", &csv, true)?;
    print!("{}", db.dump_table("readings")?);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("schema inference");
}
