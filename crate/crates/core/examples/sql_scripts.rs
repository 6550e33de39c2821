// Splitting SQL scripts into statements and running them atomically.

use etl::db::{split_statements, Database, SqliteDatabase, SqlScript};
use etl::EtlError;

const SCHEMA: &str = "
-- people and their pets
CREATE TABLE person (id INTEGER PRIMARY KEY, name TEXT);
CREATE TABLE pet (id INTEGER PRIMARY KEY, owner INTEGER, note TEXT);
INSERT INTO pet VALUES (1, 1, 'likes ; semicolons');
/* a block comment; with a semicolon */
CREATE TRIGGER tidy AFTER DELETE ON person BEGIN
  DELETE FROM pet WHERE owner = old.id;
END;
";

pub fn run_example() -> etl::Result<()> {
    for (i, stmt) in split_statements(SCHEMA).iter().enumerate() {
        let first = stmt
            .lines()
            .find(|l| !l.starts_with("--") && !l.starts_with("/*"))
            .unwrap_or("");
        println!("{:>2}: {first}", i + 1);
    }

    let dir = tempfile::tempdir()?;
    let mut db = SqliteDatabase::open(&dir.path().join("scripts.sqlite3"))?;
    let ran = db.run_script(&SqlScript::new(SCHEMA))?;
    println!("ran {ran} statements, tables {:?}", db.list_tables()?);

    let broken = SqlScript::new("CREATE TABLE extra (x); INSERT INTO nowhere VALUES (1);");
    match db.run_script(&broken) {
        Err(EtlError::Script { index, message }) => {
            println!("statement {index} failed: {message}");
        }
        other => panic!("expected a script error, got {other:?}"),
    }
    // the first statement was rolled back with the second
    assert!(!db.list_tables()?.contains(&"extra".to_string()));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("sql scripts");
}
