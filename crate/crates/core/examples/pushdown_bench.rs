// Aggregating inside the database versus pulling rows out first.

use etl::bench::{pushdown_sql, run_bench, BENCH_YEAR};
use etl::db::SqliteDatabase;

pub fn run_example() -> etl::Result<()> {
    let rows = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(20_000);
    let dir = tempfile::tempdir()?;
    let mut db = SqliteDatabase::open(&dir.path().join("bench.sqlite3"))?;
    println!("{}\n", pushdown_sql(BENCH_YEAR));
    let report = run_bench(&mut db, rows, 2013, dir.path())?;
    println!("{report}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("bench");
}
