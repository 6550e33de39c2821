//! Push-down versus client-side aggregation.
//!
//! Both paths compute, for trips started in one year, the number of trips
//! per (station, day of month, hour) together with the distinct station and
//! day-of-year counts in each group. The push-down path is one `GROUP BY`
//! statement; the client path pulls the filtered rows out and aggregates
//! them in a hash map. The results must agree exactly.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::db::{Database, SqlScript, Value};
use crate::error::{EtlError, Result};

pub const TRIPS_TABLE: &str = "trips";
pub const BENCH_YEAR: i32 = 2013;
pub const DEFAULT_BENCH_ROWS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 2013;
const STATIONS: i64 = 330;

/// One output group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupRow {
    pub station: i64,
    pub day: i64,
    pub hour: i64,
    pub n: i64,
    pub num_stations: i64,
    pub num_days: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: usize,
    pub pushdown_secs: f64,
    pub client_secs: f64,
    pub pushdown_groups: usize,
    pub client_groups: usize,
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rows:        {}", self.rows)?;
        writeln!(
            f,
            "push-down:   {:.3} s, {} groups",
            self.pushdown_secs, self.pushdown_groups
        )?;
        write!(
            f,
            "client-side: {:.3} s, {} groups",
            self.client_secs, self.client_groups
        )
    }
}

/// Writes `rows` synthetic trips (`start_station_id,start_time`) to `path`.
/// Roughly nine in ten fall in September of [`BENCH_YEAR`], the rest in
/// the following year.
pub fn write_trips_csv(path: &Path, rows: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "start_station_id,start_time")?;
    for _ in 0..rows {
        let year = if rng.gen_bool(0.9) { BENCH_YEAR } else { BENCH_YEAR + 1 };
        let day = rng.gen_range(1..=30);
        let date = NaiveDate::from_ymd_opt(year, 9, day).expect("September day");
        let secs = rng.gen_range(0..86_400);
        let t = date
            .and_hms_opt(secs / 3600, secs / 60 % 60, secs % 60)
            .expect("valid time");
        let station = rng.gen_range(1..=STATIONS);
        writeln!(out, "{station},{}", t.format("%Y-%m-%d %H:%M:%S"))?;
    }
    out.flush()?;
    Ok(())
}

pub fn pushdown_sql(year: i32) -> String {
    format!(
        "SELECT start_station_id, \
                CAST(strftime('%d', start_time) AS INTEGER) AS day, \
                CAST(strftime('%H', start_time) AS INTEGER) AS hour, \
                COUNT(*) AS n, \
                COUNT(DISTINCT start_station_id) AS num_stations, \
                COUNT(DISTINCT strftime('%j', start_time)) AS num_days \
         FROM {TRIPS_TABLE} \
         WHERE strftime('%Y', start_time) = '{year:04}' \
         GROUP BY 1, 2, 3"
    )
}

fn int(v: &Value, what: &str) -> Result<i64> {
    v.as_i64()
        .ok_or_else(|| EtlError::Mismatch(format!("{what} is not an integer: {v:?}")))
}

/// Runs the aggregation inside the database.
pub fn aggregate_pushdown(db: &dyn Database, year: i32) -> Result<Vec<GroupRow>> {
    let mut out = Vec::new();
    for r in db.query(&pushdown_sql(year))? {
        out.push(GroupRow {
            station: int(&r[0], "station")?,
            day: int(&r[1], "day")?,
            hour: int(&r[2], "hour")?,
            n: int(&r[3], "n")?,
            num_stations: int(&r[4], "num_stations")?,
            num_days: int(&r[5], "num_days")?,
        });
    }
    out.sort();
    Ok(out)
}

/// Filters in the database, then groups every row in memory.
pub fn aggregate_client(db: &dyn Database, year: i32) -> Result<Vec<GroupRow>> {
    let sql = format!(
        "SELECT start_station_id, start_time FROM {TRIPS_TABLE} \
         WHERE strftime('%Y', start_time) = '{year:04}'"
    );
    type Acc = (i64, BTreeSet<i64>, BTreeSet<u32>);
    let mut groups: HashMap<(i64, i64, i64), Acc> = HashMap::new();
    let mut bad = None;
    db.for_each_row(&sql, &mut |row| {
        if bad.is_some() {
            return;
        }
        let station = row[0].as_i64();
        let t = row[1]
            .as_str()
            .and_then(|s| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").ok());
        let (Some(station), Some(t)) = (station, t) else {
            bad = Some(format!("{row:?}"));
            return;
        };
        let g = groups
            .entry((station, t.day() as i64, t.hour() as i64))
            .or_default();
        g.0 += 1;
        g.1.insert(station);
        g.2.insert(t.ordinal());
    })?;
    if let Some(row) = bad {
        return Err(EtlError::Mismatch(format!("unreadable row {row}")));
    }
    let mut out: Vec<GroupRow> = groups
        .into_iter()
        .map(|((station, day, hour), (n, st, days))| GroupRow {
            station,
            day,
            hour,
            n,
            num_stations: st.len() as i64,
            num_days: days.len() as i64,
        })
        .collect();
    out.sort();
    Ok(out)
}

/// Generates and loads `rows` synthetic trips into a fresh `trips` table
/// in `db`, runs both aggregations and fails with
/// [`EtlError::Mismatch`] unless they agree.
pub fn run_bench(db: &mut dyn Database, rows: usize, seed: u64, workdir: &Path) -> Result<BenchReport> {
    let csv = workdir.join(format!("{TRIPS_TABLE}.csv"));
    write_trips_csv(&csv, rows, seed)?;
    db.run_script(&SqlScript::new(format!("DROP TABLE IF EXISTS {TRIPS_TABLE};")))?;
    db.load_csv(TRIPS_TABLE, &csv, true)?;

    let (pushed, pushdown) = timed(|| aggregate_pushdown(db, BENCH_YEAR))?;
    let (client, client_time) = timed(|| aggregate_client(db, BENCH_YEAR))?;
    if pushed != client {
        let first = pushed
            .iter()
            .zip(&client)
            .find(|(a, b)| a != b)
            .map(|(a, b)| format!("{a:?} vs {b:?}"))
            .unwrap_or_else(|| format!("{} vs {} groups", pushed.len(), client.len()));
        return Err(EtlError::Mismatch(first));
    }
    Ok(BenchReport {
        rows,
        pushdown_secs: pushdown.as_secs_f64(),
        client_secs: client_time.as_secs_f64(),
        pushdown_groups: pushed.len(),
        client_groups: client.len(),
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, Duration)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::db::SqliteDatabase;

    #[test]
    fn paths_agree_on_small_and_empty_tables() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = SqliteDatabase::open(&dir.path().join("b.sqlite3")).unwrap();
        let r = run_bench(&mut db, 2_000, 7, dir.path()).unwrap();
        assert_eq!(r.pushdown_groups, r.client_groups);
        assert!(r.pushdown_groups > 0);

        let r = run_bench(&mut db, 0, 7, dir.path()).unwrap();
        assert_eq!((r.pushdown_groups, r.client_groups), (0, 0));
    }

    #[test]
    fn group_sizes_sum_to_filtered_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut db = SqliteDatabase::open(&dir.path().join("b.sqlite3")).unwrap();
        run_bench(&mut db, 500, 1, dir.path()).unwrap();
        let in_year = fs_count(&dir.path().join("trips.csv"));
        let groups = aggregate_client(&db, BENCH_YEAR).unwrap();
        assert_eq!(groups.iter().map(|g| g.n).sum::<i64>(), in_year);
        assert!(groups.iter().all(|g| g.num_stations == 1 && g.num_days == 1));
    }

    fn fs_count(csv: &Path) -> i64 {
        std::fs::read_to_string(csv)
            .unwrap()
            .lines()
            .skip(1)
            .filter(|l| l.contains(&format!(",{BENCH_YEAR}-")))
            .count() as i64
    }
}
