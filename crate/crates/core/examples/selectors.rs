// Years and months as R-style ranges, and picking files by the date in
// their names.

use std::path::PathBuf;

use etl::dates::{extract_date_from_filename, match_files_by_year_months, parse_ranges};
use etl::Selector;
use regex::Regex;

pub fn run_example() -> etl::Result<()> {
    let ontime = Selector::parse("1996:1997", Some("1:6,9"))?;
    println!("{ontime}: {} months", ontime.expand().len());
    assert_eq!(ontime.expand().len(), 14);

    let bikes = Selector::parse("2014", Some("4:7"))?;
    let months: Vec<String> = bikes.expand().iter().map(ToString::to_string).collect();
    println!("{bikes}: {}", months.join(" "));

    let years: std::collections::BTreeSet<i32> = parse_ranges("2012,2014:2015")?;
    println!("years {years:?}");

    // a month outside 1..=12 is rejected up front
    assert!(Selector::parse("2014", Some("13")).is_err());

    let stamp = Regex::new(r"^(\d{6})-").expect("static pattern");
    let files: Vec<PathBuf> = ["201312-citibike-tripdata.zip", "201404-citibike-tripdata.zip", "stations.csv"]
        .iter()
        .map(PathBuf::from)
        .collect();
    for f in &files {
        let name = f.to_string_lossy();
        println!("{name:<30} {:?}", extract_date_from_filename(&name, &stamp)?);
    }
    let picked = match_files_by_year_months(&files, &stamp, &bikes)?;
    println!("selected {picked:?}");
    assert_eq!(picked, vec![PathBuf::from("201404-citibike-tripdata.zip")]);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().expect("selectors");
}
