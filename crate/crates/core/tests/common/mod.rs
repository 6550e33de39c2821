//! Oracles and generators shared by the property and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

pub const STAMP_PATTERN: &str = r"^(\d{6})-";

/// Set-comprehension oracle: keep `f` when its base name starts with six
/// digits and a dash, and those digits name a selected year and month.
pub fn oracle_match(files: &[PathBuf], years: &BTreeSet<i32>, months: &BTreeSet<i32>) -> Vec<PathBuf> {
    files
        .iter()
        .filter(|f| {
            let base = f.file_name().unwrap().to_str().unwrap().as_bytes();
            if base.len() < 7 || base[6] != b'-' || !base[..6].iter().all(u8::is_ascii_digit) {
                return false;
            }
            let s = std::str::from_utf8(&base[..6]).unwrap();
            let y: i32 = s[..4].parse().unwrap();
            let m: i32 = s[4..].parse().unwrap();
            years.contains(&y) && months.contains(&m)
        })
        .cloned()
        .collect()
}

/// Renders a set as comma-separated runs, e.g. `1:3,5,9:10`.
pub fn range_text(set: &BTreeSet<i32>) -> String {
    let v: Vec<i32> = set.iter().copied().collect();
    let mut parts = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
            j += 1;
        }
        parts.push(if i == j {
            v[i].to_string()
        } else {
            format!("{}:{}", v[i], v[j])
        });
        i = j + 1;
    }
    parts.join(",")
}

pub fn random_subset<R: Rng>(rng: &mut R, lo: i32, hi: i32) -> BTreeSet<i32> {
    loop {
        let s: BTreeSet<i32> = (lo..=hi).filter(|_| rng.gen_bool(0.4)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// A random listing: stamped monthly files (some in subdirectories named
/// like stamps themselves), plus unrelated files.
pub fn random_files<R: Rng>(rng: &mut R) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for _ in 0..rng.gen_range(0..40) {
        let y = rng.gen_range(2008..=2018);
        let m = rng.gen_range(1..=12);
        let ext = ["zip", "csv", "txt"].choose(rng).unwrap();
        let name = format!("{y:04}{m:02}-trips.{ext}");
        files.push(match rng.gen_range(0..3) {
            0 => PathBuf::from(format!("raw/201301-dir/{name}")),
            _ => PathBuf::from(name),
        });
    }
    for _ in 0..rng.gen_range(0..5) {
        let noise = ["README.md", "stations.csv", "2013-07.csv", "x201301-a.zip", "201301.zip"];
        files.push(PathBuf::from(noise.choose(rng).unwrap()));
    }
    files.shuffle(rng);
    files
}

pub fn sorted(mut v: Vec<PathBuf>) -> Vec<PathBuf> {
    v.sort();
    v
}

pub fn file_names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}
