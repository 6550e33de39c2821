//! A tiny local HTTP server with a deterministic monthly corpus.
//!
//! Serves `/YYYYMM-citibike-tripdata.zip` for every month of
//! [`CORPUS_YEARS`], each holding one `YYYYMM-citibike-tripdata.csv` of
//! generated trips, plus a few sample CSVs. Bytes depend only on the path,
//! so two servers hand out identical files. A request counter makes cache
//! hits observable.
//!
//! Routes:
//! * `/YYYYMM-citibike-tripdata.zip` for months in the corpus
//! * `/<name>.csv` for each entry of [`SAMPLE_CSVS`]
//! * `/broken/<name>` promises more bytes than it sends, then hangs up
//! * anything else is a 404

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader, Cursor, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zip::write::SimpleFileOptions;

use crate::dates::{Selector, YearMonth};
use crate::error::Result;
use crate::sources::{save_descriptor, SourceDescriptor};

pub const CORPUS_YEARS: (i32, i32) = (2013, 2014);
pub const TRIPS_PER_MONTH: usize = 40;
pub const FIXTURE_SOURCE: &str = "fixture";

pub const HOUSTON_CSV: &str = "\
year,month,city,sales,volume,median,listings,inventory
2000,1,Abilene,72,5380000,71400,701,6.3
2000,2,Abilene,98,6505000,58700,746,6.6
2000,3,Abilene,130,9285000,58100,784,6.8
2000,1,Amarillo,152,12381798,85500,1257,6.5
2000,2,Amarillo,173,17058313,91300,1268,6.5
2000,3,Amarillo,227,22055381,83400,1346,6.8
2000,1,Arlington,176,22591441,91600,1069,3.7
2000,2,Arlington,206,25496300,90200,1097,3.6
";

/// `(file name, body)` pairs served from the root.
pub const SAMPLE_CSVS: &[(&str, &str)] = &[
    ("HoustonChronicle.csv", HOUSTON_CSV),
    ("mtcars.csv", crate::sources::MTCARS_CSV),
];

pub fn trip_file_stem(ym: YearMonth) -> String {
    format!("{:04}{:02}-citibike-tripdata", ym.year(), ym.month())
}

/// Generated trips for one month; the same month always yields the same
/// text.
pub fn trip_csv(ym: YearMonth) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(ym.year() as u64 * 100 + ym.month() as u64);
    let days = days_in_month(ym);
    let mut out = String::from(
        "tripduration,starttime,stoptime,start_station_id,end_station_id,bikeid,usertype,gender\n",
    );
    for _ in 0..TRIPS_PER_MONTH {
        let day = rng.gen_range(1..=days);
        let start = rng.gen_range(0..22 * 3600);
        let duration = rng.gen_range(60..3600);
        let stop = start + duration;
        let usertype = if rng.gen_bool(0.8) { "Subscriber" } else { "Customer" };
        let _ = writeln!(
            out,
            "{duration},{},{},{},{},{},{usertype},{}",
            stamp(ym, day, start),
            stamp(ym, day, stop),
            rng.gen_range(72..3002),
            rng.gen_range(72..3002),
            rng.gen_range(14529..21690),
            rng.gen_range(0..3),
        );
    }
    out
}

fn days_in_month(ym: YearMonth) -> u32 {
    let (y, m) = (ym.year(), ym.month());
    match m {
        2 if (y % 4 == 0 && y % 100 != 0) || y % 400 == 0 => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

fn stamp(ym: YearMonth, day: u32, secs: u32) -> String {
    format!(
        "{:04}-{:02}-{:02} {:02}:{:02}:{:02}",
        ym.year(),
        ym.month(),
        day,
        secs / 3600,
        secs / 60 % 60,
        secs % 60
    )
}

/// The zip archive for one month, byte-for-byte reproducible.
pub fn trip_zip(ym: YearMonth) -> Vec<u8> {
    let mut zip = zip::ZipWriter::new(Cursor::new(Vec::new()));
    let stamp = zip::DateTime::from_date_and_time(2015, 1, 1, 0, 0, 0).expect("valid date");
    let opts = SimpleFileOptions::default()
        .compression_method(zip::CompressionMethod::Deflated)
        .last_modified_time(stamp)
        .unix_permissions(0o644);
    zip.start_file(format!("{}.csv", trip_file_stem(ym)), opts)
        .expect("in-memory zip");
    zip.write_all(trip_csv(ym).as_bytes()).expect("in-memory zip");
    zip.finish().expect("in-memory zip").into_inner()
}

fn in_corpus(ym: YearMonth) -> bool {
    (CORPUS_YEARS.0..=CORPUS_YEARS.1).contains(&ym.year())
}

/// Every month the server can hand out.
pub fn corpus_months() -> Vec<YearMonth> {
    corpus_selector().expand()
}

pub fn corpus_selector() -> Selector {
    Selector::years(CORPUS_YEARS.0..=CORPUS_YEARS.1)
}

enum Route {
    Body(Arc<Vec<u8>>),
    Truncated(Vec<u8>),
    NotFound,
}

#[derive(Default)]
struct Shared {
    requests: AtomicUsize,
    paths: Mutex<Vec<String>>,
    zips: Mutex<HashMap<YearMonth, Arc<Vec<u8>>>>,
    stop: AtomicBool,
}

impl Shared {
    fn route(&self, path: &str) -> Route {
        let path = path.split('?').next().unwrap_or("");
        let name = path.trim_start_matches('/');
        if let Some(rest) = name.strip_prefix("broken/") {
            let body = format!("{rest} is only partly here\n").into_bytes();
            return Route::Truncated(body);
        }
        if let Some((_, body)) = SAMPLE_CSVS.iter().find(|(n, _)| *n == name) {
            return Route::Body(Arc::new(body.as_bytes().to_vec()));
        }
        if let Some(stamp) = name.strip_suffix("-citibike-tripdata.zip") {
            if let Some(ym) = YearMonth::from_yyyymm(stamp).filter(|ym| in_corpus(*ym)) {
                let mut cache = self.zips.lock().expect("zip cache");
                let body = cache.entry(ym).or_insert_with(|| Arc::new(trip_zip(ym)));
                return Route::Body(body.clone());
            }
        }
        Route::NotFound
    }

    fn serve(&self, mut stream: TcpStream) -> io::Result<()> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut request_line = String::new();
        reader.read_line(&mut request_line)?;
        loop {
            let mut header = String::new();
            if reader.read_line(&mut header)? == 0 || header == "\r\n" || header == "\n" {
                break;
            }
        }
        let mut parts = request_line.split_whitespace();
        let method = parts.next().unwrap_or("");
        let path = parts.next().unwrap_or("/").to_string();
        self.requests.fetch_add(1, Ordering::SeqCst);
        self.paths.lock().expect("path log").push(path.clone());

        let head_only = method == "HEAD";
        if method != "GET" && !head_only {
            return write_response(&mut stream, "405 Method Not Allowed", b"", 0, false);
        }
        match self.route(&path) {
            Route::Body(body) => {
                write_response(&mut stream, "200 OK", &body, body.len(), head_only)
            }
            Route::Truncated(body) => {
                write_response(&mut stream, "200 OK", &body, body.len() * 10, head_only)
            }
            Route::NotFound => write_response(&mut stream, "404 Not Found", b"not found\n", 10, head_only),
        }
    }
}

fn write_response(
    stream: &mut TcpStream,
    status: &str,
    body: &[u8],
    content_length: usize,
    head_only: bool,
) -> io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status}\r\nContent-Length: {content_length}\r\nContent-Type: application/octet-stream\r\nConnection: close\r\n\r\n"
    )?;
    if !head_only {
        stream.write_all(body)?;
    }
    stream.flush()
}

/// A running fixture server; stops when dropped.
pub struct FixtureServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// Binds an ephemeral port on 127.0.0.1 and starts serving.
    pub fn start() -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared::default());
        let accept = shared.clone();
        let handle = std::thread::spawn(move || {
            for conn in listener.incoming() {
                if accept.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let worker = accept.clone();
                std::thread::spawn(move || {
                    let _ = worker.serve(stream);
                });
            }
        });
        Ok(FixtureServer {
            addr,
            shared,
            handle: Some(handle),
        })
    }

    /// `http://127.0.0.1:<port>`, without a trailing slash.
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}/{}", self.base_url(), path.trim_start_matches('/'))
    }

    pub fn month_url(&self, ym: YearMonth) -> String {
        self.url(&format!("{}.zip", trip_file_stem(ym)))
    }

    /// Requests received so far, of any kind.
    pub fn request_count(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }

    pub fn requested_paths(&self) -> Vec<String> {
        self.shared.paths.lock().expect("path log").clone()
    }

    pub fn url_template(&self) -> String {
        format!("{}/{{year}}{{month:02}}-citibike-tripdata.zip", self.base_url())
    }

    /// A monthly zip source named [`FIXTURE_SOURCE`] pointing at this
    /// server, defaulting to the whole corpus.
    pub fn descriptor(&self) -> SourceDescriptor {
        SourceDescriptor::new(FIXTURE_SOURCE)
            .url_template(self.url_template())
            .filename_pattern(r"^(\d{6})-")
            .default_selector(corpus_selector())
    }

    /// Writes [`descriptor`](Self::descriptor) to `<dir>/fixture/source.toml`
    /// so the command line can discover it.
    pub fn write_source(&self, dir: &Path) -> Result<PathBuf> {
        save_descriptor(&self.descriptor(), &dir.join(FIXTURE_SOURCE))
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Read;

    fn get(url: &str) -> (u16, Vec<u8>) {
        let addr = url.strip_prefix("http://").unwrap();
        let (host, path) = addr.split_once('/').unwrap();
        let mut s = TcpStream::connect(host).unwrap();
        write!(s, "GET /{path} HTTP/1.1\r\nHost: {host}\r\n\r\n").unwrap();
        let mut buf = Vec::new();
        s.read_to_end(&mut buf).unwrap();
        let split = buf.windows(4).position(|w| w == b"\r\n\r\n").unwrap();
        let head = String::from_utf8_lossy(&buf[..split]).to_string();
        let code = head.split_whitespace().nth(1).unwrap().parse().unwrap();
        (code, buf[split + 4..].to_vec())
    }

    #[test]
    fn months_are_deterministic_and_distinct() {
        let jul = YearMonth::new(2013, 7).unwrap();
        let aug = YearMonth::new(2013, 8).unwrap();
        assert_eq!(trip_zip(jul), trip_zip(jul));
        assert_ne!(trip_csv(jul), trip_csv(aug));
        assert_eq!(trip_csv(jul).lines().count(), TRIPS_PER_MONTH + 1);
        assert!(trip_csv(jul).lines().skip(1).all(|l| l.contains(",2013-07-")));
        assert_eq!(corpus_months().len(), 24);
    }

    #[test]
    fn routes_and_counter() {
        let srv = FixtureServer::start().unwrap();
        let jan = YearMonth::new(2014, 1).unwrap();
        let (code, body) = get(&srv.month_url(jan));
        assert_eq!((code, body), (200, trip_zip(jan)));
        assert_eq!(get(&srv.url("HoustonChronicle.csv")).1, HOUSTON_CSV.as_bytes());
        assert_eq!(get(&srv.url("201201-citibike-tripdata.zip")).0, 404);
        assert_eq!(get(&srv.url("nothing-here")).0, 404);
        assert_eq!(srv.request_count(), 4);
    }
}
